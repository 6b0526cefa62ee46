#include "banditlab/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace banditlab {

namespace {

// Shortest round-trip decimal form, so rewrites of equal data are
// byte-identical across runs and platforms.
std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

// raw_token may contain arbitrary provider bytes; newlines and backslashes
// are escaped so every record stays on one physical line.
std::string escape_token(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_token(const std::string& s, const std::string& context) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw CsvError(context + ": dangling escape in raw_token");
    ++i;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw CsvError(context + ": unknown escape in raw_token");
    }
  }
  return out;
}

int parse_int(const std::string& field, const std::string& context) {
  int value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw CsvError(context + ": expected integer, got '" + field + "'");
  }
  return value;
}

double parse_double(const std::string& field, const std::string& context) {
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw CsvError(context + ": expected number, got '" + field + "'");
  }
  return value;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line, const std::string& context) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"') {
      if (!current.empty()) throw CsvError(context + ": stray quote inside unquoted field");
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (quoted) throw CsvError(context + ": unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

const char* const kRunLogHeader =
    "condition_id,agent,reward_structure,temperature,top_p,run_id,trial,choice,reward,"
    "raw_token,valid";

std::string run_log_row(const RunLogRecord& r) {
  std::string row;
  row += csv_escape(r.condition_id);
  row += ',';
  row += csv_escape(r.agent);
  row += ',';
  row += csv_escape(r.reward_structure);
  row += ',';
  row += fmt_opt(r.temperature);
  row += ',';
  row += fmt_opt(r.top_p);
  row += ',';
  row += std::to_string(r.run_id);
  row += ',';
  row += std::to_string(r.trial);
  row += ',';
  row += to_string(r.choice);
  row += ',';
  row += std::to_string(r.reward);
  row += ',';
  row += csv_escape(escape_token(r.raw_token));
  row += ',';
  row += is_valid(r.choice) ? '1' : '0';
  return row;
}

void write_run_log_csv(const std::string& path, const std::vector<RunLogRecord>& records) {
  auto out = open_out(path);
  out << kRunLogHeader << '\n';
  for (const RunLogRecord& r : records) out << run_log_row(r) << '\n';
  if (!out) throw CsvError("write failed for '" + path + "'");
}

std::vector<RunLogRecord> read_run_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  const auto context = [&] { return path + ":" + std::to_string(line_no); };

  if (!std::getline(in, line)) throw CsvError(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRunLogHeader) throw CsvError(context() + ": unexpected header");

  std::vector<RunLogRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv_split(line, context());
    if (fields.size() != 11) {
      throw CsvError(context() + ": expected 11 fields, got " + std::to_string(fields.size()));
    }
    RunLogRecord r;
    r.condition_id = fields[0];
    r.agent = fields[1];
    r.reward_structure = fields[2];
    if (!fields[3].empty()) r.temperature = parse_double(fields[3], context());
    if (!fields[4].empty()) r.top_p = parse_double(fields[4], context());
    r.run_id = parse_int(fields[5], context());
    r.trial = parse_int(fields[6], context());
    try {
      r.choice = choice_from_string(fields[7]);
    } catch (const std::invalid_argument& e) {
      throw CsvError(context() + ": " + e.what());
    }
    r.reward = parse_int(fields[8], context());
    if (r.reward != 0 && r.reward != 1) throw CsvError(context() + ": reward must be 0 or 1");
    r.raw_token = unescape_token(fields[9], context());
    const int valid = parse_int(fields[10], context());
    if (valid != (is_valid(r.choice) ? 1 : 0)) {
      throw CsvError(context() + ": valid flag contradicts choice");
    }
    records.push_back(std::move(r));
  }

  // Trial indices must form 1..T per (condition, run), with no duplicates.
  std::map<std::pair<std::string, int>, std::vector<int>> trials;
  for (const RunLogRecord& r : records) trials[{r.condition_id, r.run_id}].push_back(r.trial);
  for (auto& [key, ts] : trials) {
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts[i] != static_cast<int>(i) + 1) {
        throw CsvError(path + ": run " + key.first + "/" + std::to_string(key.second) +
                       " has gaps or duplicate trials");
      }
    }
  }
  return records;
}

std::vector<RunLog> runs_from_records(const std::vector<RunLogRecord>& records) {
  std::map<std::pair<std::string, int>, RunLog> grouped;
  for (const RunLogRecord& r : records) {
    RunLog& log = grouped[{r.condition_id, r.run_id}];
    log.condition_id = r.condition_id;
    log.run_id = r.run_id;
    log.trials.push_back({r.trial, r.choice, r.reward, r.raw_token});
  }
  std::vector<RunLog> out;
  out.reserve(grouped.size());
  for (auto& [key, log] : grouped) {
    std::sort(log.trials.begin(), log.trials.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.trial < b.trial; });
    out.push_back(std::move(log));
  }
  return out;
}

FitDataset fit_dataset_from_records(const std::vector<RunLogRecord>& records,
                                    const std::string& structure_label) {
  std::vector<RunLogRecord> kept;
  for (const RunLogRecord& r : records) {
    if (r.reward_structure == structure_label) kept.push_back(r);
  }
  FitDataset data;
  data.structure_label = structure_label;
  for (const RunLog& log : runs_from_records(kept)) {
    FitRun run;
    run.condition_id = log.condition_id;
    run.run_id = log.run_id;
    run.choices.reserve(log.trials.size());
    run.rewards.reserve(log.trials.size());
    run.valid.reserve(log.trials.size());
    for (const TrialRecord& t : log.trials) {
      run.choices.push_back(t.choice == Choice::Y ? 1 : 0);
      run.rewards.push_back(static_cast<std::uint8_t>(t.reward));
      run.valid.push_back(is_valid(t.choice) ? 1 : 0);
    }
    data.runs.push_back(std::move(run));
  }
  return data;
}

void write_condition_summary_csv(const std::string& path,
                                 const std::vector<ConditionSummary>& summaries) {
  auto out = open_out(path);
  out << "condition_id,metric,mean,ci_low,ci_high,n\n";
  for (const ConditionSummary& s : summaries) {
    for (const MetricSummary& m : s.metrics) {
      out << csv_escape(s.condition_id) << ',' << m.metric << ',' << fmt_double(m.mean) << ','
          << fmt_double(m.ci_low) << ',' << fmt_double(m.ci_high) << ',' << m.n << '\n';
    }
    const auto index_row = [&](const char* name, double value) {
      out << csv_escape(s.condition_id) << ',' << name << ',' << fmt_double(value) << ",,,"
          << s.n_runs << '\n';
    };
    index_row("stubbornness_rate", s.stubbornness_rate);
    index_row("amplification_index", s.amplification_index);
    index_row("rigidity_index", s.rigidity_index);
    index_row("invalid_rate", s.invalid_rate);
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

void write_run_metrics_csv(const std::string& path, const std::vector<RunMetrics>& runs) {
  auto out = open_out(path);
  out << "condition_id,run_id,n_trials,n_valid,total_reward,target_rate,c_bar,choice_bias,"
         "loss_shift,win_shift,post_warmup_loss_shift,post_warmup_win_shift,"
         "post_warmup_monomorphic,adjusted_choice_bias\n";
  for (const RunMetrics& m : runs) {
    out << csv_escape(m.condition_id) << ',' << m.run_id << ',' << m.n_trials << ','
        << m.n_valid << ',' << m.total_reward << ',' << fmt_double(m.target_rate) << ','
        << fmt_opt(m.c_bar) << ',' << fmt_opt(m.choice_bias) << ',' << fmt_opt(m.loss_shift)
        << ',' << fmt_opt(m.win_shift) << ',' << fmt_opt(m.post_warmup_loss_shift) << ','
        << fmt_opt(m.post_warmup_win_shift) << ',' << (m.post_warmup_monomorphic ? 1 : 0)
        << ',' << fmt_opt(m.adjusted_choice_bias) << '\n';
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

void write_draws_csv(const std::string& path, const Chains& chains) {
  auto out = open_out(path);
  out << "chain,iteration,parameter,value\n";
  for (std::size_t c = 0; c < chains.n_chains; ++c) {
    for (std::size_t d = 0; d < chains.n_draws; ++d) {
      for (std::size_t p = 0; p < chains.dim; ++p) {
        out << c << ',' << d << ',' << csv_escape(chains.names[p]) << ','
            << fmt_double(chains.at(c, d, p)) << '\n';
      }
    }
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

void write_summary_csv(const std::string& path, const std::vector<ParameterSummary>& rows) {
  auto out = open_out(path);
  out << "parameter,mean,sd,ci_low,ci_high,rhat,ess\n";
  for (const ParameterSummary& r : rows) {
    out << csv_escape(r.name) << ',' << fmt_double(r.mean) << ',' << fmt_double(r.sd) << ','
        << fmt_double(r.ci_low) << ',' << fmt_double(r.ci_high) << ',' << fmt_double(r.rhat)
        << ',' << fmt_double(r.ess) << '\n';
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

void write_run_params_csv(const std::string& path, const std::vector<RWParams>& params) {
  auto out = open_out(path);
  out << "run,learning_rate,inverse_temperature\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    out << i << ',' << fmt_double(params[i].learning_rate) << ','
        << fmt_double(params[i].inverse_temperature) << '\n';
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

void write_loglik_csv(const std::string& path, const LoglikMatrix& matrix) {
  auto out = open_out(path);
  out << "draw,run,loglik\n";
  for (std::size_t d = 0; d < matrix.n_draws; ++d) {
    for (std::size_t r = 0; r < matrix.n_runs; ++r) {
      out << d << ',' << r << ',' << fmt_double(matrix.at(d, r)) << '\n';
    }
  }
  if (!out) throw CsvError("write failed for '" + path + "'");
}

}  // namespace banditlab
