#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "banditlab/csv.hpp"

using namespace banditlab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << text;
}

RunLogRecord record(const std::string& condition, int run, int trial, Choice choice, int reward,
                    const std::string& raw = "") {
  RunLogRecord r;
  r.condition_id = condition;
  r.agent = "test-agent";
  r.reward_structure = "symmetric";
  r.run_id = run;
  r.trial = trial;
  r.choice = choice;
  r.reward = reward;
  r.raw_token = raw;
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("csv");

TEST_CASE("field escaping round-trips through the splitter") {
  const std::vector<std::string> fields{
      "plain", "with,comma", "with \"quotes\"", "", "trailing ", "mix,\"of\",both"};
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  CHECK(csv_split(line, "test") == fields);
}

TEST_CASE("plain fields stay unquoted") {
  CHECK(csv_escape("abc") == "abc");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}

TEST_CASE("splitter rejects malformed quoting") {
  CHECK_THROWS_AS(csv_split("a,\"unterminated", "test"), CsvError);
  CHECK_THROWS_AS(csv_split("a,b\"c,d", "test"), CsvError);
  CHECK(csv_split("", "test") == std::vector<std::string>{""});
  CHECK(csv_split("a,,b", "test") == std::vector<std::string>{"a", "", "b"});
}

TEST_CASE("run log rows carry the documented schema") {
  RunLogRecord r = record("cond-1", 3, 7, Choice::Y, 1, " Y");
  r.temperature = 0.5;
  r.top_p = 1.0;
  CHECK(run_log_row(r) == "cond-1,test-agent,symmetric,0.5,1,3,7,Y,1, Y,1");

  const RunLogRecord invalid = record("cond-1", 3, 8, Choice::Invalid, 0, "Planet");
  CHECK(run_log_row(invalid) == "cond-1,test-agent,symmetric,,,3,8,Invalid,0,Planet,0");
}

TEST_CASE("run log write/read round trip preserves every field") {
  const std::string path = temp_path("banditlab_roundtrip.csv");
  std::vector<RunLogRecord> records;
  records.push_back(record("c", 0, 1, Choice::X, 1, "X"));
  records.push_back(record("c", 0, 2, Choice::Invalid, 0, "multi\nline\\token\rdone"));
  records.push_back(record("c", 0, 3, Choice::Y, 0, " Y,with\"comma"));
  records[0].temperature = 2.0;
  records[0].top_p = 0.5;

  write_run_log_csv(path, records);
  const auto back = read_run_log_csv(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].condition_id == records[i].condition_id);
    CHECK(back[i].agent == records[i].agent);
    CHECK(back[i].reward_structure == records[i].reward_structure);
    CHECK(back[i].temperature == records[i].temperature);
    CHECK(back[i].top_p == records[i].top_p);
    CHECK(back[i].run_id == records[i].run_id);
    CHECK(back[i].trial == records[i].trial);
    CHECK(back[i].choice == records[i].choice);
    CHECK(back[i].reward == records[i].reward);
    CHECK(back[i].raw_token == records[i].raw_token);
  }

  // Rewriting read-back data is byte-identical: formatting is canonical.
  const std::string path2 = temp_path("banditlab_roundtrip2.csv");
  write_run_log_csv(path2, back);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("reader rejects structural damage") {
  const std::string path = temp_path("banditlab_bad.csv");

  write_text(path, "wrong,header\n");
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  const std::string header(kRunLogHeader);
  write_text(path, header + "\nc,a,symmetric,,,0,1,X,1,tok\n");  // 10 fields
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  write_text(path, header + "\nc,a,symmetric,,,0,1,Q,1,tok,1\n");  // bad choice
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  write_text(path, header + "\nc,a,symmetric,,,0,1,X,2,tok,1\n");  // bad reward
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  write_text(path, header + "\nc,a,symmetric,,,0,1,X,1,tok,0\n");  // valid contradicts choice
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  write_text(path, header + "\nc,a,symmetric,,,0,1,Invalid,0,tok,1\n");
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  write_text(path, header + "\nc,a,symmetric,,,0,1,X,1,tok,1\nc,a,symmetric,,,0,3,X,1,tok,1\n");
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);  // trial gap

  write_text(path, header + "\nc,a,symmetric,,,0,1,X,1,tok,1\nc,a,symmetric,,,0,1,Y,0,tok,1\n");
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);  // duplicate trial

  write_text(path, header + "\nc,a,symmetric,,,0,1,X,1,bad\\escape,1\n");
  CHECK_THROWS_AS(read_run_log_csv(path), CsvError);

  CHECK_THROWS_AS(read_run_log_csv(temp_path("banditlab_does_not_exist.csv")), CsvError);
}

TEST_CASE("error messages name the file and line") {
  const std::string path = temp_path("banditlab_lineinfo.csv");
  write_text(path, std::string(kRunLogHeader) +
                       "\nc,a,symmetric,,,0,1,X,1,tok,1\nc,a,symmetric,,,zero,2,X,1,tok,1\n");
  try {
    read_run_log_csv(path);
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    const std::string message = e.what();
    CHECK(message.find(path + ":3") != std::string::npos);
  }
}

TEST_CASE("records group into ordered runs") {
  std::vector<RunLogRecord> records;
  records.push_back(record("b", 1, 2, Choice::Y, 0));
  records.push_back(record("b", 1, 1, Choice::X, 1));
  records.push_back(record("a", 0, 1, Choice::X, 0));
  const auto runs = runs_from_records(records);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].condition_id == "a");
  CHECK(runs[1].condition_id == "b");
  REQUIRE(runs[1].trials.size() == 2);
  CHECK(runs[1].trials[0].trial == 1);  // sorted by trial
  CHECK(runs[1].trials[1].trial == 2);
}

TEST_CASE("fit datasets filter by structure and mask invalid trials") {
  std::vector<RunLogRecord> records;
  records.push_back(record("c", 0, 1, Choice::X, 1));
  records.push_back(record("c", 0, 2, Choice::Invalid, 0, "oops"));
  records.push_back(record("c", 0, 3, Choice::Y, 0));
  RunLogRecord other = record("c2", 1, 1, Choice::Y, 1);
  other.reward_structure = "asymmetric";
  records.push_back(other);

  const FitDataset data = fit_dataset_from_records(records, "symmetric");
  CHECK(data.structure_label == "symmetric");
  REQUIRE(data.runs.size() == 1);
  const FitRun& run = data.runs[0];
  REQUIRE(run.choices.size() == 3);
  CHECK(run.valid == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(run.choices[0] == 0);
  CHECK(run.choices[2] == 1);
  CHECK(run.rewards == std::vector<std::uint8_t>{1, 0, 0});

  const FitDataset asym = fit_dataset_from_records(records, "asymmetric");
  REQUIRE(asym.runs.size() == 1);
  CHECK(asym.runs[0].run_id == 1);
}

TEST_CASE("double formatting is shortest round-trip") {
  RunLogRecord r = record("c", 0, 1, Choice::X, 1);
  r.temperature = 0.1;
  r.top_p = 2.0;
  const std::string row = run_log_row(r);
  CHECK(row.find(",0.1,2,") != std::string::npos);
}

TEST_CASE("condition summary rows in long format") {
  const std::string path = temp_path("banditlab_summary.csv");
  ConditionSummary s;
  s.condition_id = "cond";
  s.n_runs = 2;
  s.warmup = 10;
  s.metrics.push_back({"total_reward", 25.0, 24.0, 26.0, 2});
  s.stubbornness_rate = 0.5;
  s.amplification_index = 0.25;
  s.rigidity_index = 0.75;
  s.invalid_rate = 0.0;
  write_condition_summary_csv(path, {s});
  const std::string text = slurp(path);
  CHECK(text ==
        "condition_id,metric,mean,ci_low,ci_high,n\n"
        "cond,total_reward,25,24,26,2\n"
        "cond,stubbornness_rate,0.5,,,2\n"
        "cond,amplification_index,0.25,,,2\n"
        "cond,rigidity_index,0.75,,,2\n"
        "cond,invalid_rate,0,,,2\n");
}

TEST_CASE("fit output writers emit their documented headers") {
  Chains chains;
  chains.n_chains = 1;
  chains.n_draws = 2;
  chains.dim = 2;
  chains.names = {"mu_a", "mu_tau"};
  chains.draws = {0.5, 1.5, 0.25, -1.0};
  chains.divergences = {0};

  const std::string draws_path = temp_path("banditlab_draws.csv");
  write_draws_csv(draws_path, chains);
  CHECK(slurp(draws_path) ==
        "chain,iteration,parameter,value\n"
        "0,0,mu_a,0.5\n"
        "0,0,mu_tau,1.5\n"
        "0,1,mu_a,0.25\n"
        "0,1,mu_tau,-1\n");

  const std::string summary_path = temp_path("banditlab_fit_summary.csv");
  write_summary_csv(summary_path, {{"mu_a", 0.1, 0.2, -0.3, 0.5, 1.01, 350.0}});
  CHECK(slurp(summary_path) ==
        "parameter,mean,sd,ci_low,ci_high,rhat,ess\n"
        "mu_a,0.1,0.2,-0.3,0.5,1.01,350\n");

  const std::string params_path = temp_path("banditlab_run_params.csv");
  write_run_params_csv(params_path, {{0.25, 3.0}, {0.5, 1.25}});
  CHECK(slurp(params_path) ==
        "run,learning_rate,inverse_temperature\n"
        "0,0.25,3\n"
        "1,0.5,1.25\n");

  LoglikMatrix matrix;
  matrix.n_draws = 2;
  matrix.n_runs = 1;
  matrix.values = {-1.5, -2.25};
  const std::string loglik_path = temp_path("banditlab_loglik.csv");
  write_loglik_csv(loglik_path, matrix);
  CHECK(slurp(loglik_path) ==
        "draw,run,loglik\n"
        "0,0,-1.5\n"
        "1,0,-2.25\n");
}

TEST_SUITE_END();
