// Command-line front end: experiment grids, model fitting, reporting,
// recovery self-tests, and split-half reliability.
//
// Exit codes: 0 success, 1 validation error, 2 runtime/provider failure,
// 3 fit-quality or recovery failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "banditlab/csv.hpp"
#include "banditlab/inference.hpp"
#include "banditlab/orchestrator.hpp"

namespace {

using namespace banditlab;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitFitQuality = 3;

struct SamplerFlags {
  SamplerConfig config;
  std::string config_file;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file,
                    "JSON sampler config (chains, warmup, samples, target_accept, "
                    "leapfrog, seed); flags override its values");
    cmd->add_option("--chains", config.n_chains, "MCMC chains");
    cmd->add_option("--warmup-draws", config.n_warmup, "Adaptation iterations per chain");
    cmd->add_option("--samples", config.n_samples, "Kept draws per chain");
    cmd->add_option("--target-accept", config.target_accept, "Dual-averaging target");
    cmd->add_option("--leapfrog", config.n_leapfrog, "Max leapfrog steps per transition");
    cmd->add_option("--seed", config.master_seed, "Sampler master seed");
  }

  // The config file seeds the defaults; explicitly passed flags win.
  SamplerConfig resolve(const CLI::App* cmd) const {
    SamplerConfig out = config;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw PlanError("cannot open sampler config '" + config_file + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw PlanError(config_file + ": " + e.what());
      }
      SamplerConfig from_file;
      from_file.n_chains = j.value("chains", from_file.n_chains);
      from_file.n_warmup = j.value("warmup", from_file.n_warmup);
      from_file.n_samples = j.value("samples", from_file.n_samples);
      from_file.target_accept = j.value("target_accept", from_file.target_accept);
      from_file.n_leapfrog = j.value("leapfrog", from_file.n_leapfrog);
      from_file.master_seed = j.value("seed", from_file.master_seed);
      if (!cmd->count("--chains")) out.n_chains = from_file.n_chains;
      if (!cmd->count("--warmup-draws")) out.n_warmup = from_file.n_warmup;
      if (!cmd->count("--samples")) out.n_samples = from_file.n_samples;
      if (!cmd->count("--target-accept")) out.target_accept = from_file.target_accept;
      if (!cmd->count("--leapfrog")) out.n_leapfrog = from_file.n_leapfrog;
      if (!cmd->count("--seed")) out.master_seed = from_file.master_seed;
    }
    return out;
  }
};

std::vector<RunLogRecord> read_all_logs(const std::vector<std::string>& paths) {
  if (paths.empty()) throw PlanError("no run-log files given");
  std::vector<RunLogRecord> records;
  for (const std::string& path : paths) {
    const auto part = read_run_log_csv(path);
    records.insert(records.end(), part.begin(), part.end());
  }
  return records;
}

void print_fit_brief(const FitResult& fit) {
  std::printf("%-16s %10s %10s %10s %10s %8s %8s\n", "parameter", "mean", "sd", "ci_low",
              "ci_high", "rhat", "ess");
  const auto print_row = [](const ParameterSummary& s) {
    std::printf("%-16s %10.4f %10.4f %10.4f %10.4f %8.3f %8.0f\n", s.name.c_str(), s.mean,
                s.sd, s.ci_low, s.ci_high, s.rhat, s.ess);
  };
  for (const ParameterSummary& s : fit.unconstrained) {
    if (s.name.rfind("z_", 0) == 0) continue;  // per-run offsets stay in the CSV
    print_row(s);
  }
  for (const ParameterSummary& s : fit.natural_group) print_row(s);
  std::printf("divergence rate: %.4f\n", fit.chains.divergence_rate());
}

int cmd_run(const std::string& plan_path, const std::string& out_dir, bool force,
            int max_requests, std::uint64_t seed, bool seed_given) {
  ExperimentPlan plan = load_plan(plan_path);
  if (seed_given) plan.master_seed = seed;
  RunPlanOptions options;
  options.out_dir = out_dir;
  options.force = force;
  options.max_requests = max_requests;
  const RunPlanResult result = run_plan(plan, options);
  for (const auto& file : result.log_files) std::printf("wrote %s\n", file.c_str());
  std::printf("wrote %s\n", result.summary_file.c_str());
  for (const ConditionSummary& s : result.summaries) {
    std::printf("%s: n=%d invalid_rate=%.4f stubbornness=%.3f amplification=%.3f "
                "rigidity=%.3f\n",
                s.condition_id.c_str(), s.n_runs, s.invalid_rate, s.stubbornness_rate,
                s.amplification_index, s.rigidity_index);
  }
  return kExitOk;
}

int cmd_fit(const std::vector<std::string>& log_paths, const std::string& out_dir,
            const std::string& structure_filter, const SamplerConfig& sampler) {
  const auto records = read_all_logs(log_paths);
  std::set<std::string> structures;
  for (const auto& r : records) structures.insert(r.reward_structure);
  if (!structure_filter.empty()) {
    if (!structures.count(structure_filter)) {
      throw PlanError("no records with reward_structure '" + structure_filter + "'");
    }
    structures = {structure_filter};
  }
  // One independent fit per reward structure.
  for (const std::string& label : structures) {
    const FitDataset data = fit_dataset_from_records(records, label);
    std::printf("fitting %zu runs under structure '%s'\n", data.runs.size(), label.c_str());
    const FitResult fit = fit_dataset(data, sampler);
    const std::string summary = write_fit_outputs(out_dir, "fit_" + label, fit);
    print_fit_brief(fit);
    std::printf("wrote %s\n", summary.c_str());
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& summary_paths,
               const std::vector<std::string>& fit_paths,
               const std::vector<std::string>& reliability_paths, const std::string& out_dir) {
  if (summary_paths.empty() && fit_paths.empty() && reliability_paths.empty()) {
    throw PlanError("report: no input files given");
  }
  for (const auto& group : {summary_paths, fit_paths, reliability_paths}) {
    for (const std::string& path : group) {
      if (!std::filesystem::exists(path)) throw PlanError("report: missing input '" + path + "'");
    }
  }
  std::filesystem::create_directories(out_dir);

  const auto read_lines = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PlanError("report: cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw PlanError("report: empty input '" + path + "'");
    return lines;
  };

  // Long-format concatenation straight from the condition summaries, plus a
  // wide table with one row per condition.
  if (!summary_paths.empty()) {
    const std::string long_path = out_dir + "/report_conditions_long.csv";
    std::ofstream long_out(long_path, std::ios::binary);
    long_out << "condition_id,metric,mean,ci_low,ci_high,n\n";

    std::map<std::string, std::map<std::string, std::vector<std::string>>> wide;
    std::vector<std::string> metric_order;
    std::vector<std::string> condition_order;
    for (const std::string& path : summary_paths) {
      const auto lines = read_lines(path);
      if (lines.front() != "condition_id,metric,mean,ci_low,ci_high,n") {
        throw PlanError("report: '" + path + "' is not a condition summary table");
      }
      for (std::size_t i = 1; i < lines.size(); ++i) {
        long_out << lines[i] << '\n';
        const auto fields = csv_split(lines[i], path);
        if (fields.size() != 6) throw PlanError("report: malformed row in '" + path + "'");
        if (!wide.count(fields[0])) condition_order.push_back(fields[0]);
        if (std::find(metric_order.begin(), metric_order.end(), fields[1]) == metric_order.end()) {
          metric_order.push_back(fields[1]);
        }
        wide[fields[0]][fields[1]] = {fields[2], fields[3], fields[4]};
      }
    }
    if (!long_out) throw RunError("write failed for '" + long_path + "'");

    const std::string wide_path = out_dir + "/report_conditions_wide.csv";
    std::ofstream wide_out(wide_path, std::ios::binary);
    wide_out << "condition_id";
    for (const std::string& metric : metric_order) {
      wide_out << ',' << metric << "_mean," << metric << "_ci_low," << metric << "_ci_high";
    }
    wide_out << '\n';
    for (const std::string& condition : condition_order) {
      wide_out << csv_escape(condition);
      for (const std::string& metric : metric_order) {
        const auto& cells = wide[condition][metric];
        if (cells.size() == 3) {
          wide_out << ',' << cells[0] << ',' << cells[1] << ',' << cells[2];
        } else {
          wide_out << ",,,";
        }
      }
      wide_out << '\n';
    }
    if (!wide_out) throw RunError("write failed for '" + wide_path + "'");
    std::printf("wrote %s\nwrote %s\n", long_path.c_str(), wide_path.c_str());
  }

  const auto concat_with_source = [&](const std::vector<std::string>& paths,
                                      const std::string& expected_header,
                                      const std::string& out_path) {
    if (paths.empty()) return;
    std::ofstream out(out_path, std::ios::binary);
    out << "source," << expected_header << '\n';
    for (const std::string& path : paths) {
      const auto lines = read_lines(path);
      if (lines.front() != expected_header) {
        throw PlanError("report: '" + path + "' has unexpected header");
      }
      const std::string stem = std::filesystem::path(path).stem().string();
      for (std::size_t i = 1; i < lines.size(); ++i) {
        out << csv_escape(stem) << ',' << lines[i] << '\n';
      }
    }
    if (!out) throw RunError("write failed for '" + out_path + "'");
    std::printf("wrote %s\n", out_path.c_str());
  };
  concat_with_source(fit_paths, "parameter,mean,sd,ci_low,ci_high,rhat,ess",
                     out_dir + "/report_posteriors.csv");
  concat_with_source(reliability_paths, "parameter,icc,n_subjects,k",
                     out_dir + "/report_reliability.csv");
  return kExitOk;
}

int cmd_recover(double group_a, double group_tau, double sigma_a, double sigma_tau, int n_runs,
                int n_trials, const std::string& structure_name, bool x_primed,
                std::uint64_t sim_seed, double tol_a, double tol_tau,
                const std::string& out_dir, const SamplerConfig& sampler) {
  if (!(group_a > 0.0 && group_a < 1.0)) throw PlanError("recover: --a must lie in (0,1)");
  if (!(group_tau > 0.0 && group_tau < 5.0)) throw PlanError("recover: --tau must lie in (0,5)");

  CohortSpec spec;
  spec.hyper.mu_a = normal_quantile(group_a);
  spec.hyper.sigma_a = sigma_a;
  spec.hyper.mu_tau = normal_quantile(group_tau / 5.0);
  spec.hyper.sigma_tau = sigma_tau;
  spec.n_runs = n_runs;
  spec.n_trials = n_trials;
  spec.structure = preset_structure(structure_name);
  spec.x_primed = x_primed;
  spec.condition_id = "recovery-" + structure_name;

  const RecoveryTolerance tol{tol_a, tol_tau};
  const RecoveryReport report = recover(spec, sim_seed, sampler, tol);

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/recovery.csv";
  std::ofstream out(path, std::ios::binary);
  out << "parameter,truth,posterior_mean,tolerance,pass\n";
  out << "A_group," << report.true_a << ',' << report.fit_a << ',' << tol.learning_rate << ','
      << (report.a_ok ? 1 : 0) << '\n';
  out << "tau_group," << report.true_tau << ',' << report.fit_tau << ','
      << tol.inverse_temperature << ',' << (report.tau_ok ? 1 : 0) << '\n';
  if (!out) throw RunError("write failed for '" + path + "'");

  std::printf("A_group:   truth %.4f  posterior %.4f  (tol %.3f)  %s\n", report.true_a,
              report.fit_a, tol.learning_rate, report.a_ok ? "PASS" : "FAIL");
  std::printf("tau_group: truth %.4f  posterior %.4f  (tol %.3f)  %s\n", report.true_tau,
              report.fit_tau, tol.inverse_temperature, report.tau_ok ? "PASS" : "FAIL");
  std::printf("wrote %s\n", path.c_str());
  return report.passed() ? kExitOk : kExitFitQuality;
}

int cmd_reliability(const std::vector<std::string>& log_paths, const std::string& structure_label,
                    const std::string& out_dir, const SamplerConfig& sampler) {
  const auto records = read_all_logs(log_paths);
  const FitDataset data = fit_dataset_from_records(records, structure_label);
  if (data.runs.empty()) {
    throw PlanError("no records with reward_structure '" + structure_label + "'");
  }
  const ReliabilityResult result = split_half_reliability(data, sampler);

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/reliability.csv";
  std::ofstream out(path, std::ios::binary);
  out << "parameter,icc,n_subjects,k\n";
  const auto row = [&](const char* name, const std::optional<double>& icc) {
    out << name << ',';
    if (icc) out << *icc;
    else out << "degenerate";
    out << ',' << result.n_subjects << ',' << result.k << '\n';
    std::printf("ICC(3,1) %s: %s\n", name,
                icc ? std::to_string(*icc).c_str() : "degenerate (no variance)");
  };
  row("learning_rate", result.icc_a);
  row("inverse_temperature", result.icc_tau);
  if (!out) throw RunError("write failed for '" + path + "'");
  std::printf("wrote %s\n", path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-arm bandit experiment harness: simulate, fit, report"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment plan");
  std::string plan_path, run_out;
  bool force = false;
  int max_requests = -1;
  std::uint64_t run_seed_override = 0;
  run_cmd->add_option("--plan", plan_path, "JSON plan file")->required();
  run_cmd->add_option("--out", run_out, "Output directory")->required();
  run_cmd->add_flag("--force", force, "Overwrite a completed output directory");
  run_cmd->add_option("--max-requests", max_requests,
                      "Upper bound on live LLM completions (plan rejected if it needs more)");
  run_cmd->add_option("--seed", run_seed_override, "Override the plan's master seed");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit the hierarchical model to run logs");
  std::vector<std::string> fit_logs;
  std::string fit_out, fit_structure;
  SamplerFlags fit_sampler;
  fit_cmd->add_option("--logs", fit_logs, "Run-log CSV files")->required()->expected(-1);
  fit_cmd->add_option("--out", fit_out, "Output directory")->required();
  fit_cmd->add_option("--structure", fit_structure,
                      "Fit only this reward structure (default: each one found)");
  fit_sampler.attach(fit_cmd);

  // report
  auto* report_cmd = app.add_subcommand("report", "Consolidate summaries into report tables");
  std::vector<std::string> report_summaries, report_fits, report_reliability;
  std::string report_out;
  report_cmd->add_option("--summaries", report_summaries, "Condition summary CSVs")->expected(-1);
  report_cmd->add_option("--fits", report_fits, "Fit summary CSVs")->expected(-1);
  report_cmd->add_option("--reliability", report_reliability, "Reliability CSVs")->expected(-1);
  report_cmd->add_option("--out", report_out, "Output directory")->required();

  // recover
  auto* recover_cmd = app.add_subcommand("recover", "Simulate a cohort, fit it, score recovery");
  double rec_a = 0.2, rec_tau = 3.0, rec_sigma_a = 0.1, rec_sigma_tau = 0.1;
  double rec_tol_a = 0.05, rec_tol_tau = 0.5;
  int rec_runs = 200, rec_trials = 100;
  bool rec_x_primed = false;
  std::string rec_structure = "asymmetric", rec_out;
  std::uint64_t rec_seed = 20240901;
  SamplerFlags rec_sampler;
  recover_cmd->add_option("--a", rec_a, "True natural-scale group learning rate");
  recover_cmd->add_option("--tau", rec_tau, "True natural-scale group inverse temperature");
  recover_cmd->add_option("--sigma-a", rec_sigma_a, "Group scale for the learning-rate latent");
  recover_cmd->add_option("--sigma-tau", rec_sigma_tau, "Group scale for the temperature latent");
  recover_cmd->add_option("--runs", rec_runs, "Cohort size");
  recover_cmd->add_option("--trials", rec_trials, "Trials per run");
  recover_cmd->add_option("--structure", rec_structure, "Reward structure preset");
  recover_cmd->add_flag("--x-primed", rec_x_primed, "Force X on each run's first trial");
  recover_cmd->add_option("--sim-seed", rec_seed, "Cohort simulation seed");
  recover_cmd->add_option("--tol-a", rec_tol_a, "Pass tolerance for A");
  recover_cmd->add_option("--tol-tau", rec_tol_tau, "Pass tolerance for tau");
  recover_cmd->add_option("--out", rec_out, "Output directory")->required();
  rec_sampler.attach(recover_cmd);

  // reliability
  auto* rel_cmd = app.add_subcommand("reliability", "Split-half test-retest ICC(3,1)");
  std::vector<std::string> rel_logs;
  std::string rel_structure, rel_out;
  SamplerFlags rel_sampler;
  rel_cmd->add_option("--logs", rel_logs, "Run-log CSV files")->required()->expected(-1);
  rel_cmd->add_option("--structure", rel_structure, "Reward structure to fit")->required();
  rel_cmd->add_option("--out", rel_out, "Output directory")->required();
  rel_sampler.attach(rel_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return cmd_run(plan_path, run_out, force, max_requests, run_seed_override,
                     run_cmd->count("--seed") > 0);
    }
    if (fit_cmd->parsed()) {
      return cmd_fit(fit_logs, fit_out, fit_structure, fit_sampler.resolve(fit_cmd));
    }
    if (report_cmd->parsed()) {
      return cmd_report(report_summaries, report_fits, report_reliability, report_out);
    }
    if (recover_cmd->parsed()) {
      return cmd_recover(rec_a, rec_tau, rec_sigma_a, rec_sigma_tau, rec_runs, rec_trials,
                         rec_structure, rec_x_primed, rec_seed, rec_tol_a, rec_tol_tau, rec_out,
                         rec_sampler.resolve(recover_cmd));
    }
    if (rel_cmd->parsed()) {
      return cmd_reliability(rel_logs, rel_structure, rel_out, rel_sampler.resolve(rel_cmd));
    }
  } catch (const FitQualityError& e) {
    std::fprintf(stderr, "fit-quality error: %s\n", e.what());
    return kExitFitQuality;
  } catch (const PlanError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const CsvError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
