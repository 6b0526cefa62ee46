#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditlab/inference.hpp"
#include "banditlab/metrics.hpp"
#include "banditlab/rw_model.hpp"
#include "banditlab/types.hpp"

namespace banditlab {

/// Parse failure; the message names the file and 1-based line.
class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RFC-4180-style quoting: fields containing comma, quote, CR or LF are
/// quoted with embedded quotes doubled.
std::string csv_escape(const std::string& field);

/// Splits one logical CSV line (no embedded newlines) into fields.
std::vector<std::string> csv_split(const std::string& line, const std::string& context);

/// One trial row of the run-log schema:
/// condition_id, agent, reward_structure, temperature, top_p, run_id,
/// trial, choice, reward, raw_token, valid. Decoding columns are empty for
/// synthetic agents.
struct RunLogRecord {
  std::string condition_id;
  std::string agent;
  std::string reward_structure;
  std::optional<double> temperature;
  std::optional<double> top_p;
  int run_id = 0;
  int trial = 0;
  Choice choice = Choice::Invalid;
  int reward = 0;
  std::string raw_token;
};

extern const char* const kRunLogHeader;

std::string run_log_row(const RunLogRecord& record);

void write_run_log_csv(const std::string& path, const std::vector<RunLogRecord>& records);

/// Reads a run-log CSV; rejects wrong headers, malformed rows, gaps or
/// duplicates in (condition_id, run_id, trial).
std::vector<RunLogRecord> read_run_log_csv(const std::string& path);

/// Groups records into RunLogs ordered by (condition_id, run_id).
std::vector<RunLog> runs_from_records(const std::vector<RunLogRecord>& records);

/// Builds the fit input from logs, keeping only runs whose
/// reward_structure matches `structure_label`. Invalid trials are masked.
FitDataset fit_dataset_from_records(const std::vector<RunLogRecord>& records,
                                    const std::string& structure_label);

/// Condition summaries as long-format rows:
/// condition_id, metric, mean, ci_low, ci_high, n. The index metrics
/// (stubbornness, amplification, rigidity, invalid rate) are emitted as
/// rows with the rate in `mean` and empty CI columns.
void write_condition_summary_csv(const std::string& path,
                                 const std::vector<ConditionSummary>& summaries);

/// Per-run metric rows, one per run, wide format.
void write_run_metrics_csv(const std::string& path, const std::vector<RunMetrics>& runs);

/// Posterior draw store: chain, iteration, parameter, value.
void write_draws_csv(const std::string& path, const Chains& chains);

/// Parameter summary table: parameter, mean, sd, ci_low, ci_high, rhat, ess.
void write_summary_csv(const std::string& path, const std::vector<ParameterSummary>& rows);

/// Per-run posterior means: run index, learning rate, inverse temperature.
void write_run_params_csv(const std::string& path, const std::vector<RWParams>& params);

/// Per-run log-likelihood matrix, long format: draw, run, loglik.
void write_loglik_csv(const std::string& path, const LoglikMatrix& matrix);

}  // namespace banditlab
