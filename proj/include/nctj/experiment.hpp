#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "nctj/config.hpp"
#include "nctj/metrics.hpp"

namespace nctj::harness {

struct ExperimentSummary {
  std::string status = "complete";  // "complete" | "incomplete"
  std::string failed_stage;
  std::string error;
  double acc_before = 0.0;
  std::optional<double> asr_before;
  std::optional<double> acc_after;
  std::optional<double> asr_after;
  std::optional<int> tpt_start_epoch;
  nc::NCMetricsReport final_nc;
  std::string kernels_selected;
  std::map<std::string, std::string> files;  // role -> path relative to out_dir

  nlohmann::json to_json() const;
};

nlohmann::json nc_report_to_json(const nc::NCMetricsReport& r);

// Full pipeline: build data -> (poison) -> train [adaptive] -> evaluate ->
// (cleanse) -> re-evaluate -> emit timeline.csv, summary.json,
// config.resolved.json, checkpoints, ledger, SVG plots. Output lands in
// cfg.out_dir. Any stage failure writes an "incomplete" summary naming the
// stage and rethrows.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

}  // namespace nctj::harness
