#include "nctj/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nctj/checkpoint.hpp"
#include "nctj/etf.hpp"
#include "nctj/experiment.hpp"
#include "nctj/kernels.hpp"
#include "nctj/report.hpp"

namespace nctj::harness {

namespace {

using nlohmann::json;

// Build datasets described by a config-shaped JSON file (dataset / poison /
// seeds sections); used by the metrics and eval subcommands.
struct BuiltData {
  data::Dataset train_as_stored;  // poisoned when a poison block is present
  data::Dataset test;
  std::optional<data::Dataset> asr_set;
};

BuiltData build_from_spec(const std::string& spec_path) {
  ExperimentConfig cfg = ExperimentConfig::load(spec_path);
  BuiltData out;
  data::Dataset train_clean;
  if (cfg.dataset.kind == "synthetic") {
    RngStream data_rng(cfg.seeds.data, "data");
    train_clean = data::generate_synthetic(cfg.dataset.num_classes, cfg.dataset.n_per_class,
                                           cfg.dataset.shape,
                                           static_cast<float>(cfg.dataset.noise_sigma), data_rng,
                                           "train");
    out.test = data::generate_synthetic(cfg.dataset.num_classes, cfg.dataset.n_test_per_class,
                                        cfg.dataset.shape,
                                        static_cast<float>(cfg.dataset.noise_sigma), data_rng,
                                        "test");
    for (auto& img : out.test.images) img.origin_id += static_cast<int64_t>(train_clean.size());
  } else if (cfg.dataset.kind == "idx") {
    train_clean = data::load_idx(cfg.dataset.train_images, cfg.dataset.train_labels, "train");
    out.test = data::load_idx(cfg.dataset.test_images, cfg.dataset.test_labels, "test");
  } else {
    train_clean = data::load_cifar_binary(cfg.dataset.train_paths, "train");
    out.test = data::load_cifar_binary(cfg.dataset.test_paths, "test");
  }
  if (cfg.poison.enabled) {
    trojan::PoisonPlan plan = cfg.poison.to_plan();
    RngStream poison_rng(cfg.seeds.poison, "poison");
    auto [poisoned, ledger] = trojan::poison_dataset(train_clean, plan, poison_rng);
    out.train_as_stored = std::move(poisoned);
    out.asr_set = trojan::build_asr_eval_set(out.test, plan.trigger, plan.target_class);
  } else {
    out.train_as_stored = std::move(train_clean);
  }
  return out;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"neural-collapse trojan cleansing lab"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a full experiment from a JSON config");
  std::string run_config, run_out, run_kernels;
  std::vector<std::string> seed_overrides;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--out", run_out, "output directory (overrides config and NCTJ_OUT)");
  run->add_option("--seed-override", seed_overrides,
                  "override one seed, e.g. data=7 (repeatable)");
  run->add_option("--kernels", run_kernels, "kernel variant: auto|scalar|avx2");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "one-shot NC report for a checkpoint");
  std::string m_checkpoint, m_data, m_mode = "literal_transpose";
  metrics->add_option("--checkpoint", m_checkpoint, "NCTJ checkpoint path")->required();
  metrics->add_option("--data", m_data, "data spec JSON (dataset/poison/seeds sections)")
      ->required();
  metrics->add_option("--nc1-mode", m_mode, "literal_transpose|pseudoinverse");

  // etf
  auto* etfcmd = app.add_subcommand("etf", "construct a simplex ETF and print its deviations");
  int e_k = 0, e_m = 0;
  uint64_t e_seed = 0;
  etfcmd->add_option("--k", e_k, "number of classes")->required();
  etfcmd->add_option("--m", e_m, "feature dimension")->required();
  etfcmd->add_option("--seed", e_seed, "master seed")->required();

  // eval
  auto* evalcmd = app.add_subcommand("eval", "evaluate a checkpoint on clean/triggered data");
  std::string v_checkpoint, v_test;
  bool v_asr = false;
  evalcmd->add_option("--checkpoint", v_checkpoint, "NCTJ checkpoint path")->required();
  evalcmd->add_option("--test", v_test, "data spec JSON")->required();
  evalcmd->add_flag("--asr", v_asr, "also report ASR (spec must have a poison block)");

  // report
  auto* report = app.add_subcommand("report", "re-emit SVG plots from a timeline CSV");
  std::string r_timeline, r_out;
  report->add_option("--timeline", r_timeline, "timeline.csv path")->required();
  report->add_option("--out", r_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << e.what() << "\n\n" << app.help();
    return 1;
  }

  if (run->parsed()) {
    ExperimentConfig cfg = ExperimentConfig::load(run_config);
    for (const auto& ov : seed_overrides) {
      auto pos = ov.find('=');
      if (pos == std::string::npos) {
        throw ArgumentError("--seed-override expects key=value, got '" + ov + "'");
      }
      cfg.apply_seed_override(ov.substr(0, pos),
                              std::strtoull(ov.c_str() + pos + 1, nullptr, 10));
    }
    if (!run_kernels.empty()) cfg.kernels = run_kernels;
    if (const char* env = std::getenv("NCTJ_OUT"); env && *env) cfg.out_dir = env;
    if (!run_out.empty()) cfg.out_dir = run_out;
    cfg.validate();
    ExperimentSummary summary = run_experiment(cfg);
    out << "experiment complete: " << cfg.out_dir << "/summary.json\n";
    out << "  acc_before=" << format_double(summary.acc_before);
    if (summary.asr_before) out << " asr_before=" << format_double(*summary.asr_before);
    if (summary.acc_after) out << " acc_after=" << format_double(*summary.acc_after);
    if (summary.asr_after) out << " asr_after=" << format_double(*summary.asr_after);
    out << '\n';
    return 0;
  }

  if (metrics->parsed()) {
    auto loaded = load_checkpoint(m_checkpoint);
    BuiltData built = build_from_spec(m_data);
    nc::NCMetricsReport rep = nc::full_report(loaded.model, built.train_as_stored,
                                              loaded.meta.epoch, nc::nc1_mode_from_string(m_mode));
    out << nc_report_to_json(rep).dump(2) << '\n';
    return 0;
  }

  if (etfcmd->parsed()) {
    RngStream rng(e_seed, "etf");
    etf::EtfHead head = etf::construct_etf(e_k, e_m, rng);
    out << "etf K=" << e_k << " m=" << e_m << " seed=" << e_seed << '\n';
    out << "max_deviation " << format_double(etf::max_etf_deviation(head)) << '\n';
    return 0;
  }

  if (evalcmd->parsed()) {
    auto loaded = load_checkpoint(v_checkpoint);
    BuiltData built = build_from_spec(v_test);
    if (v_asr && !built.asr_set) {
      throw ArgumentError("--asr requires a poison block in the data spec");
    }
    train::EvalResult res = train::evaluate(loaded.model, built.test,
                                            v_asr ? &*built.asr_set : nullptr);
    out << "acc " << format_double(res.acc) << '\n';
    if (res.asr) out << "asr " << format_double(*res.asr) << '\n';
    return 0;
  }

  if (report->parsed()) {
    int num_classes = 0;
    train::MetricTimeline tl = parse_timeline_csv(r_timeline, &num_classes);
    auto files = write_metric_svgs(tl, num_classes, r_out);
    out << "wrote " << files.size() << " plots to " << r_out << '\n';
    return 0;
  }

  err << app.help();
  return 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace nctj::harness
