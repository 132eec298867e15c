#include "nctj/experiment.hpp"

#include <filesystem>
#include <fstream>

#include "nctj/checkpoint.hpp"
#include "nctj/kernels.hpp"
#include "nctj/report.hpp"

namespace nctj::harness {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path + "'");
}

json seeds_json(const SeedsConfig& s) {
  return {{"data", s.data}, {"init", s.init}, {"poison", s.poison}, {"etf", s.etf},
          {"shuffle", s.shuffle}};
}

train::Model build_model(const ExperimentConfig& cfg, std::array<int, 3> shape, int num_classes) {
  RngStream init_rng(cfg.seeds.init, "init");
  if (cfg.architecture.kind == "mlp") {
    return train::make_mlp(shape, num_classes, cfg.architecture.hidden,
                           cfg.architecture.feature_dim, init_rng);
  }
  return train::make_cnn(shape, num_classes, cfg.architecture.c1, cfg.architecture.c2,
                         cfg.architecture.feature_dim, init_rng);
}

}  // namespace

json nc_report_to_json(const nc::NCMetricsReport& r) {
  return {{"epoch", r.epoch},
          {"nc1", r.nc1},
          {"nc1_literal", r.nc1_literal},
          {"nc1_pinv", r.nc1_pinv},
          {"nc2_norm_M", r.nc2_norm_m},
          {"nc2_norm_W", r.nc2_norm_w},
          {"nc2_angle_M", r.nc2_angle_m},
          {"nc2_angle_W", r.nc2_angle_w},
          {"nc3", r.nc3},
          {"nc4", r.nc4},
          {"w_row_norms", r.w_row_norms},
          {"m_row_norms", r.m_row_norms}};
}

json ExperimentSummary::to_json() const {
  json j;
  j["status"] = status;
  if (status != "complete") {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  j["acc_before"] = acc_before;
  j["asr_before"] = asr_before ? json(*asr_before) : json(nullptr);
  j["acc_after"] = acc_after ? json(*acc_after) : json(nullptr);
  j["asr_after"] = asr_after ? json(*asr_after) : json(nullptr);
  j["tpt_start_epoch"] = tpt_start_epoch ? json(*tpt_start_epoch) : json(nullptr);
  j["final_nc"] = nc_report_to_json(final_nc);
  j["kernels"] = kernels_selected;
  j["files"] = files;
  return j;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::string out = cfg.out_dir;

  ExperimentSummary summary;
  std::string stage = "setup";
  auto fail = [&](const std::exception& e) {
    summary.status = "incomplete";
    summary.failed_stage = stage;
    summary.error = e.what();
    write_text(out + "/summary.json", summary.to_json().dump(2) + "\n");
  };

  try {
    stage = "select_kernels";
    kern::select_kernels(cfg.kernels);
    summary.kernels_selected = kern::active_kernels().name;

    stage = "resolve_config";
    write_text(out + "/config.resolved.json", cfg.to_json().dump(2) + "\n");
    summary.files["config"] = "config.resolved.json";

    stage = "build_data";
    data::Dataset train_clean, test_set;
    if (cfg.dataset.kind == "synthetic") {
      RngStream data_rng(cfg.seeds.data, "data");
      train_clean = data::generate_synthetic(cfg.dataset.num_classes, cfg.dataset.n_per_class,
                                             cfg.dataset.shape, static_cast<float>(cfg.dataset.noise_sigma),
                                             data_rng, "train");
      test_set = data::generate_synthetic(cfg.dataset.num_classes, cfg.dataset.n_test_per_class,
                                          cfg.dataset.shape, static_cast<float>(cfg.dataset.noise_sigma),
                                          data_rng, "test");
      // test samples get their own id range so subset/ledger ids never collide
      for (auto& img : test_set.images) img.origin_id += static_cast<int64_t>(train_clean.size());
    } else if (cfg.dataset.kind == "idx") {
      train_clean = data::load_idx(cfg.dataset.train_images, cfg.dataset.train_labels, "train");
      test_set = data::load_idx(cfg.dataset.test_images, cfg.dataset.test_labels, "test");
    } else {
      train_clean = data::load_cifar_binary(cfg.dataset.train_paths, "train");
      test_set = data::load_cifar_binary(cfg.dataset.test_paths, "test");
    }

    stage = "poison";
    data::Dataset train_set = train_clean;
    std::optional<data::Dataset> asr_set;
    trojan::PoisonLedger ledger;
    if (cfg.poison.enabled) {
      trojan::PoisonPlan plan = cfg.poison.to_plan();
      RngStream poison_rng(cfg.seeds.poison, "poison");
      auto [poisoned, led] = trojan::poison_dataset(train_clean, plan, poison_rng);
      train_set = std::move(poisoned);
      ledger = std::move(led);
      asr_set = trojan::build_asr_eval_set(test_set, plan.trigger, plan.target_class);
      ledger.save(out + "/poison_ledger.json");
      summary.files["poison_ledger"] = "poison_ledger.json";
    }

    stage = "train";
    nc::Nc1Mode mode = nc::nc1_mode_from_string(cfg.nc1_mode);
    train::TrainConfig tcfg = cfg.train.to_train_config(mode);
    train::Model model = build_model(cfg, {train_set.channels, train_set.height, train_set.width},
                                     train_set.num_classes);
    RngStream shuffle_rng(cfg.seeds.shuffle, "shuffle");
    train::TrainResult result;
    std::optional<uint64_t> train_etf_seed;
    std::optional<std::string> train_etf_label;
    if (cfg.adaptive) {
      RngStream etf_rng(cfg.seeds.etf, "etf");
      train_etf_seed = cfg.seeds.etf;
      train_etf_label = "etf";
      result = train::train_adaptive(std::move(model), train_set, test_set,
                                     asr_set ? &*asr_set : nullptr, tcfg, etf_rng, shuffle_rng);
    } else {
      result = train::train(std::move(model), train_set, test_set,
                            asr_set ? &*asr_set : nullptr, tcfg, shuffle_rng);
    }
    summary.tpt_start_epoch = result.timeline.tpt_start_epoch;

    stage = "evaluate";
    train::EvalResult before =
        train::evaluate(result.model, test_set, asr_set ? &*asr_set : nullptr);
    summary.acc_before = before.acc;
    summary.asr_before = before.asr;

    stage = "checkpoint";
    int trained_epochs = result.timeline.rows.empty() ? cfg.train.epochs
                                                      : result.timeline.rows.back().epoch;
    CheckpointMeta meta;
    meta.epoch = trained_epochs;
    meta.seeds_json = seeds_json(cfg.seeds).dump();
    meta.etf_seed = train_etf_seed;
    meta.etf_stream_label = train_etf_label;
    save_checkpoint(result.model, meta, out + "/checkpoint_post_train.nctj");
    summary.files["checkpoint_post_train"] = "checkpoint_post_train.nctj";

    stage = "cleanse";
    std::optional<train::Model> cleansed;
    if (cfg.cleanse.method != "none") {
      // fine-tuning pool: original clean training data minus poisoned ids
      data::Dataset pool;
      pool.num_classes = train_clean.num_classes;
      pool.channels = train_clean.channels;
      pool.height = train_clean.height;
      pool.width = train_clean.width;
      pool.split_tag = "finetune";
      for (const auto& img : train_clean.images) {
        if (!cfg.poison.enabled || !ledger.contains(img.origin_id)) pool.images.push_back(img);
      }
      RngStream subset_rng(cfg.seeds.data, "data/subset");
      data::Dataset subset = data::sample_clean_subset(pool, cfg.cleanse.subset_fraction, subset_rng);
      if (cfg.cleanse.corruption.kind == "imbalance") {
        RngStream corrupt_rng(cfg.seeds.data, "corrupt");
        subset = data::apply_imbalance(subset, cfg.cleanse.corruption.ratio, corrupt_rng);
      } else if (cfg.cleanse.corruption.kind == "erasure") {
        RngStream corrupt_rng(cfg.seeds.data, "corrupt");
        subset = data::apply_random_erasure(subset, cfg.cleanse.corruption.prob,
                                            cfg.cleanse.corruption.min_side,
                                            cfg.cleanse.corruption.max_side, corrupt_rng);
      }
      train::TrainConfig ftcfg = cfg.cleanse.finetune.to_train_config(mode);
      RngStream ft_shuffle(cfg.seeds.shuffle, "shuffle/ft");
      if (cfg.cleanse.method == "etf_ft") {
        RngStream etf_rng(cfg.seeds.etf, "etf/cleanse");
        cleansed = train::cleanse_etf_ft(result.model, subset, ftcfg, etf_rng, ft_shuffle,
                                         cfg.poison.enabled ? &ledger : nullptr);
      } else {
        cleansed = train::finetune_vanilla(result.model, subset, ftcfg, ft_shuffle);
      }

      stage = "reevaluate";
      train::EvalResult after =
          train::evaluate(*cleansed, test_set, asr_set ? &*asr_set : nullptr);
      summary.acc_after = after.acc;
      summary.asr_after = after.asr;

      stage = "checkpoint_post_cleanse";
      CheckpointMeta cmeta;
      cmeta.epoch = cfg.cleanse.finetune.epochs;
      cmeta.seeds_json = seeds_json(cfg.seeds).dump();
      if (cfg.cleanse.method == "etf_ft") {
        cmeta.etf_seed = cfg.seeds.etf;
        cmeta.etf_stream_label = "etf/cleanse";
      }
      save_checkpoint(*cleansed, cmeta, out + "/checkpoint_post_cleanse.nctj");
      summary.files["checkpoint_post_cleanse"] = "checkpoint_post_cleanse.nctj";
    }

    stage = "emit";
    write_timeline_csv(result.timeline, train_set.num_classes, out + "/timeline.csv");
    summary.files["timeline"] = "timeline.csv";
    write_metric_svgs(result.timeline, train_set.num_classes, out + "/plots");
    summary.files["plots"] = "plots";
    if (!result.timeline.rows.empty()) {
      summary.final_nc = result.timeline.rows.back().nc;
    }
    summary.files["summary"] = "summary.json";
    write_text(out + "/summary.json", summary.to_json().dump(2) + "\n");
  } catch (const std::exception& e) {
    fail(e);
    throw;
  }
  return summary;
}

}  // namespace nctj::harness
