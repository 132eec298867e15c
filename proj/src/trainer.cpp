#include "nctj/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nctj::train {

namespace {

void check_data_shape(const Model& model, const data::Dataset& ds, const char* what) {
  if (ds.channels != model.input_shape[0] || ds.height != model.input_shape[1] ||
      ds.width != model.input_shape[2]) {
    throw DimensionError(std::string(what) + ": dataset shape does not match model input");
  }
  if (ds.num_classes != model.num_classes) {
    throw DimensionError(std::string(what) + ": dataset classes (" +
                         std::to_string(ds.num_classes) + ") != model classes (" +
                         std::to_string(model.num_classes) + ")");
  }
}

// One optimizer pass over the data in shuffled mini-batches.
void run_epoch(Model& model, const data::Dataset& ds, std::vector<size_t>& order,
               num::SgdOptimizer& opt, int batch_size, RngStream& shuffle_rng) {
  shuffle_rng.shuffle(order);
  std::vector<size_t> batch;
  std::vector<int> labels;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
    batch.assign(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
    labels.clear();
    for (size_t i : batch) labels.push_back(ds.images[i].label);
    model.params.zero_grad();
    num::Tape tape;
    auto logits = model.logits_on_tape(tape, batch_pixels(ds, batch));
    auto loss = tape.softmax_cross_entropy(logits, labels);
    tape.backward(loss);
    opt.step(model.params);
  }
}

// Plain fine-tuning loop, no instrumentation.
void sgd_finetune(Model& model, const data::Dataset& ds, const TrainConfig& cfg,
                  RngStream& shuffle_rng) {
  if (cfg.epochs == 0 || cfg.lr == 0.0f) return;
  if (cfg.epochs < 0) throw ArgumentError("fine-tune: epochs must be >= 0");
  if (cfg.batch_size < 1) throw ArgumentError("fine-tune: batch_size must be >= 1");
  if (ds.images.empty()) throw ArgumentError("fine-tune: empty dataset");
  check_data_shape(model, ds, "fine-tune");
  num::SgdOptimizer opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  std::vector<size_t> order(ds.size());
  std::iota(order.begin(), order.end(), size_t{0});
  int last_good = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(cfg.schedule.lr_at(cfg.lr, epoch, cfg.epochs));
    try {
      run_epoch(model, ds, order, opt, cfg.batch_size, shuffle_rng);
    } catch (const NonFiniteError& e) {
      throw TrainingError(std::string("fine-tuning diverged in epoch ") + std::to_string(epoch) +
                          ": " + e.what(), last_good);
    }
    last_good = epoch;
  }
}

}  // namespace

float LrSchedule::lr_at(float base_lr, int epoch, int total_epochs) const {
  if (kind == Kind::Constant) return base_lr;
  double lr = base_lr;
  for (double frac : milestones) {
    int milestone = static_cast<int>(std::lround(frac * total_epochs));
    if (epoch > milestone) lr *= gamma;
  }
  return static_cast<float>(lr);
}

double accuracy(const Model& model, const data::Dataset& ds) {
  if (ds.images.empty()) throw ArgumentError("accuracy: empty dataset");
  std::vector<int> pred = predict_labels(model, ds);
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ds.images[i].label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double error_rate(const Model& model, const data::Dataset& ds) {
  std::vector<int> pred = predict_labels(model, ds);
  size_t misses = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != ds.images[i].label) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(pred.size());
}

TrainResult train(Model model, const data::Dataset& train_data, const data::Dataset& test_data,
                  const data::Dataset* asr_set, const TrainConfig& cfg, RngStream& shuffle_rng) {
  if (cfg.epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  if (cfg.metric_every < 1) throw ArgumentError("train: metric_every must be >= 1");
  if (train_data.images.empty()) throw ArgumentError("train: empty training set");
  check_data_shape(model, train_data, "train");
  check_data_shape(model, test_data, "train(test)");
  if (asr_set) check_data_shape(model, *asr_set, "train(asr)");

  num::SgdOptimizer opt(cfg.lr, cfg.momentum, cfg.weight_decay);
  MetricTimeline timeline;
  std::vector<size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  int last_good = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(cfg.schedule.lr_at(cfg.lr, epoch, cfg.epochs));
    try {
      run_epoch(model, train_data, order, opt, cfg.batch_size, shuffle_rng);
    } catch (const NonFiniteError& e) {
      throw TrainingError(std::string("training diverged in epoch ") + std::to_string(epoch) +
                          ": " + e.what(), last_good);
    }
    last_good = epoch;

    double train_err = error_rate(model, train_data);
    bool record = (epoch % cfg.metric_every == 0) || epoch == cfg.epochs;
    bool stop = false;
    if (train_err == 0.0) {
      if (!timeline.tpt_start_epoch) {
        timeline.tpt_start_epoch = epoch;
        record = true;
      }
      if (cfg.stop_at_zero_train_error) {
        record = true;
        stop = true;
      }
    }
    if (record) {
      TimelineRow row;
      row.epoch = epoch;
      row.train_error = train_err;
      row.test_acc = accuracy(model, test_data);
      if (asr_set) row.asr = trojan::attack_success_rate(model, *asr_set);
      row.nc = nc::full_report(model, train_data, epoch, cfg.nc1_mode);
      timeline.rows.push_back(std::move(row));
    }
    if (stop) break;
  }
  return TrainResult{std::move(model), std::move(timeline)};
}

Model cleanse_etf_ft(const Model& model, const data::Dataset& clean_subset,
                     const TrainConfig& cfg, RngStream& etf_rng, RngStream& shuffle_rng,
                     const trojan::PoisonLedger* ledger) {
  if (ledger) {
    for (const auto& img : clean_subset.images) {
      if (ledger->contains(img.origin_id)) {
        throw ContaminationError("cleanse_etf_ft: fine-tuning subset contains poisoned sample " +
                                 std::to_string(img.origin_id));
      }
    }
  }
  etf::EtfHead head = etf::construct_etf(model.num_classes, model.feature_dim, etf_rng);
  Model cleansed = etf::install_and_freeze(model, head);
  sgd_finetune(cleansed, clean_subset, cfg, shuffle_rng);
  return cleansed;
}

Model finetune_vanilla(const Model& model, const data::Dataset& clean_subset,
                       const TrainConfig& cfg, RngStream& shuffle_rng) {
  Model tuned = model;
  sgd_finetune(tuned, clean_subset, cfg, shuffle_rng);
  return tuned;
}

TrainResult train_adaptive(Model model, const data::Dataset& train_data,
                           const data::Dataset& test_data, const data::Dataset* asr_set,
                           const TrainConfig& cfg, RngStream& etf_rng, RngStream& shuffle_rng) {
  etf::EtfHead head = etf::construct_etf(model.num_classes, model.feature_dim, etf_rng);
  Model fixed = etf::install_and_freeze(std::move(model), head);
  return train(std::move(fixed), train_data, test_data, asr_set, cfg, shuffle_rng);
}

EvalResult evaluate(const Model& model, const data::Dataset& test, const data::Dataset* asr_set) {
  if (test.images.empty()) throw ArgumentError("evaluate: empty test set");
  EvalResult res;
  res.acc = accuracy(model, test);
  if (asr_set) res.asr = trojan::attack_success_rate(model, *asr_set);
  return res;
}

}  // namespace nctj::train
