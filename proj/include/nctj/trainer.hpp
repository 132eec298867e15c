#pragma once

#include <optional>
#include <vector>

#include "nctj/data.hpp"
#include "nctj/etf.hpp"
#include "nctj/metrics.hpp"
#include "nctj/model.hpp"
#include "nctj/rng.hpp"
#include "nctj/trojan.hpp"

namespace nctj::train {

struct LrSchedule {
  enum class Kind { Constant, Step };
  Kind kind = Kind::Step;
  std::vector<double> milestones = {0.6, 0.8};  // fractions of total epochs
  double gamma = 0.1;

  float lr_at(float base_lr, int epoch, int total_epochs) const;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  float lr = 0.05f;
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  LrSchedule schedule;
  int metric_every = 10;
  bool stop_at_zero_train_error = false;
  nc::Nc1Mode nc1_mode = nc::Nc1Mode::LiteralTranspose;
};

struct TimelineRow {
  int epoch = 0;
  double train_error = 0.0;
  double test_acc = 0.0;
  std::optional<double> asr;
  nc::NCMetricsReport nc;
};

struct MetricTimeline {
  std::vector<TimelineRow> rows;
  std::optional<int> tpt_start_epoch;  // first epoch with zero train error
};

struct TrainResult {
  Model model;
  MetricTimeline timeline;
};

// Mini-batch SGD with a per-epoch seeded reshuffle. Rows are recorded every
// metric_every epochs, at the final epoch, and at the first zero-train-error
// epoch (which also sets tpt_start_epoch). Divergence raises TrainingError
// carrying the last epoch that finished cleanly.
TrainResult train(Model model, const data::Dataset& train_data, const data::Dataset& test_data,
                  const data::Dataset* asr_set, const TrainConfig& cfg, RngStream& shuffle_rng);

// Alg. "replace, freeze, fine-tune": installs a fresh random simplex ETF head
// and fine-tunes the remaining parameters on the clean subset. When a ledger
// is given, any overlap between subset origin ids and poisoned origin ids is
// a ContaminationError. The input model is copied, never mutated.
Model cleanse_etf_ft(const Model& model, const data::Dataset& clean_subset,
                     const TrainConfig& cfg, RngStream& etf_rng, RngStream& shuffle_rng,
                     const trojan::PoisonLedger* ledger = nullptr);

// Baseline: fine-tune everything on the subset, no surgery. epochs=0 or lr=0
// return an unchanged copy.
Model finetune_vanilla(const Model& model, const data::Dataset& clean_subset,
                       const TrainConfig& cfg, RngStream& shuffle_rng);

// Adaptive attack: the head is fixed to a random ETF from epoch 0, then the
// model trains on the (poisoned) data as usual.
TrainResult train_adaptive(Model model, const data::Dataset& train_data,
                           const data::Dataset& test_data, const data::Dataset* asr_set,
                           const TrainConfig& cfg, RngStream& etf_rng, RngStream& shuffle_rng);

struct EvalResult {
  double acc = 0.0;
  std::optional<double> asr;
};
EvalResult evaluate(const Model& model, const data::Dataset& test, const data::Dataset* asr_set);

double accuracy(const Model& model, const data::Dataset& ds);
double error_rate(const Model& model, const data::Dataset& ds);

}  // namespace nctj::train
