#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmat/autodiff.hpp"
#include "rmat/featurize.hpp"
#include "rmat/model.hpp"

namespace rmat::train {

// ---- schedule and optimizer ------------------------------------------------

// scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5); step >= 1.
double noam_lr(std::size_t step, std::size_t d_model, std::size_t warmup_steps, double scale);
// Scale that makes the schedule peak (at step == warmup) equal to `peak_lr`.
double noam_scale_for_peak(double peak_lr, std::size_t d_model, std::size_t warmup_steps);

// The seven learning rates searched during fine-tuning.
const std::vector<double>& default_lr_grid();

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

class Adam {
 public:
  Adam(std::vector<ad::Parameter> params, AdamConfig cfg = {});

  // One update with the given learning rate from the current gradients.
  void step(double lr);
  std::size_t steps() const { return t_; }
  void zero_grad();

 private:
  std::vector<ad::Parameter> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// ---- metrics ---------------------------------------------------------------

class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double rmse(const std::vector<double>& pred, const std::vector<double>& y);
double mae(const std::vector<double>& pred, const std::vector<double>& y);
// Rank statistic with average ranks for ties. Needs both classes present.
double roc_auc(const std::vector<double>& scores, const std::vector<double>& labels);

enum class Metric { rmse, mae, auc };
std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);
bool higher_is_better(Metric m);
double compute_metric(Metric m, const std::vector<double>& pred, const std::vector<double>& y);

// z-score with population std, fitted on training labels only.
struct LabelNormalizer {
  double mean = 0;
  double std = 1;

  static LabelNormalizer fit(const std::vector<double>& train_labels);
  double transform(double y) const { return (y - mean) / std; }
  double inverse(double z) const { return z * std + mean; }
  std::vector<double> transform(const std::vector<double>& y) const;
  std::vector<double> inverse(const std::vector<double>& z) const;
};

// ---- splits ----------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, valid, test;
};

// Seeded shuffle then partition. Sizes are floor(ratio * n) for valid and
// test, the remainder goes to train.
Split random_split(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

// ---- fine-tuning -----------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double warmup_fraction = 0.3;
  std::vector<double> lr_grid = default_lr_grid();
  std::uint64_t seed = 0;
  bool normalize_labels = true;
  std::size_t n_splits = 1;
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::size_t max_steps = 0;  // 0 = no cap
  std::optional<Metric> metric;  // default: rmse for regression, auc for classification
  std::string target_column;     // default: first label column
  bool parallel_grid = false;
  bool track_train_metric = false;
  double rmse_threshold = 0.05;  // on normalized labels, for steps-to-threshold
  std::size_t eval_every = 1;    // epochs between evaluations
  bool stop_at_threshold = false;  // end a run once steps_to_threshold is set

  void check() const;
};

struct FinetuneData {
  std::vector<featurize::FeaturizedMolecule> mols;
  std::vector<double> labels;
  std::vector<std::vector<double>> extra;  // empty or one row per molecule
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0;  // mean minibatch loss over the epoch
  std::optional<double> train_metric;
  std::optional<double> train_rmse_normalized;
  double valid_metric = 0;
};

struct LrRun {
  double lr = 0;
  bool ok = true;
  std::string diagnostic;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  std::size_t best_epoch = 0;
  double best_valid = 0;
  double test_metric = 0;
  std::optional<std::size_t> steps_to_threshold;
  std::vector<std::vector<double>> best_params;  // snapshot at the best epoch
};

struct SplitResult {
  std::size_t split = 0;
  std::vector<LrRun> runs;  // in lr_grid order
  std::size_t selected = 0;
  double test_metric = 0;
};

struct FinetuneResult {
  Metric metric = Metric::rmse;
  std::vector<SplitResult> splits;
  double test_mean = 0;
  double test_std = 0;
  LabelNormalizer normalizer;  // of the first split
  ad::Checkpoint checkpoint;   // selected run of the first split
};

// Trains one model per (split, lr). Model init and data order depend only on
// (seed, split), so the selected lr does not depend on grid order. When
// `splits` is given it overrides the random splits.
FinetuneResult finetune(const FinetuneData& data, const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                        const ad::Checkpoint* init = nullptr, const std::vector<Split>* splits = nullptr,
                        const std::string& config_echo = {});

// Predictions in label space (denormalized; probabilities for classification).
std::vector<double> predict_all(const model::Model& model, const FinetuneData& data,
                                const std::vector<std::size_t>& idx, const LabelNormalizer& norm,
                                std::size_t batch_size = 64);

std::string result_json(const FinetuneResult& r, const std::string& config_echo);
std::string summary_csv(const FinetuneResult& r);

}  // namespace rmat::train
