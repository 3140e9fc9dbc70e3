#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rmat/autodiff.hpp"
#include "rmat/model.hpp"
#include "rmat/molio.hpp"

namespace rmat::pretrain {

enum class Stage { masking, contextual, descriptors };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

// Canonical neighbourhood string of atom i, e.g. "C_N-DOUBLE1_O-SINGLE1".
std::string context_label(const molio::Molecule& mol, std::size_t i);

class ContextVocab {
 public:
  static constexpr std::string_view kUnk = "<UNK>";

  // Labels of every real atom; index 0 is UNK, then sorted unique labels.
  static ContextVocab build(const std::vector<molio::Molecule>& corpus);
  static ContextVocab from_labels(std::vector<std::string> labels);

  std::size_t index(const std::string& label) const;  // 0 when unknown
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  // One label per line, index = line number.
  std::string serialize() const;
  static ContextVocab parse(std::string_view text);

 private:
  std::vector<std::string> labels_;
};

struct MaskPlan {
  std::vector<std::size_t> centers;
  std::vector<bool> masked;          // per atom, centers plus their neighbours
  std::vector<std::string> targets;  // context label per center
  std::vector<std::size_t> elements; // element class per center
};

// ceil(rate * n_real) centers drawn without replacement from the real atoms.
MaskPlan make_mask_plan(const molio::Molecule& mol, double rate, Rng& rng);

// Mean cross-entropy over centers. Rows of `center_logits` follow `targets`.
ad::Tensor contextual_loss(const ad::Tensor& center_logits, const std::vector<std::string>& targets,
                           const ContextVocab& vocab);
ad::Tensor masking_loss(const ad::Tensor& center_logits, const std::vector<std::size_t>& elements);
// MSE over all entries; `targets` is row-major (B, K), already standardized.
ad::Tensor descriptor_loss(const ad::Tensor& pred, const std::vector<double>& targets);

// Per-descriptor corpus mean/std; zero-variance descriptors are inactive.
struct DescriptorStats {
  std::vector<std::string> names;
  std::vector<double> mean, std;
  std::vector<bool> active;

  static DescriptorStats compute(const std::vector<molio::Molecule>& corpus);
  std::size_t active_count() const;
  std::vector<double> standardize(const std::vector<double>& raw) const;  // active dims only
  std::string serialize() const;
  static DescriptorStats parse(std::string_view text);
};

struct PretrainConfig {
  std::vector<Stage> stages{Stage::contextual};
  double mask_rate = 0.15;
  std::size_t epochs = 20;
  double lr = 1e-3;  // schedule peak
  std::size_t warmup_steps = 100;
  std::size_t batch_size = 32;
  double validation_fraction = 0.05;
  std::uint64_t seed = 0;

  void check() const;
};

struct StageLog {
  Stage stage = Stage::contextual;
  std::vector<double> step_losses;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_valid_loss;
  std::string checkpoint_path;  // empty when nothing was written
};

struct PretrainResult {
  std::unique_ptr<model::Model> model;
  ContextVocab vocab;
  DescriptorStats stats;
  std::vector<StageLog> stages;
};

// Runs the stages in order on one shared encoder. Optimizer state resets at
// each stage. When out_dir is non-empty, writes a checkpoint per stage plus
// the vocab and descriptor stats files.
PretrainResult pretrain_run(const std::vector<molio::Molecule>& corpus, const model::ModelConfig& mcfg,
                            const PretrainConfig& cfg, const std::string& out_dir = {},
                            const std::string& config_echo = {});

}  // namespace rmat::pretrain
