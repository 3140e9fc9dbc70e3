#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmat/autodiff.hpp"
#include "rmat/featurize.hpp"
#include "rmat/rmsa.hpp"

namespace rmat::model {

enum class Task { regression, binary_classification };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

inline constexpr double kLeakySlope = 0.1;

struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_model = 64;
  std::size_t relation_hidden = 32;
  std::size_t ffn_hidden = 0;  // 0 means 2 * d_model
  std::size_t pool_heads = 4;
  std::size_t pool_hidden = 32;
  std::size_t mlp_hidden = 128;
  double mlp_dropout = 0.1;
  rmsa::Variant variant = rmsa::Variant::rmat;
  double mat_lambda_a = 1.0 / 3, mat_lambda_d = 1.0 / 3, mat_lambda_g = 1.0 / 3;
  rmsa::DistanceKernel mat_distance_g = rmsa::DistanceKernel::softmax;
  featurize::DistanceConfig distance;
  std::size_t extra_feature_dim = 0;
  Task task = Task::regression;
  std::uint64_t seed = 0;

  // The full-size configuration from the original experiments.
  static ModelConfig full_size();

  std::size_t ffn_width() const { return ffn_hidden ? ffn_hidden : 2 * d_model; }
  rmsa::AttentionConfig attention() const;
  void check() const;
};

// Optional pretraining heads; they share the encoder.
struct HeadSpec {
  std::size_t context_vocab = 0;   // contextual head width, 0 = absent
  bool masking = false;            // 12-way element head
  std::size_t descriptor_dim = 0;  // descriptor regression width, 0 = absent
};

// Closed-form parameter count for a config and head set.
std::size_t parameter_count(const ModelConfig& cfg, const HeadSpec& heads = {});

// Zero-padded batch of featurized molecules. Each molecule keeps its dummy
// node as its last real position; padding follows it.
struct Batch {
  std::size_t size = 0;
  std::size_t max_n = 0;
  std::vector<std::size_t> lengths;
  ad::Tensor atoms;       // (B, N, 36)
  ad::Tensor relation;    // (B, N, N, R)
  rmsa::UniqueRows relation_unique;
  ad::Tensor score_mask;  // (B, 1, 1, N)
  ad::Tensor pool_mask;   // (B, 1, N)
  std::vector<double> adjacency;  // B*N*N
  std::vector<double> distances;  // B*N*N
  ad::Tensor extra;       // (B, E) when extra features are used
};

// pad_to = 0 pads to the longest molecule in the batch.
Batch collate(const std::vector<const featurize::FeaturizedMolecule*>& mols, std::size_t pad_to = 0,
              const std::vector<const std::vector<double>*>& extras = {});

struct BlockParams {
  rmsa::AttentionParams attn;
  ad::Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  ad::Tensor ff_w1, ff_b1, ff_w2, ff_b2;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;                       // dropout stream, required when training
  const std::vector<bool>* mask = nullptr;  // B*N flags; flagged rows get the mask token
  bool record_attention = false;
};

struct ForwardResult {
  ad::Tensor hidden;      // (B, N, d) encoder output
  ad::Tensor pooled;      // (B, S*d)
  ad::Tensor prediction;  // (B,) raw output (logit for classification)
  std::vector<ad::Tensor> attention;  // per layer (B, H, N, N) when recorded
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg, const HeadSpec& heads = {});

  const ModelConfig& config() const { return cfg_; }
  const HeadSpec& heads() const { return heads_; }
  ad::ParameterStore& params() { return store_; }
  const ad::ParameterStore& params() const { return store_; }

  ad::Tensor embed_input(const Batch& batch, const std::vector<bool>* mask = nullptr) const;
  ad::Tensor encoder_block(std::size_t layer, const ad::Tensor& x, const Batch& batch,
                           rmsa::AttentionTrace* trace = nullptr) const;
  ad::Tensor attention_pool(const ad::Tensor& h, const Batch& batch) const;
  ad::Tensor predict(const ad::Tensor& g, const Batch& batch, bool training, Rng* rng) const;
  // Embedding plus all encoder blocks, (B, N, d).
  ad::Tensor encode(const Batch& batch, const std::vector<bool>* mask = nullptr,
                    std::vector<ad::Tensor>* attention = nullptr) const;
  ForwardResult forward(const Batch& batch, const ForwardOptions& opt = {}) const;

  // Pretraining heads. `rows` index the flattened (B*N) encoder output.
  ad::Tensor context_logits(const ad::Tensor& hidden, const std::vector<std::size_t>& rows) const;
  ad::Tensor masking_logits(const ad::Tensor& hidden, const std::vector<std::size_t>& rows) const;
  ad::Tensor descriptor_output(const ad::Tensor& pooled) const;

  // Parameters of the shared body (everything but heads.*).
  std::vector<ad::Parameter> body_parameters() const;

 private:
  ModelConfig cfg_;
  HeadSpec heads_;
  ad::ParameterStore store_;
  ad::Tensor embed_w_, embed_b_;
  std::vector<BlockParams> blocks_;
  ad::Tensor pool_w1_, pool_w2_;
  ad::Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
  ad::Tensor mask_token_;
  ad::Tensor ctx_w_, ctx_b_, msk_w_, msk_b_, desc_w_, desc_b_;
};

// Copies tensors by name. With `require_all`, every model parameter must be
// present; otherwise only body parameters are required and heads are
// optional. Shape mismatches always throw.
void load_parameters(Model& model, const ad::Checkpoint& ckpt, bool require_all);
ad::Checkpoint make_checkpoint(const Model& model, const std::string& config_echo, const std::string& meta);

}  // namespace rmat::model
