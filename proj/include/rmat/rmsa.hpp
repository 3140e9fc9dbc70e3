#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rmat/autodiff.hpp"

namespace rmat::rmsa {

enum class Variant { vanilla, mat_baseline, rmat, relative_shaw, relative_attentive_bias, relative_improved };
enum class DistanceKernel { softmax, exp_neg };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);
std::string_view to_string(DistanceKernel k);
DistanceKernel distance_kernel_from_string(std::string_view s);

// True for the variants that consume the relation tensor.
bool is_relative(Variant v);

struct AttentionConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t relation_dim = 45;
  std::size_t relation_hidden = 32;
  Variant variant = Variant::rmat;
  double lambda_a = 1.0 / 3, lambda_d = 1.0 / 3, lambda_g = 1.0 / 3;
  DistanceKernel distance_g = DistanceKernel::softmax;

  std::size_t d_k() const { return d_model / n_heads; }
  void check() const;
};

// Relation MLP: a hidden layer shared by all heads, then an output layer
// whose columns are grouped head-major (head h owns columns h*d_k..).
struct RelationProjector {
  ad::Tensor w1, b1;  // (relation_dim, hidden), (hidden)
  ad::Tensor w2, b2;  // (hidden, n_heads * d_k), (n_heads * d_k)
};

struct AttentionParams {
  ad::Tensor wq, wk, wv;  // (d, d), no bias
  ad::Tensor wo, bo;      // output projection
  ad::Tensor u, v;        // (n_heads, d_k); defined for rmat and attentive_bias
  RelationProjector phi_k, phi_v;  // defined for the relative variants
};

// Creates the parameters a variant needs under `prefix` (e.g. "layers.0.attn").
AttentionParams make_attention_params(ad::ParameterStore& store, const std::string& prefix,
                                      const AttentionConfig& cfg, Rng& rng);

// A padded batch as seen by one attention layer. Molecules occupy the first
// lengths[b] positions of their row; the rest is padding.
struct AttentionInput {
  ad::Tensor x;           // (B, N, d)
  ad::Tensor relation;    // (B, N, N, R), relative variants only
  // Optional deduplicated form of `relation`: unique rows (U, R) plus the
  // row index of every (b, i, j) pair. Projects U rows instead of B*N*N.
  ad::Tensor relation_rows;
  const std::vector<std::size_t>* relation_index = nullptr;
  ad::Tensor score_mask;  // (B, 1, 1, N): 0 for real keys, -inf for padding; optional
  const std::vector<double>* adjacency = nullptr;  // B*N*N, mat_baseline only
  const std::vector<double>* distances = nullptr;  // B*N*N, mat_baseline only
  std::vector<std::size_t> lengths;                // needed by mat_baseline
};

struct AttentionTrace {
  ad::Tensor weights;  // (B, H, N, N)
};

// (B, H, N, N, d_k) relation embeddings for one role.
ad::Tensor project_relation(const RelationProjector& phi, const ad::Tensor& relation, const AttentionConfig& cfg);
// (U, H*d_k) projections of relation rows (U, R).
ad::Tensor relation_table(const RelationProjector& phi, const ad::Tensor& rows, const AttentionConfig& cfg);

struct UniqueRows {
  ad::Tensor rows;                 // (U, R)
  std::vector<std::size_t> index;  // one entry per input row
};
// Bitwise-unique rows of a (..., R) tensor, in first-occurrence order.
UniqueRows unique_relation_rows(const ad::Tensor& relation);

// Unnormalized scores e_ij (before the 1/sqrt(d_k) scaling), (B, H, N, N).
ad::Tensor relative_scores(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& bk,
                           const AttentionParams& p, Variant variant);
// Same scores from a relation table and per-pair row index, without
// materializing the (B, H, N, N, d_k) tensor.
ad::Tensor relative_scores(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& table,
                           const std::vector<std::size_t>& index, const AttentionParams& p, Variant variant);

// Each returns (B, N, d). With project = false the concatenated heads are
// returned before the output projection.
ad::Tensor vanilla_attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                             AttentionTrace* trace = nullptr, bool project = true);
ad::Tensor mat_attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                         AttentionTrace* trace = nullptr, bool project = true);
ad::Tensor rmsa_forward(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                        AttentionTrace* trace = nullptr, bool project = true);

// Dispatch on cfg.variant.
ad::Tensor attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                     AttentionTrace* trace = nullptr);

// (B, N, N) -> row weights g(D), zero in padded columns; constant tensor.
ad::Tensor distance_weights(const std::vector<double>& distances, const std::vector<std::size_t>& lengths,
                            std::size_t n, DistanceKernel kernel);

}  // namespace rmat::rmsa
