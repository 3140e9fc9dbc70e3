#include "rmat/rmsa.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "rmat/kernels.hpp"

namespace rmat::rmsa {

using ad::Tensor;

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return ad::add(ad::matmul(x, w), b); }

// (B, N, H*dk) -> (B, H, N, dk)
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.dim(0), n = x.dim(1), dk = x.dim(2) / heads;
  return ad::permute(ad::reshape(x, {b, n, heads, dk}), {0, 2, 1, 3});
}

// (B, H, N, dk) -> (B, N, H*dk)
Tensor merge_heads(const Tensor& x) {
  const std::size_t b = x.dim(0), h = x.dim(1), n = x.dim(2), dk = x.dim(3);
  return ad::reshape(ad::permute(x, {0, 2, 1, 3}), {b, n, h * dk});
}

struct Heads {
  Tensor q, k, v;  // (B, H, N, dk)
};

Heads project_heads(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg) {
  if (in.x.rank() != 3 || in.x.dim(2) != cfg.d_model)
    throw std::invalid_argument("attention: expected (B, N, " + std::to_string(cfg.d_model) + ") input, got " +
                                ad::shape_str(in.x.shape()));
  return {split_heads(ad::matmul(in.x, p.wq), cfg.n_heads), split_heads(ad::matmul(in.x, p.wk), cfg.n_heads),
          split_heads(ad::matmul(in.x, p.wv), cfg.n_heads)};
}

Tensor scaled_masked(const Tensor& e, const AttentionInput& in, const AttentionConfig& cfg) {
  Tensor s = ad::mul_scalar(e, 1.0 / std::sqrt(static_cast<double>(cfg.d_k())));
  return in.score_mask.defined() ? ad::add(s, in.score_mask) : s;
}

Tensor finish(const Tensor& heads_out, const AttentionParams& p, bool project) {
  Tensor merged = merge_heads(heads_out);
  return project ? linear(merged, p.wo, p.bo) : merged;
}

RelationProjector make_projector(ad::ParameterStore& store, const std::string& prefix, const AttentionConfig& cfg,
                                 Rng& rng) {
  RelationProjector phi;
  phi.w1 = store.xavier(prefix + ".w1", cfg.relation_dim, cfg.relation_hidden, rng);
  phi.b1 = store.zeros(prefix + ".b1", {cfg.relation_hidden});
  // One (hidden -> d_k) output layer per head, stored side by side.
  phi.w2 = store.zeros(prefix + ".w2", {cfg.relation_hidden, cfg.n_heads * cfg.d_k()});
  const double bound = std::sqrt(6.0 / static_cast<double>(cfg.relation_hidden + cfg.d_k()));
  for (double& w : phi.w2.mutable_values()) w = rng.uniform(-bound, bound);
  phi.b2 = store.zeros(prefix + ".b2", {cfg.n_heads * cfg.d_k()});
  return phi;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::mat_baseline: return "mat_baseline";
    case Variant::rmat: return "rmat";
    case Variant::relative_shaw: return "relative_shaw";
    case Variant::relative_attentive_bias: return "relative_attentive_bias";
    case Variant::relative_improved: return "relative_improved";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  for (Variant v : {Variant::vanilla, Variant::mat_baseline, Variant::rmat, Variant::relative_shaw,
                    Variant::relative_attentive_bias, Variant::relative_improved})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown attention variant '" + std::string(s) + "'");
}

std::string_view to_string(DistanceKernel k) { return k == DistanceKernel::softmax ? "softmax" : "exp_neg"; }

DistanceKernel distance_kernel_from_string(std::string_view s) {
  if (s == "softmax") return DistanceKernel::softmax;
  if (s == "exp_neg") return DistanceKernel::exp_neg;
  throw std::invalid_argument("unknown distance kernel '" + std::string(s) + "'");
}

bool is_relative(Variant v) { return v != Variant::vanilla && v != Variant::mat_baseline; }

void AttentionConfig::check() const {
  if (d_model == 0 || n_heads == 0 || relation_dim == 0 || relation_hidden == 0)
    throw std::invalid_argument("attention dims must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                std::to_string(n_heads));
  if (!std::isfinite(lambda_a) || !std::isfinite(lambda_d) || !std::isfinite(lambda_g))
    throw std::invalid_argument("mat lambdas must be finite");
}

AttentionParams make_attention_params(ad::ParameterStore& store, const std::string& prefix,
                                      const AttentionConfig& cfg, Rng& rng) {
  cfg.check();
  const std::size_t d = cfg.d_model;
  AttentionParams p;
  p.wq = store.xavier(prefix + ".wq", d, d, rng);
  p.wk = store.xavier(prefix + ".wk", d, d, rng);
  p.wv = store.xavier(prefix + ".wv", d, d, rng);
  p.wo = store.xavier(prefix + ".wo", d, d, rng);
  p.bo = store.zeros(prefix + ".bo", {d});
  if (is_relative(cfg.variant)) {
    p.phi_k = make_projector(store, prefix + ".phi_k", cfg, rng);
    p.phi_v = make_projector(store, prefix + ".phi_v", cfg, rng);
  }
  if (cfg.variant == Variant::rmat || cfg.variant == Variant::relative_attentive_bias) {
    p.u = store.zeros(prefix + ".u", {cfg.n_heads, cfg.d_k()});
    p.v = store.zeros(prefix + ".v", {cfg.n_heads, cfg.d_k()});
  }
  return p;
}

Tensor project_relation(const RelationProjector& phi, const Tensor& relation, const AttentionConfig& cfg) {
  if (relation.rank() != 4 || relation.dim(3) != cfg.relation_dim)
    throw std::invalid_argument("relation tensor must be (B, N, N, " + std::to_string(cfg.relation_dim) +
                                "), got " + ad::shape_str(relation.shape()));
  const std::size_t b = relation.dim(0), n = relation.dim(1);
  Tensor hidden = ad::leaky_relu(linear(relation, phi.w1, phi.b1), 0.1);
  Tensor out = linear(hidden, phi.w2, phi.b2);
  return ad::permute(ad::reshape(out, {b, n, n, cfg.n_heads, cfg.d_k()}), {0, 3, 1, 2, 4});
}

namespace {

struct Terms {
  bool key = false, bias = false;
};

Terms relative_terms(Variant variant, const char* op) {
  switch (variant) {
    case Variant::rmat: return {true, true};
    case Variant::relative_shaw: return {false, false};
    case Variant::relative_attentive_bias: return {false, true};
    case Variant::relative_improved: return {true, false};
    default:
      throw std::invalid_argument(std::string(op) + ": variant '" + std::string(to_string(variant)) +
                                  "' has no relative terms");
  }
}

}  // namespace

Tensor relation_table(const RelationProjector& phi, const Tensor& rows, const AttentionConfig& cfg) {
  if (rows.rank() != 2 || rows.dim(1) != cfg.relation_dim)
    throw std::invalid_argument("relation rows must be (U, " + std::to_string(cfg.relation_dim) + "), got " +
                                ad::shape_str(rows.shape()));
  return linear(ad::leaky_relu(linear(rows, phi.w1, phi.b1), 0.1), phi.w2, phi.b2);
}

UniqueRows unique_relation_rows(const Tensor& relation) {
  if (relation.rank() == 0) throw std::invalid_argument("unique_relation_rows: scalar input");
  const std::size_t r = relation.shape().back();
  const std::size_t count = r ? relation.numel() / r : 0;
  const double* src = relation.values().data();
  UniqueRows u;
  u.index.resize(count);
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<double> rows;
  for (std::size_t i = 0; i < count; ++i) {
    std::string key(reinterpret_cast<const char*>(src + i * r), r * sizeof(double));
    auto [it, fresh] = seen.emplace(std::move(key), seen.size());
    if (fresh) rows.insert(rows.end(), src + i * r, src + (i + 1) * r);
    u.index[i] = it->second;
  }
  u.rows = Tensor::from({seen.size(), r}, std::move(rows));
  return u;
}

Tensor relative_scores(const Tensor& q, const Tensor& k, const Tensor& bk, const AttentionParams& p,
                       Variant variant) {
  const std::size_t b = q.dim(0), h = q.dim(1), n = q.dim(2), dk = q.dim(3);
  const Terms t = relative_terms(variant, "relative_scores");
  const bool term3 = t.key, term45 = t.bias;
  Tensor e = ad::matmul(q, ad::transpose(k));
  // Terms that contract bK_ij: q_i, optionally k_j and v, summed first.
  Tensor mult = ad::reshape(q, {b, h, n, 1, dk});
  if (term3) mult = ad::add(mult, ad::reshape(k, {b, h, 1, n, dk}));
  if (term45) mult = ad::add(mult, ad::reshape(p.v, {1, h, 1, 1, dk}));
  e = ad::add(e, ad::sum(ad::mul(bk, mult), -1));
  if (term45) {
    Tensor uk = ad::sum(ad::mul(k, ad::reshape(p.u, {1, h, 1, dk})), -1);  // (B, H, N)
    e = ad::add(e, ad::reshape(uk, {b, h, 1, n}));
  }
  return e;
}

Tensor relative_scores(const Tensor& q, const Tensor& k, const Tensor& table, const std::vector<std::size_t>& index,
                       const AttentionParams& p, Variant variant) {
  const Terms t = relative_terms(variant, "relative_scores");
  const std::size_t b = q.dim(0), h = q.dim(1), n = q.dim(2), dk = q.dim(3);
  Tensor e = ad::matmul(q, ad::transpose(k));
  Tensor row = t.bias ? ad::add(q, ad::reshape(p.v, {1, h, 1, dk})) : q;
  e = ad::add(e, ad::pair_dot(row, table, index, false));
  if (t.key) e = ad::add(e, ad::pair_dot(k, table, index, true));
  if (t.bias) {
    Tensor uk = ad::sum(ad::mul(k, ad::reshape(p.u, {1, h, 1, dk})), -1);  // (B, H, N)
    e = ad::add(e, ad::reshape(uk, {b, h, 1, n}));
  }
  return e;
}

Tensor vanilla_attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                         AttentionTrace* trace, bool project) {
  Heads hd = project_heads(in, p, cfg);
  Tensor a = ad::softmax(scaled_masked(ad::matmul(hd.q, ad::transpose(hd.k)), in, cfg));
  if (trace) trace->weights = a;
  return finish(ad::attend(a, hd.v), p, project);
}

Tensor distance_weights(const std::vector<double>& distances, const std::vector<std::size_t>& lengths,
                        std::size_t n, DistanceKernel kernel) {
  const std::size_t batch = lengths.size();
  if (distances.size() != batch * n * n) throw std::invalid_argument("distance_weights: size mismatch");
  std::vector<double> w(batch * n * n, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t len = lengths[b];
    for (std::size_t i = 0; i < len; ++i) {
      const double* d = distances.data() + (b * n + i) * n;
      double* out = w.data() + (b * n + i) * n;
      if (kernel == DistanceKernel::exp_neg) {
        for (std::size_t j = 0; j < len; ++j) out[j] = std::exp(-d[j]);
      } else {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, -d[j]);
        std::vector<double> e(len);
        for (std::size_t j = 0; j < len; ++j) e[j] = out[j] = std::exp(-d[j] - mx);
        const double z = kernels::sorted_sum(e.data(), len);
        for (std::size_t j = 0; j < len; ++j) out[j] /= z;
      }
    }
  }
  return Tensor::from({batch, 1, n, n}, std::move(w));
}

Tensor mat_attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                     AttentionTrace* trace, bool project) {
  Heads hd = project_heads(in, p, cfg);
  const std::size_t b = in.x.dim(0), n = in.x.dim(1);
  Tensor a = ad::softmax(scaled_masked(ad::matmul(hd.q, ad::transpose(hd.k)), in, cfg));
  Tensor w = ad::mul_scalar(a, cfg.lambda_a);
  if (cfg.lambda_d != 0 || cfg.lambda_g != 0) {
    if (!in.adjacency || !in.distances || in.lengths.size() != b)
      throw std::invalid_argument("mat_attention: adjacency, distances and lengths are required");
    Tensor gd = distance_weights(*in.distances, in.lengths, n, cfg.distance_g);
    std::vector<double> c(gd.values().begin(), gd.values().end());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = cfg.lambda_d * c[i] + cfg.lambda_g * (*in.adjacency)[i];
    w = ad::add(w, Tensor::from({b, 1, n, n}, std::move(c)));
  }
  if (trace) trace->weights = w;
  return finish(ad::attend(w, hd.v), p, project);
}

Tensor rmsa_forward(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                    AttentionTrace* trace, bool project) {
  if (!in.relation.defined()) throw std::invalid_argument("rmsa_forward: relation tensor required");
  Heads hd = project_heads(in, p, cfg);
  const std::size_t b = in.x.dim(0), n = in.x.dim(1);
  if (in.relation.dim(0) != b || in.relation.dim(1) != n || in.relation.dim(2) != n)
    throw std::invalid_argument("rmsa_forward: relation " + ad::shape_str(in.relation.shape()) + " vs input " +
                                ad::shape_str(in.x.shape()));
  Tensor rows;
  std::vector<std::size_t> identity;
  const std::vector<std::size_t>* index = in.relation_index;
  if (index) {
    rows = in.relation_rows;
  } else {
    rows = ad::reshape(in.relation, {b * n * n, in.relation.dim(3)});
    identity.resize(b * n * n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    index = &identity;
  }
  Tensor tk = relation_table(p.phi_k, rows, cfg);
  Tensor tv = relation_table(p.phi_v, rows, cfg);
  Tensor a = ad::softmax(scaled_masked(relative_scores(hd.q, hd.k, tk, *index, p, cfg.variant), in, cfg));
  if (trace) trace->weights = a;
  return finish(ad::attend(a, hd.v, tv, index), p, project);  // sum_j a_ij (v_j + bV_ij)
}

Tensor attention(const AttentionInput& in, const AttentionParams& p, const AttentionConfig& cfg,
                 AttentionTrace* trace) {
  switch (cfg.variant) {
    case Variant::vanilla: return vanilla_attention(in, p, cfg, trace);
    case Variant::mat_baseline: return mat_attention(in, p, cfg, trace);
    default: return rmsa_forward(in, p, cfg, trace);
  }
}

}  // namespace rmat::rmsa
