#include "rmat/model.hpp"

#include <cmath>
#include <stdexcept>

#include "rmat/error.hpp"

namespace rmat::model {

using ad::Tensor;

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return ad::add(ad::matmul(x, w), b); }

Tensor affine_norm(const Tensor& x, const Tensor& g, const Tensor& b) {
  return ad::add(ad::mul(ad::layer_norm(x), g), b);
}

bool is_head(const std::string& name) { return name.rfind("heads.", 0) == 0; }

}  // namespace

std::string_view to_string(Task t) { return t == Task::regression ? "regression" : "binary_classification"; }

Task task_from_string(std::string_view s) {
  if (s == "regression") return Task::regression;
  if (s == "binary_classification" || s == "classification") return Task::binary_classification;
  throw std::invalid_argument("unknown task '" + std::string(s) + "'");
}

ModelConfig ModelConfig::full_size() {
  ModelConfig c;
  c.n_layers = 10;
  c.n_heads = 12;
  c.d_model = 768;
  c.relation_hidden = 128;
  c.pool_heads = 4;
  c.pool_hidden = 128;
  c.mlp_hidden = 1024;
  c.mlp_dropout = 0.1;
  return c;
}

rmsa::AttentionConfig ModelConfig::attention() const {
  rmsa::AttentionConfig a;
  a.d_model = d_model;
  a.n_heads = n_heads;
  a.relation_dim = distance.relation_dim();
  a.relation_hidden = relation_hidden;
  a.variant = variant;
  a.lambda_a = mat_lambda_a;
  a.lambda_d = mat_lambda_d;
  a.lambda_g = mat_lambda_g;
  a.distance_g = mat_distance_g;
  return a;
}

void ModelConfig::check() const {
  if (n_layers == 0 || pool_heads == 0 || pool_hidden == 0 || mlp_hidden == 0)
    throw std::invalid_argument("model dims must be positive");
  if (!(mlp_dropout >= 0 && mlp_dropout < 1)) throw std::invalid_argument("mlp_dropout must be in [0, 1)");
  attention().check();
  distance.check();
}

std::size_t parameter_count(const ModelConfig& cfg, const HeadSpec& heads) {
  const std::size_t d = cfg.d_model, f = cfg.ffn_width(), r = cfg.distance.relation_dim(), rh = cfg.relation_hidden;
  const std::size_t s = cfg.pool_heads, p = cfg.pool_hidden, m = cfg.mlp_hidden;
  std::size_t layer = 4 * d * d + d + 4 * d + (d * f + f + f * d + d);
  if (rmsa::is_relative(cfg.variant)) layer += 2 * (r * rh + rh + rh * d + d);
  if (cfg.variant == rmsa::Variant::rmat || cfg.variant == rmsa::Variant::relative_attentive_bias) layer += 2 * d;
  std::size_t total = featurize::kAtomFeatureDim * d + d + cfg.n_layers * layer;
  total += d * p + p * s;
  total += (s * d + cfg.extra_feature_dim) * m + m + m + 1;
  if (heads.context_vocab || heads.masking) total += d;
  if (heads.context_vocab) total += d * heads.context_vocab + heads.context_vocab;
  if (heads.masking) total += d * molio::kElementCount + molio::kElementCount;
  if (heads.descriptor_dim) total += s * d * heads.descriptor_dim + heads.descriptor_dim;
  return total;
}

Model::Model(const ModelConfig& cfg, const HeadSpec& heads) : cfg_(cfg), heads_(heads) {
  cfg_.check();
  const std::size_t d = cfg_.d_model, f = cfg_.ffn_width();
  const rmsa::AttentionConfig acfg = cfg_.attention();
  Rng rng(mix_seed(cfg_.seed, 0));
  embed_w_ = store_.xavier("embed.w", featurize::kAtomFeatureDim, d, rng);
  embed_b_ = store_.zeros("embed.b", {d});
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const std::string pre = "layers." + std::to_string(l);
    BlockParams bp;
    bp.attn = rmsa::make_attention_params(store_, pre + ".attn", acfg, rng);
    bp.ln1_g = store_.constant(pre + ".ln1.g", {d}, 1.0);
    bp.ln1_b = store_.zeros(pre + ".ln1.b", {d});
    bp.ff_w1 = store_.xavier(pre + ".ff.w1", d, f, rng);
    bp.ff_b1 = store_.zeros(pre + ".ff.b1", {f});
    bp.ff_w2 = store_.xavier(pre + ".ff.w2", f, d, rng);
    bp.ff_b2 = store_.zeros(pre + ".ff.b2", {d});
    bp.ln2_g = store_.constant(pre + ".ln2.g", {d}, 1.0);
    bp.ln2_b = store_.zeros(pre + ".ln2.b", {d});
    blocks_.push_back(bp);
  }
  pool_w1_ = store_.xavier("pool.w1", d, cfg_.pool_hidden, rng);
  pool_w2_ = store_.xavier("pool.w2", cfg_.pool_hidden, cfg_.pool_heads, rng);
  const std::size_t g = cfg_.pool_heads * d;
  mlp_w1_ = store_.xavier("mlp.w1", g + cfg_.extra_feature_dim, cfg_.mlp_hidden, rng);
  mlp_b1_ = store_.zeros("mlp.b1", {cfg_.mlp_hidden});
  mlp_w2_ = store_.xavier("mlp.w2", cfg_.mlp_hidden, 1, rng);
  mlp_b2_ = store_.zeros("mlp.b2", {1});

  // Heads draw from their own stream so the body init does not depend on them.
  Rng hr(mix_seed(cfg_.seed, 1));
  if (heads_.context_vocab || heads_.masking) {
    mask_token_ = store_.create("heads.mask_token", {d});
    const double bound = std::sqrt(6.0 / static_cast<double>(1 + d));
    for (double& v : mask_token_.mutable_values()) v = hr.uniform(-bound, bound);
  }
  if (heads_.context_vocab) {
    ctx_w_ = store_.xavier("heads.context.w", d, heads_.context_vocab, hr);
    ctx_b_ = store_.zeros("heads.context.b", {heads_.context_vocab});
  }
  if (heads_.masking) {
    msk_w_ = store_.xavier("heads.masking.w", d, molio::kElementCount, hr);
    msk_b_ = store_.zeros("heads.masking.b", {molio::kElementCount});
  }
  if (heads_.descriptor_dim) {
    desc_w_ = store_.xavier("heads.descriptor.w", g, heads_.descriptor_dim, hr);
    desc_b_ = store_.zeros("heads.descriptor.b", {heads_.descriptor_dim});
  }
}

Tensor Model::embed_input(const Batch& batch, const std::vector<bool>* mask) const {
  if (batch.atoms.dim(2) != featurize::kAtomFeatureDim)
    throw std::invalid_argument("embed_input: expected 36 feature columns, got " + std::to_string(batch.atoms.dim(2)));
  Tensor x = linear(batch.atoms, embed_w_, embed_b_);
  if (mask) {
    if (!mask_token_.defined()) throw std::logic_error("embed_input: model has no mask token");
    x = ad::replace_rows(x, *mask, mask_token_);
  }
  return x;
}

Tensor Model::encoder_block(std::size_t layer, const Tensor& x, const Batch& batch, rmsa::AttentionTrace* trace) const {
  const BlockParams& bp = blocks_.at(layer);
  rmsa::AttentionInput in;
  in.x = x;
  if (rmsa::is_relative(cfg_.variant)) {
    in.relation = batch.relation;
    if (!batch.relation_unique.index.empty()) {
      in.relation_rows = batch.relation_unique.rows;
      in.relation_index = &batch.relation_unique.index;
    }
  }
  in.score_mask = batch.score_mask;
  in.adjacency = &batch.adjacency;
  in.distances = &batch.distances;
  in.lengths = batch.lengths;
  Tensor a = rmsa::attention(in, bp.attn, cfg_.attention(), trace);
  Tensor x1 = affine_norm(ad::add(x, a), bp.ln1_g, bp.ln1_b);
  Tensor ff = linear(ad::leaky_relu(linear(x1, bp.ff_w1, bp.ff_b1), kLeakySlope), bp.ff_w2, bp.ff_b2);
  return affine_norm(ad::add(x1, ff), bp.ln2_g, bp.ln2_b);
}

Tensor Model::attention_pool(const Tensor& h, const Batch& batch) const {
  const std::size_t b = h.dim(0), d = h.dim(2);
  Tensor scores = ad::matmul(ad::tanh(ad::matmul(h, pool_w1_)), pool_w2_);  // (B, N, S)
  Tensor weights = ad::softmax(ad::add(ad::transpose(scores), batch.pool_mask));  // over atoms
  return ad::reshape(ad::matmul(weights, h), {b, cfg_.pool_heads * d});
}

Tensor Model::predict(const Tensor& g, const Batch& batch, bool training, Rng* rng) const {
  Tensor in = g;
  if (cfg_.extra_feature_dim) {
    if (!batch.extra.defined() || batch.extra.dim(1) != cfg_.extra_feature_dim)
      throw DataError("predict: expected " + std::to_string(cfg_.extra_feature_dim) + " extra features");
    in = ad::concat({g, batch.extra});
  } else if (batch.extra.defined() && batch.extra.dim(1) != 0) {
    throw DataError("predict: model takes no extra features");
  }
  Tensor hdn = ad::leaky_relu(linear(in, mlp_w1_, mlp_b1_), kLeakySlope);
  if (training && cfg_.mlp_dropout > 0) {
    if (!rng) throw std::logic_error("predict: training needs an rng");
    hdn = ad::dropout(hdn, cfg_.mlp_dropout, *rng, true);
  }
  Tensor out = linear(hdn, mlp_w2_, mlp_b2_);
  return ad::reshape(out, {g.dim(0)});
}

Tensor Model::encode(const Batch& batch, const std::vector<bool>* mask, std::vector<Tensor>* attention) const {
  Tensor x = embed_input(batch, mask);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    rmsa::AttentionTrace trace;
    x = encoder_block(l, x, batch, attention ? &trace : nullptr);
    if (attention) attention->push_back(trace.weights);
  }
  return x;
}

ForwardResult Model::forward(const Batch& batch, const ForwardOptions& opt) const {
  ForwardResult r;
  r.hidden = encode(batch, opt.mask, opt.record_attention ? &r.attention : nullptr);
  r.pooled = attention_pool(r.hidden, batch);
  r.prediction = predict(r.pooled, batch, opt.training, opt.rng);
  return r;
}

Tensor Model::context_logits(const Tensor& hidden, const std::vector<std::size_t>& rows) const {
  if (!ctx_w_.defined()) throw std::logic_error("model has no contextual head");
  Tensor flat = ad::reshape(hidden, {hidden.dim(0) * hidden.dim(1), hidden.dim(2)});
  return linear(ad::embedding_lookup(flat, rows), ctx_w_, ctx_b_);
}

Tensor Model::masking_logits(const Tensor& hidden, const std::vector<std::size_t>& rows) const {
  if (!msk_w_.defined()) throw std::logic_error("model has no masking head");
  Tensor flat = ad::reshape(hidden, {hidden.dim(0) * hidden.dim(1), hidden.dim(2)});
  return linear(ad::embedding_lookup(flat, rows), msk_w_, msk_b_);
}

Tensor Model::descriptor_output(const Tensor& pooled) const {
  if (!desc_w_.defined()) throw std::logic_error("model has no descriptor head");
  return linear(pooled, desc_w_, desc_b_);
}

std::vector<ad::Parameter> Model::body_parameters() const {
  std::vector<ad::Parameter> out;
  for (const auto& p : store_.parameters())
    if (!is_head(p.name)) out.push_back(p);
  return out;
}

void load_parameters(Model& model, const ad::Checkpoint& ckpt, bool require_all) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  for (auto& p : model.params().parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      if (require_all || !is_head(p.name)) throw DataError("checkpoint lacks parameter '" + p.name + "'");
      continue;
    }
    const Tensor& src = *it->second;
    if (src.shape() != p.tensor.shape())
      throw DataError("checkpoint parameter '" + p.name + "' has shape " + ad::shape_str(src.shape()) +
                      ", model expects " + ad::shape_str(p.tensor.shape()));
    std::copy(src.values().begin(), src.values().end(), p.tensor.mutable_values().begin());
  }
}

ad::Checkpoint make_checkpoint(const Model& model, const std::string& config_echo, const std::string& meta) {
  ad::Checkpoint ck;
  ck.config = config_echo;
  ck.meta = meta;
  for (const auto& p : model.params().parameters()) {
    std::vector<double> v(p.tensor.values().begin(), p.tensor.values().end());
    ck.tensors.emplace_back(p.name, Tensor::from(p.tensor.shape(), std::move(v)));
  }
  return ck;
}

}  // namespace rmat::model
