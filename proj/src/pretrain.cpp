#include "rmat/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rmat/error.hpp"
#include "rmat/kernels.hpp"
#include "rmat/featurize.hpp"
#include "rmat/log.hpp"
#include "rmat/train.hpp"

namespace rmat::pretrain {

using ad::Tensor;

namespace {

std::string atom_symbol(const molio::Atom& a) {
  return a.element == molio::Element::Other ? a.symbol : std::string(molio::element_symbol(a.element));
}

std::string_view bond_kind(double order) {
  if (order == 1.0) return "SINGLE";
  if (order == 1.5) return "AROMATIC";
  if (order == 2.0) return "DOUBLE";
  if (order == 3.0) return "TRIPLE";
  throw DataError("context_label: unsupported bond order " + std::to_string(order));
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

}  // namespace

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::masking: return "masking";
    case Stage::contextual: return "contextual";
    case Stage::descriptors: return "descriptors";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  if (s == "masking") return Stage::masking;
  if (s == "contextual") return Stage::contextual;
  if (s == "descriptors" || s == "physiochemical") return Stage::descriptors;
  throw std::invalid_argument("unknown pretraining stage '" + std::string(s) + "'");
}

std::string context_label(const molio::Molecule& mol, std::size_t i) {
  if (i >= mol.size()) throw std::out_of_range("context_label: atom index out of range");
  if (mol.atoms[i].element == molio::Element::Dummy) throw std::invalid_argument("context_label: dummy atom");
  std::map<std::string, int> counts;
  for (const auto& b : mol.bonds) {
    if (b.a != i && b.b != i) continue;
    const std::size_t j = b.a == i ? b.b : b.a;
    counts[atom_symbol(mol.atoms[j]) + "-" + std::string(bond_kind(b.order))]++;
  }
  std::string out = atom_symbol(mol.atoms[i]);
  for (const auto& [term, n] : counts) out += "_" + term + std::to_string(n);
  return out;
}

ContextVocab ContextVocab::build(const std::vector<molio::Molecule>& corpus) {
  std::set<std::string> seen;
  for (const auto& m : corpus)
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.atoms[i].element != molio::Element::Dummy) seen.insert(context_label(m, i));
  return from_labels({seen.begin(), seen.end()});
}

ContextVocab ContextVocab::from_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  labels.erase(std::remove(labels.begin(), labels.end(), std::string(kUnk)), labels.end());
  ContextVocab v;
  v.labels_.push_back(std::string(kUnk));
  v.labels_.insert(v.labels_.end(), labels.begin(), labels.end());
  return v;
}

std::size_t ContextVocab::index(const std::string& label) const {
  auto it = std::lower_bound(labels_.begin() + 1, labels_.end(), label);
  return it != labels_.end() && *it == label ? static_cast<std::size_t>(it - labels_.begin()) : 0;
}

std::string ContextVocab::serialize() const {
  std::string out;
  for (const auto& l : labels_) out += l + "\n";
  return out;
}

ContextVocab ContextVocab::parse(std::string_view text) {
  std::vector<std::string> labels;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) labels.push_back(line);
  if (labels.empty() || labels.front() != kUnk) throw DataError("vocab file must start with " + std::string(kUnk));
  if (!std::is_sorted(labels.begin() + 1, labels.end())) throw DataError("vocab file is not sorted");
  return from_labels(std::move(labels));
}

MaskPlan make_mask_plan(const molio::Molecule& mol, double rate, Rng& rng) {
  if (!(rate > 0 && rate <= 1)) throw std::invalid_argument("mask rate must be in (0, 1]");
  std::vector<std::size_t> real;
  for (std::size_t i = 0; i < mol.size(); ++i)
    if (mol.atoms[i].element != molio::Element::Dummy) real.push_back(i);
  if (real.empty()) throw DataError("make_mask_plan: molecule has no real atoms");
  const double want = std::ceil(rate * static_cast<double>(real.size()) - 1e-9);
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, real.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(real[i], real[i + rng.below(real.size() - i)]);
  MaskPlan plan;
  plan.centers.assign(real.begin(), real.begin() + static_cast<long>(k));
  std::sort(plan.centers.begin(), plan.centers.end());
  plan.masked.assign(mol.size(), false);
  for (std::size_t c : plan.centers) {
    plan.masked[c] = true;
    plan.targets.push_back(context_label(mol, c));
    plan.elements.push_back(static_cast<std::size_t>(mol.atoms[c].element));
  }
  for (const auto& b : mol.bonds) {
    if (std::binary_search(plan.centers.begin(), plan.centers.end(), b.a)) plan.masked[b.b] = true;
    if (std::binary_search(plan.centers.begin(), plan.centers.end(), b.b)) plan.masked[b.a] = true;
  }
  return plan;
}

Tensor contextual_loss(const Tensor& center_logits, const std::vector<std::string>& targets, const ContextVocab& vocab) {
  if (targets.empty()) throw std::invalid_argument("contextual_loss: no centers");
  std::vector<std::size_t> idx;
  idx.reserve(targets.size());
  for (const auto& t : targets) idx.push_back(vocab.index(t));
  return ad::cross_entropy(center_logits, idx);
}

Tensor masking_loss(const Tensor& center_logits, const std::vector<std::size_t>& elements) {
  if (elements.empty()) throw std::invalid_argument("masking_loss: no centers");
  return ad::cross_entropy(center_logits, elements);
}

Tensor descriptor_loss(const Tensor& pred, const std::vector<double>& targets) { return ad::mse_loss(pred, targets); }

DescriptorStats DescriptorStats::compute(const std::vector<molio::Molecule>& corpus) {
  if (corpus.empty()) throw DataError("descriptor stats: empty corpus");
  DescriptorStats s;
  const auto& names = featurize::descriptor_names();
  s.names.assign(names.begin(), names.end());
  const std::size_t k = names.size();
  s.mean.assign(k, 0.0);
  s.std.assign(k, 0.0);
  std::vector<std::vector<double>> rows;
  for (const auto& m : corpus) rows.push_back(featurize::descriptor_vector(m));
  for (const auto& r : rows)
    for (std::size_t j = 0; j < k; ++j) s.mean[j] += r[j];
  for (double& v : s.mean) v /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < k; ++j) s.std[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  s.active.assign(k, true);
  for (std::size_t j = 0; j < k; ++j) {
    s.std[j] = std::sqrt(s.std[j] / static_cast<double>(rows.size()));
    if (!(s.std[j] > 1e-12)) {
      s.active[j] = false;
      warn("descriptor '" + s.names[j] + "' has zero variance on the corpus; excluded");
    }
  }
  return s;
}

std::size_t DescriptorStats::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

std::vector<double> DescriptorStats::standardize(const std::vector<double>& raw) const {
  if (raw.size() != names.size()) throw std::invalid_argument("standardize: descriptor count mismatch");
  std::vector<double> out;
  for (std::size_t j = 0; j < raw.size(); ++j)
    if (active[j]) out.push_back((raw[j] - mean[j]) / std[j]);
  return out;
}

std::string DescriptorStats::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "# name mean std active\n";
  for (std::size_t j = 0; j < names.size(); ++j)
    out << names[j] << " " << mean[j] << " " << std[j] << " " << (active[j] ? 1 : 0) << "\n";
  return out.str();
}

DescriptorStats DescriptorStats::parse(std::string_view text) {
  DescriptorStats s;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name;
    double m = 0, sd = 0;
    int act = 0;
    if (!(ls >> name >> m >> sd >> act)) throw DataError("bad descriptor stats line '" + line + "'");
    s.names.push_back(name);
    s.mean.push_back(m);
    s.std.push_back(sd);
    s.active.push_back(act != 0);
  }
  return s;
}

void PretrainConfig::check() const {
  if (stages.empty()) throw std::invalid_argument("pretraining needs at least one stage");
  if (!(mask_rate > 0 && mask_rate <= 1)) throw std::invalid_argument("mask_rate must be in (0, 1]");
  if (epochs == 0 || batch_size == 0 || warmup_steps == 0) throw std::invalid_argument("pretraining sizes must be positive");
  if (!(lr > 0)) throw std::invalid_argument("pretrain_lr must be positive");
  if (!(validation_fraction >= 0 && validation_fraction < 1))
    throw std::invalid_argument("validation_fraction must be in [0, 1)");
}

PretrainResult pretrain_run(const std::vector<molio::Molecule>& corpus, const model::ModelConfig& mcfg,
                            const PretrainConfig& cfg, const std::string& out_dir, const std::string& config_echo) {
  cfg.check();
  kernels::retain_heap();
  if (corpus.empty()) throw DataError("pretraining corpus is empty");
  PretrainResult result;
  const bool need_ctx = std::count(cfg.stages.begin(), cfg.stages.end(), Stage::contextual) > 0;
  const bool need_mask = std::count(cfg.stages.begin(), cfg.stages.end(), Stage::masking) > 0;
  const bool need_desc = std::count(cfg.stages.begin(), cfg.stages.end(), Stage::descriptors) > 0;

  // Molecules are featurized with the dummy appended, so atom indices of the
  // source molecule address the same rows.
  std::vector<molio::Molecule> mols;
  mols.reserve(corpus.size());
  for (const auto& m : corpus) mols.push_back(m.has_dummy() ? m : molio::add_dummy_node(m, mcfg.distance.cutoff));
  const auto feats = featurize::featurize_all(mols, mcfg.distance);

  if (need_ctx) result.vocab = ContextVocab::build(mols);
  std::vector<std::vector<double>> desc_targets;
  if (need_desc) {
    result.stats = DescriptorStats::compute(mols);
    if (result.stats.active_count() == 0) throw DataError("every descriptor is constant on the corpus");
    for (const auto& m : mols) desc_targets.push_back(result.stats.standardize(featurize::descriptor_vector(m)));
  }

  model::HeadSpec heads;
  heads.context_vocab = need_ctx ? result.vocab.size() : 0;
  heads.masking = need_mask;
  heads.descriptor_dim = need_desc ? result.stats.active_count() : 0;
  result.model = std::make_unique<model::Model>(mcfg, heads);
  model::Model& m = *result.model;

  std::vector<std::size_t> order(mols.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(cfg.seed, 7));
  split_rng.shuffle(order);
  const auto n_valid = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(mols.size())));
  const std::vector<std::size_t> valid(order.begin(), order.begin() + static_cast<long>(n_valid));
  const std::vector<std::size_t> train(order.begin() + static_cast<long>(n_valid), order.end());
  if (train.empty()) throw DataError("pretraining split left no training molecules");

  auto batch_loss = [&](Stage stage, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                        Rng& rng) -> Tensor {
    std::vector<const featurize::FeaturizedMolecule*> fm;
    for (std::size_t i = begin; i < end; ++i) fm.push_back(&feats[idx[i]]);
    const model::Batch batch = model::collate(fm);
    const std::size_t n = batch.max_n;
    if (stage == Stage::descriptors) {
      std::vector<double> y;
      for (std::size_t i = begin; i < end; ++i) y.insert(y.end(), desc_targets[idx[i]].begin(), desc_targets[idx[i]].end());
      Tensor pooled = m.attention_pool(m.encode(batch), batch);
      return descriptor_loss(m.descriptor_output(pooled), y);
    }
    std::vector<bool> flags(batch.size * n, false);
    std::vector<std::size_t> rows, elements;
    std::vector<std::string> targets;
    for (std::size_t b = 0; b < batch.size; ++b) {
      const MaskPlan plan = make_mask_plan(mols[idx[begin + b]], cfg.mask_rate, rng);
      for (std::size_t i = 0; i < plan.masked.size(); ++i) flags[b * n + i] = plan.masked[i];
      for (std::size_t c = 0; c < plan.centers.size(); ++c) {
        rows.push_back(b * n + plan.centers[c]);
        targets.push_back(plan.targets[c]);
        elements.push_back(plan.elements[c]);
      }
    }
    Tensor hidden = m.encode(batch, &flags);
    if (stage == Stage::contextual) return contextual_loss(m.context_logits(hidden, rows), targets, result.vocab);
    return masking_loss(m.masking_logits(hidden, rows), elements);
  };

  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  for (std::size_t si = 0; si < cfg.stages.size(); ++si) {
    const Stage stage = cfg.stages[si];
    StageLog log;
    log.stage = stage;
    train::Adam opt(m.params().parameters());
    Rng rng(mix_seed(cfg.seed, 100 + si));
    const double scale = train::noam_scale_for_peak(cfg.lr, mcfg.d_model, cfg.warmup_steps);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::vector<std::size_t> ord = train;
      rng.shuffle(ord);
      double sum = 0;
      std::size_t nb = 0;
      for (std::size_t b = 0; b < ord.size(); b += cfg.batch_size) {
        Tensor loss = batch_loss(stage, ord, b, std::min(ord.size(), b + cfg.batch_size), rng);
        if (!std::isfinite(loss.item()))
          throw NumericError("pretraining loss became non-finite at step " + std::to_string(step + 1));
        opt.zero_grad();
        ad::backward(loss);
        ++step;
        opt.step(train::noam_lr(step, mcfg.d_model, cfg.warmup_steps, scale));
        log.step_losses.push_back(loss.item());
        sum += loss.item();
        ++nb;
      }
      log.epoch_train_loss.push_back(sum / static_cast<double>(nb));
      if (!valid.empty()) {
        Rng vr(mix_seed(cfg.seed, 200 + si));  // same masks every epoch
        double vs = 0;
        std::size_t vb = 0;
        for (std::size_t b = 0; b < valid.size(); b += cfg.batch_size) {
          vs += batch_loss(stage, valid, b, std::min(valid.size(), b + cfg.batch_size), vr).item();
          ++vb;
        }
        log.epoch_valid_loss.push_back(vs / static_cast<double>(vb));
      }
    }
    if (!out_dir.empty()) {
      const fs::path p = fs::path(out_dir) / ("stage" + std::to_string(si) + "_" + std::string(to_string(stage)) + ".ckpt");
      ad::save_checkpoint(p.string(), model::make_checkpoint(m, config_echo,
                                                             "stage = " + std::string(to_string(stage)) +
                                                                 "\nstage_index = " + std::to_string(si) + "\n"));
      log.checkpoint_path = p.string();
    }
    result.stages.push_back(std::move(log));
  }
  if (!out_dir.empty()) {
    if (need_ctx) write_text(fs::path(out_dir) / "vocab.txt", result.vocab.serialize());
    if (need_desc) write_text(fs::path(out_dir) / "descriptor_stats.txt", result.stats.serialize());
  }
  return result;
}

}  // namespace rmat::pretrain
