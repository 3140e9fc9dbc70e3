#include <cmath>
#include <exception>
#include <sstream>

#include "json.hpp"

#include "rmat/error.hpp"
#include "rmat/kernels.hpp"
#include "rmat/log.hpp"
#include "rmat/train.hpp"

namespace rmat::train {

namespace {

using model::Model;

model::Batch make_batch(const FinetuneData& data, const std::vector<std::size_t>& idx, std::size_t begin,
                        std::size_t end) {
  std::vector<const featurize::FeaturizedMolecule*> mols;
  std::vector<const std::vector<double>*> extras;
  for (std::size_t i = begin; i < end; ++i) {
    mols.push_back(&data.mols[idx[i]]);
    if (!data.extra.empty()) extras.push_back(&data.extra[idx[i]]);
  }
  return model::collate(mols, 0, extras);
}

std::vector<double> raw_outputs(const Model& m, const FinetuneData& data, const std::vector<std::size_t>& idx,
                                std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    const auto batch = make_batch(data, idx, b, std::min(idx.size(), b + batch_size));
    const auto r = m.forward(batch);
    out.insert(out.end(), r.prediction.values().begin(), r.prediction.values().end());
  }
  return out;
}

std::vector<double> to_label_space(std::vector<double> raw, model::Task task, const LabelNormalizer& norm) {
  for (double& v : raw) v = task == model::Task::regression ? norm.inverse(v) : 1.0 / (1.0 + std::exp(-v));
  return raw;
}

std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

struct RunSetup {
  const FinetuneData& data;
  const Split& split;
  std::size_t split_index;
  model::ModelConfig mcfg;
  const TrainConfig& tcfg;
  Metric metric;
  LabelNormalizer norm;       // applied to the loss targets
  double report_std = 1;      // train-label std for normalized RMSE reporting
  const ad::Checkpoint* init;
};

double metric_on(const Model& m, const RunSetup& s, const std::vector<std::size_t>& idx,
                 std::vector<double>* label_pred = nullptr) {
  auto pred = to_label_space(raw_outputs(m, s.data, idx, std::max<std::size_t>(s.tcfg.batch_size, 1)),
                             s.mcfg.task, s.norm);
  const double v = compute_metric(s.metric, pred, gather(s.data.labels, idx));
  if (label_pred) *label_pred = std::move(pred);
  return v;
}

bool improves(Metric m, double candidate, double best, bool have_best) {
  if (!std::isfinite(candidate)) return false;
  if (!have_best) return true;
  return higher_is_better(m) ? candidate > best : candidate < best;
}

LrRun run_lr(const RunSetup& s, double lr) {
  LrRun run;
  run.lr = lr;
  const TrainConfig& t = s.tcfg;
  Model m(s.mcfg);
  if (s.init) model::load_parameters(m, *s.init, false);
  Adam opt(m.params().parameters());
  Rng rng(mix_seed(t.seed, 1000 + s.split_index));

  std::vector<double> targets = s.data.labels;
  if (s.mcfg.task == model::Task::regression) targets = s.norm.transform(targets);

  const std::size_t n_train = s.split.train.size();
  const std::size_t per_epoch = (n_train + t.batch_size - 1) / t.batch_size;
  std::size_t total = t.epochs * per_epoch;
  if (t.max_steps) total = std::min(total, t.max_steps);
  const auto warmup = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t.warmup_fraction * static_cast<double>(total))));
  const double scale = noam_scale_for_peak(lr, s.mcfg.d_model, warmup);
  const bool same_valid = s.split.valid == s.split.train;

  std::size_t step = 0;
  bool have_best = false;
  try {
    for (std::size_t epoch = 1; epoch <= t.epochs && step < total; ++epoch) {
      std::vector<std::size_t> order = s.split.train;
      rng.shuffle(order);
      double loss_sum = 0;
      std::size_t n_batches = 0;
      for (std::size_t b = 0; b < n_train && step < total; b += t.batch_size) {
        const std::size_t e = std::min(n_train, b + t.batch_size);
        const auto batch = make_batch(s.data, order, b, e);
        const auto out = m.forward(batch, {true, &rng, nullptr, false});
        const auto y = gather(targets, std::vector<std::size_t>(order.begin() + static_cast<long>(b),
                                                                order.begin() + static_cast<long>(e)));
        ad::Tensor loss = s.mcfg.task == model::Task::regression ? ad::mse_loss(out.prediction, y)
                                                                   : ad::bce_with_logits(out.prediction, y);
        if (!std::isfinite(loss.item()))
          throw NumericError("non-finite loss at step " + std::to_string(step + 1));
        opt.zero_grad();
        ad::backward(loss);
        ++step;
        opt.step(noam_lr(step, s.mcfg.d_model, warmup, scale));
        run.step_losses.push_back(loss.item());
        loss_sum += loss.item();
        ++n_batches;
      }
      const bool last = epoch == t.epochs || step >= total;
      if (epoch % t.eval_every != 0 && !last) continue;

      EpochRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.train_loss = n_batches ? loss_sum / static_cast<double>(n_batches) : 0;
      std::vector<double> train_pred;
      if (t.track_train_metric || same_valid) {
        rec.train_metric = metric_on(m, s, s.split.train, &train_pred);
        if (s.mcfg.task == model::Task::regression) {
          rec.train_rmse_normalized = rmse(train_pred, gather(s.data.labels, s.split.train)) / s.report_std;
          if (!run.steps_to_threshold && *rec.train_rmse_normalized < t.rmse_threshold) run.steps_to_threshold = step;
        }
      }
      rec.valid_metric = same_valid ? *rec.train_metric : metric_on(m, s, s.split.valid);
      if (!t.track_train_metric) {
        rec.train_metric.reset();
        rec.train_rmse_normalized.reset();
      }
      if (improves(s.metric, rec.valid_metric, run.best_valid, have_best)) {
        have_best = true;
        run.best_valid = rec.valid_metric;
        run.best_epoch = epoch;
        run.test_metric = s.split.test == s.split.valid ? rec.valid_metric : metric_on(m, s, s.split.test);
        run.best_params.clear();
        for (const auto& p : m.params().parameters())
          run.best_params.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
      }
      run.epochs.push_back(rec);
      if (t.stop_at_threshold && run.steps_to_threshold) break;
    }
    if (!have_best) throw NumericError("no finite validation metric");
  } catch (const NumericError& e) {
    run.ok = false;
    run.diagnostic = e.what();
    std::ostringstream msg;
    msg << "lr " << lr << " aborted: " << e.what();
    warn(msg.str());
  }
  return run;
}

}  // namespace

void TrainConfig::check() const {
  if (epochs == 0 || batch_size == 0) throw std::invalid_argument("epochs and batch_size must be positive");
  if (!(warmup_fraction > 0 && warmup_fraction < 1)) throw std::invalid_argument("warmup_fraction must be in (0, 1)");
  if (lr_grid.empty()) throw std::invalid_argument("lr_grid must not be empty");
  for (double lr : lr_grid)
    if (!(lr > 0)) throw std::invalid_argument("learning rates must be positive");
  if (n_splits == 0 || eval_every == 0) throw std::invalid_argument("n_splits and eval_every must be positive");
}

std::vector<double> predict_all(const Model& m, const FinetuneData& data, const std::vector<std::size_t>& idx,
                                const LabelNormalizer& norm, std::size_t batch_size) {
  return to_label_space(raw_outputs(m, data, idx, batch_size), m.config().task, norm);
}

FinetuneResult finetune(const FinetuneData& data, const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                        const ad::Checkpoint* init, const std::vector<Split>* splits, const std::string& config_echo) {
  tcfg.check();
  kernels::retain_heap();
  if (data.mols.size() != data.labels.size()) throw std::invalid_argument("finetune: molecules and labels differ");
  if (!data.extra.empty() && data.extra.size() != data.mols.size())
    throw std::invalid_argument("finetune: extra features do not cover every molecule");
  FinetuneResult result;
  result.metric = tcfg.metric.value_or(mcfg.task == model::Task::regression ? Metric::rmse : Metric::auc);
  if ((result.metric == Metric::auc) != (mcfg.task == model::Task::binary_classification))
    throw std::invalid_argument("metric " + std::string(to_string(result.metric)) + " does not fit the task");

  std::vector<Split> plan;
  if (splits) plan = *splits;
  else
    for (std::size_t k = 0; k < tcfg.n_splits; ++k)
      plan.push_back(random_split(data.mols.size(), tcfg.split_ratios, mix_seed(tcfg.seed, k)));

  for (std::size_t k = 0; k < plan.size(); ++k) {
    const Split& sp = plan[k];
    if (sp.train.empty() || sp.valid.empty() || sp.test.empty()) throw DataError("finetune: empty split");
    model::ModelConfig mc = mcfg;
    mc.seed = mix_seed(mcfg.seed, k);
    const auto train_labels = gather(data.labels, sp.train);
    LabelNormalizer fitted;
    if (mcfg.task == model::Task::regression) fitted = LabelNormalizer::fit(train_labels);
    RunSetup setup{data, sp, k, mc, tcfg, result.metric,
                   tcfg.normalize_labels && mcfg.task == model::Task::regression ? fitted : LabelNormalizer{},
                   fitted.std, init};

    SplitResult sr;
    sr.split = k;
    sr.runs.resize(tcfg.lr_grid.size());
    std::vector<std::exception_ptr> errors(tcfg.lr_grid.size());
    const long n_lr = static_cast<long>(tcfg.lr_grid.size());
#pragma omp parallel for schedule(dynamic) if (tcfg.parallel_grid)
    for (long i = 0; i < n_lr; ++i) {
      try {
        sr.runs[i] = run_lr(setup, tcfg.lr_grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    bool found = false;
    for (std::size_t i = 0; i < sr.runs.size(); ++i) {
      const LrRun& r = sr.runs[i];
      if (!r.ok) continue;
      if (!found) {
        sr.selected = i;
        found = true;
        continue;
      }
      const LrRun& best = sr.runs[sr.selected];
      const bool better = higher_is_better(result.metric) ? r.best_valid > best.best_valid : r.best_valid < best.best_valid;
      if (better || (r.best_valid == best.best_valid && r.lr < best.lr)) sr.selected = i;
    }
    if (!found) throw NumericError("every learning rate diverged on split " + std::to_string(k));
    sr.test_metric = sr.runs[sr.selected].test_metric;

    if (k == 0) {
      result.normalizer = setup.norm;
      Model m(mc);
      auto& params = m.params().parameters();
      const auto& snap = sr.runs[sr.selected].best_params;
      for (std::size_t p = 0; p < params.size(); ++p)
        std::copy(snap[p].begin(), snap[p].end(), params[p].tensor.mutable_values().begin());
      std::ostringstream meta;
      meta.precision(17);
      meta << "stage = finetune\nlabel_mean = " << setup.norm.mean << "\nlabel_std = " << setup.norm.std
           << "\nlr = " << sr.runs[sr.selected].lr << "\nbest_epoch = " << sr.runs[sr.selected].best_epoch << "\n";
      result.checkpoint = model::make_checkpoint(m, config_echo, meta.str());
    }
    for (auto& r : sr.runs) r.best_params.clear();
    result.splits.push_back(std::move(sr));
  }

  double sum = 0, sq = 0;
  for (const auto& s : result.splits) sum += s.test_metric;
  result.test_mean = sum / static_cast<double>(result.splits.size());
  for (const auto& s : result.splits) sq += (s.test_metric - result.test_mean) * (s.test_metric - result.test_mean);
  result.test_std = std::sqrt(sq / static_cast<double>(result.splits.size()));
  return result;
}

std::string result_json(const FinetuneResult& r, const std::string& config_echo) {
  using nlohmann::json;
  json j;
  j["config"] = config_echo;
  j["metric"] = std::string(to_string(r.metric));
  j["test_mean"] = r.test_mean;
  j["test_std"] = r.test_std;
  j["label_mean"] = r.normalizer.mean;
  j["label_std"] = r.normalizer.std;
  json splits = json::array();
  for (const auto& s : r.splits) {
    json js;
    js["split"] = s.split;
    js["selected_lr"] = s.runs[s.selected].lr;
    js["test_metric"] = s.test_metric;
    json runs = json::array();
    for (const auto& run : s.runs) {
      json jr;
      jr["lr"] = run.lr;
      jr["ok"] = run.ok;
      jr["diagnostic"] = run.diagnostic;
      jr["best_epoch"] = run.best_epoch;
      jr["best_valid"] = run.best_valid;
      jr["test_metric"] = run.test_metric;
      jr["steps_to_threshold"] = run.steps_to_threshold ? json(*run.steps_to_threshold) : json(nullptr);
      json curve = json::array();
      for (const auto& e : run.epochs) {
        json je{{"epoch", e.epoch}, {"step", e.step}, {"train_loss", e.train_loss}, {"valid_metric", e.valid_metric}};
        if (e.train_metric) je["train_metric"] = *e.train_metric;
        if (e.train_rmse_normalized) je["train_rmse_normalized"] = *e.train_rmse_normalized;
        curve.push_back(je);
      }
      jr["epochs"] = curve;
      runs.push_back(jr);
    }
    js["runs"] = runs;
    splits.push_back(js);
  }
  j["splits"] = splits;
  return j.dump(2) + "\n";
}

std::string summary_csv(const FinetuneResult& r) {
  std::ostringstream out;
  out.precision(17);
  out << "split,lr,ok,best_epoch,best_valid_" << to_string(r.metric) << ",test_" << to_string(r.metric)
      << ",steps_to_threshold,selected\n";
  for (const auto& s : r.splits)
    for (std::size_t i = 0; i < s.runs.size(); ++i) {
      const auto& run = s.runs[i];
      out << s.split << "," << run.lr << "," << (run.ok ? 1 : 0) << "," << run.best_epoch << "," << run.best_valid
          << "," << run.test_metric << ",";
      if (run.steps_to_threshold) out << *run.steps_to_threshold;
      out << "," << (i == s.selected ? 1 : 0) << "\n";
    }
  return out.str();
}

}  // namespace rmat::train
