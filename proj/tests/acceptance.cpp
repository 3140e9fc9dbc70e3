// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rmat/featurize.hpp"
#include "rmat/kernels.hpp"
#include "rmat/model.hpp"
#include "rmat/pretrain.hpp"
#include "rmat/rmsa.hpp"
#include "rmat/train.hpp"
#include "support/golden.hpp"
#include "support/op_cases.hpp"
#include "support/synthetic.hpp"

using namespace rmat;
namespace fs = std::filesystem;
using ad::Tensor;
using rmsa::Variant;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const Variant kVariants[] = {Variant::vanilla,       Variant::mat_baseline,
                             Variant::rmat,          Variant::relative_shaw,
                             Variant::relative_attentive_bias, Variant::relative_improved};
const Variant kRelative[] = {Variant::rmat, Variant::relative_shaw, Variant::relative_attentive_bias,
                             Variant::relative_improved};

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rmat_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + RMAT_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

std::vector<std::size_t> relabeling(std::size_t n, Rng& rng) {
  // real atoms shuffled, dummy node kept last
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> head(perm.begin(), perm.end() - 1);
  rng.shuffle(head);
  std::copy(head.begin(), head.end(), perm.begin());
  return perm;
}

// ---- 1 ----------------------------------------------------------------------

Outcome featurization_fixtures() {
  const auto t0 = Clock::now();
  const featurize::DistanceConfig cfg;
  int matched = 0;
  std::string why;
  const std::pair<const char*, const char*> smiles[] = {{"co2", "C(=O)=O"}, {"benzene", "c1ccccc1"}, {"ethanol", "CCO"}};
  for (const auto& [name, s] : smiles) {
    const auto fm = featurize::featurize(molio::parse_smiles(s), cfg);
    if (testing::matches_golden(fm, std::string(name) + "_smiles", &why)) ++matched;
    std::ifstream in(std::string(RMAT_TEST_DATA) + "/" + name + ".sdf");
    const auto parsed = molio::parse_sdf(in);
    if (parsed.molecules.size() == 1 &&
        testing::matches_golden(featurize::featurize(parsed.molecules[0], cfg), std::string(name) + "_sdf", &why))
      ++matched;
  }
  const double t = seconds_since(t0);
  std::string detail = std::to_string(matched) + "/6 fixtures bit-exact in " + fmt(t) + " s";
  if (matched != 6) detail += "; " + why;
  return {matched == 6 && t < 1.0, detail};
}

// ---- 2 ----------------------------------------------------------------------

Outcome distance_boundary() {
  const featurize::DistanceConfig cfg;
  const double c = cfg.cutoff, h = 1e-5;
  bool zeros = true;
  for (double v : featurize::distance_embedding(c, cfg)) zeros = zeros && v == 0.0;
  const bool ends = featurize::envelope(0.0, cfg.envelope_p) == 1.0 && featurize::envelope(1.0, cfg.envelope_p) == 0.0;
  double jump = 0, slope = 0;
  auto f = [&](double d, int n) { return featurize::distance_embedding(d, cfg)[n]; };
  for (int n = 0; n < cfg.n_emb; ++n) {
    jump = std::max({jump, std::abs(f(c - h, n) - f(c, n)), std::abs(f(c + h, n) - f(c, n))});
    const double left = (f(c, n) - f(c - 2 * h, n)) / (2 * h);   // centred at c - h
    const double centre = (f(c + h, n) - f(c - h, n)) / (2 * h);  // centred at c
    slope = std::max({slope, std::abs(left), std::abs(centre)});
  }
  return {zeros && ends && jump < 1e-8 && slope < 1e-8,
          std::string("f_n(c)=0: ") + (zeros ? "yes" : "no") + ", u(0)=1 u(1)=0: " + (ends ? "yes" : "no") +
              ", value jump " + fmt(jump) + ", slope " + fmt(slope)};
}

// ---- 3 ----------------------------------------------------------------------

rmsa::AttentionConfig attention_config(Variant v) {
  rmsa::AttentionConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 4;
  cfg.relation_hidden = 8;
  cfg.variant = v;
  return cfg;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

Outcome reduction_identity() {
  double worst = 0;
  for (Variant v : kRelative) {
    const auto cfg = attention_config(v);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::size_t n = 1 + seed % 6;
      Rng rng(seed);
      ad::ParameterStore store;
      auto p = rmsa::make_attention_params(store, "attn", cfg, rng);
      for (auto& prm : store.parameters())
        for (double& x : prm.tensor.mutable_values()) x = rng.uniform(-0.5, 0.5);
      for (Tensor* t : {&p.phi_k.w2, &p.phi_k.b2, &p.phi_v.w2, &p.phi_v.b2, &p.u, &p.v})
        if (t->defined())
          for (double& x : t->mutable_values()) x = 0.0;
      rmsa::AttentionInput in;
      in.x = testing::random_tensor(rng, {2, n, cfg.d_model}, false);
      in.relation = testing::random_tensor(rng, {2, n, n, cfg.relation_dim}, false);
      worst = std::max(worst, max_abs_diff(rmsa::rmsa_forward(in, p, cfg), rmsa::vanilla_attention(in, p, cfg)));
    }
  }
  double mat = 0;
  auto cfg = attention_config(Variant::mat_baseline);
  cfg.lambda_a = 1;
  cfg.lambda_d = cfg.lambda_g = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 1 + seed % 6;
    Rng rng(100 + seed);
    ad::ParameterStore store;
    const auto p = rmsa::make_attention_params(store, "attn", cfg, rng);
    rmsa::AttentionInput in;
    in.x = testing::random_tensor(rng, {2, n, cfg.d_model}, false);
    rmsa::AttentionTrace tm, tv;
    const auto om = rmsa::mat_attention(in, p, cfg, &tm, false);
    const auto ov = rmsa::vanilla_attention(in, p, cfg, &tv, false);
    mat = std::max({mat, max_abs_diff(om, ov), max_abs_diff(tm.weights, tv.weights)});
  }
  return {worst < 1e-12 && mat < 1e-12, "relative variants vs vanilla max |diff| " + fmt(worst) +
                                            " (4 variants x 20 seeds), mat(1,0,0) vs vanilla " + fmt(mat)};
}

// ---- 4 ----------------------------------------------------------------------

model::ModelConfig desk_model(Variant v = Variant::rmat) {
  model::ModelConfig c;  // 2 layers, d_model 64, 4 heads
  c.variant = v;
  return c;
}

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const ad::GradCheckOptions opt;  // eps 1e-5, tol 1e-4
  double ops = 0, variants = 0, full = 0;
  bool finite = true;
  std::string note;

  const auto oc = testing::primitive_op_cases(11);
  for (const auto& c : oc.cases) {
    const auto rep = ad::grad_check(c.loss, oc.leaves, opt);
    finite = finite && rep.failure.empty();
    ops = std::max(ops, rep.max_rel_error);
  }

  for (Variant v : kVariants) {
    const auto cfg = attention_config(v);
    Rng rng(21);
    ad::ParameterStore store;
    auto p = rmsa::make_attention_params(store, "attn", cfg, rng);
    for (Tensor* t : {&p.u, &p.v})
      if (t->defined())
        for (double& x : t->mutable_values()) x = rng.uniform(-0.5, 0.5);
    rmsa::AttentionInput in;
    const std::size_t n = 4;
    in.x = testing::random_tensor(rng, {2, n, cfg.d_model}, false);
    in.relation = testing::random_tensor(rng, {2, n, n, cfg.relation_dim}, false);
    std::vector<double> adj(2 * n * n, 0.0), dist(2 * n * n);
    for (double& d : dist) d = rng.uniform(0.5, 4);
    adj[1] = adj[4] = 1;
    in.adjacency = &adj;
    in.distances = &dist;
    in.lengths = {n, n};
    const auto w = testing::random_tensor(rng, {2, n, cfg.d_model}, false);
    auto loss = [&] { return ad::sum_all(ad::mul(rmsa::attention(in, p, cfg), w)); };
    const auto rep = ad::grad_check(loss, store.parameters(), opt);
    finite = finite && rep.failure.empty();
    // Without a key term, phi_k.b2 adds the same amount to a whole score row
    // and the softmax cancels it: its true gradient is zero, the relative
    // error is 0/0, and the analytic value is checked against zero instead.
    const bool shift_only = v == Variant::relative_shaw || v == Variant::relative_attentive_bias;
    for (const auto& e : rep.entries) {
      if (shift_only && e.name == "attn.phi_k.b2") continue;
      variants = std::max(variants, e.max_rel_error);
    }
    if (shift_only) {
      store.zero_grad();
      ad::backward(loss());
      double g = 0;
      for (double x : p.phi_k.b2.grad()) g = std::max(g, std::abs(x));
      if (g > 1e-12) variants = std::max(variants, 1.0);
      note = "; phi_k.b2 in shaw/attentive_bias has zero gradient (|g| <= " + fmt(std::max(g, 1e-300)) + ")";
    }
  }

  {
    const auto cfg = desk_model();
    const model::Model m(cfg, {6, false, 4});
    const auto fa = featurize::featurize(molio::parse_smiles("CC(=O)N"), cfg.distance);
    const auto fb = featurize::featurize(molio::parse_smiles("c1ccccc1O"), cfg.distance);
    const auto batch = model::collate({&fa, &fb});
    auto loss = [&] {
      const auto h = m.encode(batch);
      const auto g = m.attention_pool(h, batch);
      auto l = ad::mse_loss(m.predict(g, batch, false, nullptr), {0.4, -0.3});
      l = ad::add(l, ad::cross_entropy(m.context_logits(h, {0, 1, batch.max_n + 2}), {1, 3, 5}));
      return ad::add(l, ad::mse_loss(ad::reshape(m.descriptor_output(g), {8}), {1, 0, -1, 0.5, 0.2, 0, 2, -0.5}));
    };
    const auto rep = ad::grad_check(loss, m.params().parameters(), opt);
    finite = finite && rep.failure.empty();
    full = rep.max_rel_error;
  }
  const double t = seconds_since(t0);
  return {finite && ops < 1e-4 && variants < 1e-4 && full < 1e-4 && t < 120,
          "max rel error: ops " + fmt(ops) + ", variants " + fmt(variants) + ", full model " + fmt(full) + " in " +
              fmt(t) + " s" + note};
}

// ---- 5 ----------------------------------------------------------------------

Outcome symmetry_suite() {
  std::vector<std::unique_ptr<model::Model>> models;
  for (Variant v : kVariants) {
    auto c = desk_model(v);
    c.seed = 5;
    models.push_back(std::make_unique<model::Model>(c));
  }
  Rng rng(2024);
  int equivariant = 0, symmetric = 0;
  double pred = 0, pad = 0;
  const int cases = 200;
  for (int k = 0; k < cases; ++k) {
    const model::Model& m = *models[k % models.size()];
    auto mol = molio::parse_smiles(testing::random_smiles(rng, 1, 14));
    std::vector<molio::Vec3> xyz(mol.size());
    for (auto& p : xyz) p = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    mol.coords = xyz;
    mol = molio::add_dummy_node(mol, m.config().distance.cutoff);
    const std::size_t n = mol.size(), d = m.config().d_model;
    const auto perm = relabeling(n, rng);
    const auto f0 = featurize::featurize(mol, m.config().distance);
    const auto f1 = featurize::featurize(molio::permute_atoms(mol, perm), m.config().distance);

    bool sym = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const auto a = f0.relation.pair(i, j), b = f0.relation.pair(j, i);
        sym = sym && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
      }
    symmetric += sym;

    const auto b0 = model::collate({&f0}), b1 = model::collate({&f1});
    const auto r0 = m.forward(b0), r1 = m.forward(b1);
    bool eq = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) eq = eq && r0.hidden.values()[i * d + c] == r1.hidden.values()[perm[i] * d + c];
    equivariant += eq;
    pred = std::max(pred, std::abs(r0.prediction.item() - r1.prediction.item()));

    const auto other = featurize::featurize(molio::parse_smiles(testing::random_smiles(rng, 1, 14)), m.config().distance);
    const auto padded = m.forward(model::collate({&f0}, n + 1 + rng.below(5))).prediction.item();
    const auto mixed = m.forward(model::collate({&other, &f0})).prediction.values()[1];
    pad = std::max({pad, std::abs(padded - r0.prediction.item()), std::abs(mixed - r0.prediction.item())});
  }
  return {equivariant == cases && symmetric == cases && pred < 1e-10 && pad < 1e-10,
          "encoder bitwise equivariant " + std::to_string(equivariant) + "/" + std::to_string(cases) +
              ", relation bitwise symmetric " + std::to_string(symmetric) + "/" + std::to_string(cases) +
              ", prediction drift " + fmt(pred) + ", padding drift " + fmt(pad)};
}

// ---- 6 and 7 ------------------------------------------------------------------

train::FinetuneData overfit_data() {
  train::FinetuneData d;
  for (const auto& m : testing::synthetic_corpus(16, 42)) {
    d.labels.push_back(static_cast<double>(m.size()));  // heavy-atom count
    d.mols.push_back(featurize::featurize(m, featurize::DistanceConfig{}));
  }
  return d;
}

train::TrainConfig overfit_config() {
  train::TrainConfig t;
  t.epochs = 2000;  // one full batch per epoch
  t.batch_size = 16;
  t.eval_every = 10;
  t.track_train_metric = true;
  t.stop_at_threshold = true;
  t.rmse_threshold = 0.05;
  return t;
}

std::vector<train::Split> all_in_every_split() {
  std::vector<std::size_t> all(16);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return {{all, all, all}};
}

struct OverfitState {
  bool ran = false;
  double lr = 0;
  std::optional<std::size_t> steps;
};

Outcome overfit(OverfitState& st) {
  kernels::set_thread_limit(1);
  const auto t0 = Clock::now();
  const auto splits = all_in_every_split();
  const auto r = train::finetune(overfit_data(), desk_model(), overfit_config(), nullptr, &splits);
  const double t = seconds_since(t0);
  kernels::set_thread_limit(0);
  const auto& sel = r.splits[0].runs[r.splits[0].selected];
  st = {true, sel.lr, sel.steps_to_threshold};
  std::string grid;
  for (const auto& run : r.splits[0].runs)
    grid += " " + fmt(run.lr) + ":" + (run.steps_to_threshold ? std::to_string(*run.steps_to_threshold) : "-");
  return {sel.steps_to_threshold && *sel.steps_to_threshold <= 2000 && t < 300,
          "selected lr " + fmt(sel.lr) + " reached normalized train RMSE < 0.05 at step " +
              (sel.steps_to_threshold ? std::to_string(*sel.steps_to_threshold) : std::string("never")) +
              "; grid in " + fmt(t) + " s; steps per lr" + grid};
}

Outcome pretraining_sanity(const OverfitState& st) {
  const auto corpus = testing::synthetic_corpus(200, 7);
  pretrain::PretrainConfig pc;
  pc.stages = {pretrain::Stage::contextual};
  pc.epochs = 20;
  pc.lr = 1e-3;
  pc.warmup_steps = 100;
  pc.batch_size = 32;
  pc.seed = 0;
  const auto pr = pretrain::pretrain_run(corpus, desk_model(), pc);
  const auto& log = pr.stages[0];
  const std::size_t per_epoch = log.step_losses.size() / pc.epochs;
  const double first = std::accumulate(log.step_losses.begin(), log.step_losses.begin() + per_epoch, 0.0) / per_epoch;
  // trailing one-epoch moving average at the end of training
  const double last = std::accumulate(log.step_losses.end() - per_epoch, log.step_losses.end(), 0.0) / per_epoch;
  const double drop = 1 - last / first;

  if (!st.ran || !st.steps) return {false, "loss drop " + fmt(100 * drop) + "%; no from-scratch reference from criterion 6"};
  auto tc = overfit_config();
  tc.lr_grid = {st.lr};
  const auto splits = all_in_every_split();
  const auto init = model::make_checkpoint(*pr.model, "", "");
  const auto ft = train::finetune(overfit_data(), desk_model(), tc, &init, &splits);
  const auto steps = ft.splits[0].runs[0].steps_to_threshold;
  return {drop >= 0.5 && steps && *steps <= *st.steps,
          "smoothed contextual loss " + fmt(first) + " -> " + fmt(last) + " (-" + fmt(100 * drop) +
              "%) over 20 epochs; fine-tune at lr " + fmt(st.lr) + " reaches threshold at step " +
              (steps ? std::to_string(*steps) : std::string("never")) + " vs " + std::to_string(*st.steps) +
              " from scratch"};
}

// ---- 8 ----------------------------------------------------------------------

Outcome protocol_fidelity() {
  const std::vector<double> want{1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6};
  const bool grid = train::default_lr_grid() == want;
  const std::size_t warmup = 300;
  std::size_t peak_at = 0;
  double peak = 0;
  for (std::size_t s = 1; s <= 3000; ++s) {
    const double lr = train::noam_lr(s, 64, warmup, 1.0);
    if (lr > peak) peak = lr, peak_at = s;
  }
  const auto label = pretrain::context_label(molio::parse_smiles("N=CO"), 1);
  return {grid && peak_at == warmup && label == "C_N-DOUBLE1_O-SINGLE1",
          std::string("lr grid ") + (grid ? "= 7 values" : "differs") + ", Noam peak at step " +
              std::to_string(peak_at) + " (warmup " + std::to_string(warmup) + "), context label " + label};
}

// ---- 9 ----------------------------------------------------------------------

Outcome attention_dump() {
  const auto dir = scratch_dir("dump");
  const std::vector<std::string> smiles{"CCO", "c1ccccc1C(=O)N", "C", "OCC(N)C(=O)O", "ClC(Br)=C"};
  {
    std::ofstream f(dir / "mols.smi");
    for (const auto& s : smiles) f << s << "\n";
    std::ofstream c(dir / "small.cfg");
    c << "n_layers = 3\nn_heads = 2\nd_model = 16\nseed = 4\n";
  }
  const int rc = run_cli("attention-dump \"" + (dir / "mols.smi").string() + "\" --format smiles --config \"" +
                             (dir / "small.cfg").string() + "\" --layer 0 --layer 2 --out \"" + (dir / "out").string() + "\"",
                         dir / "log.txt");
  if (rc != 0) return {false, "attention-dump exited with " + std::to_string(rc)};
  std::size_t files = 0, bad_shape = 0;
  double worst = 0;
  for (std::size_t k = 0; k < smiles.size(); ++k) {
    const std::size_t n = molio::parse_smiles(smiles[k]).size() + 1;
    for (const std::size_t layer : {0, 1, 2})
      for (std::size_t h = 0; h < 2; ++h) {
        const auto p = dir / "out" / ("mol" + std::to_string(k) + "_layer" + std::to_string(layer) + "_head" +
                                      std::to_string(h) + ".csv");
        if (layer == 1) {
          if (fs::exists(p)) ++bad_shape;  // layer 1 was not requested
          continue;
        }
        if (!fs::exists(p)) {
          ++bad_shape;
          continue;
        }
        ++files;
        std::ifstream in(p);
        std::string line;
        std::getline(in, line);  // header
        std::size_t rows = 0;
        while (std::getline(in, line)) {
          std::stringstream ss(line);
          std::string cell;
          std::getline(ss, cell, ',');  // row label
          std::size_t cols = 0;
          double sum = 0;
          while (std::getline(ss, cell, ',')) sum += std::strtod(cell.c_str(), nullptr), ++cols;
          if (cols != n) ++bad_shape;
          worst = std::max(worst, std::abs(sum - 1));
          ++rows;
        }
        if (rows != n) ++bad_shape;
      }
  }
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out"))
    csvs += e.path().extension() == ".csv" && e.path().filename().string().find("_layer") != std::string::npos;
  const std::size_t want = smiles.size() * 2 * 2;
  return {files == want && csvs == want && bad_shape == 0 && worst < 1e-12,
          std::to_string(files) + "/" + std::to_string(want) + " per-head files of (n+1)x(n+1), " +
              std::to_string(bad_shape) + " shape problems, max |row sum - 1| " + fmt(worst)};
}

// ---- 10 ---------------------------------------------------------------------

Outcome determinism() {
  const auto dir = scratch_dir("determinism");
  {
    std::ofstream f(dir / "data.csv");
    f << "smiles,y\n";
    Rng rng(8);
    for (int i = 0; i < 24; ++i) {
      const auto s = testing::random_smiles(rng, 2, 9);
      f << s << "," << molio::parse_smiles(s).size() * 0.5 + rng.uniform() << "\n";
    }
    std::ofstream c(dir / "run.cfg");
    c << "n_layers = 2\nn_heads = 2\nd_model = 16\nepochs = 4\nbatch_size = 8\nlr_grid = 1e-3, 1e-4\nn_splits = 2\n";
  }
  std::string out[2];
  for (int k = 0; k < 2; ++k) {
    const auto od = dir / ("run" + std::to_string(k));
    const int rc = run_cli("finetune \"" + (dir / "data.csv").string() + "\" --config \"" + (dir / "run.cfg").string() +
                               "\" --seed 3 --out \"" + od.string() + "\"",
                           dir / ("log" + std::to_string(k) + ".txt"));
    if (rc != 0) return {false, "finetune exited with " + std::to_string(rc)};
    out[k] = slurp(od / "result.json");
  }
  return {!out[0].empty() && out[0] == out[1],
          "result.json " + std::to_string(out[0].size()) + " bytes, " + (out[0] == out[1] ? "identical" : "different") +
              " across two runs"};
}

}  // namespace

int main() {
  OverfitState overfit_state;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"featurization fixtures", featurization_fixtures},
      {"distance embedding boundary", distance_boundary},
      {"reduction identity", reduction_identity},
      {"gradient integrity", gradient_integrity},
      {"symmetry suite", symmetry_suite},
      {"overfit capability", [&] { return overfit(overfit_state); }},
      {"pretraining sanity", [&] { return pretraining_sanity(overfit_state); }},
      {"protocol fidelity", protocol_fidelity},
      {"attention dump shape", attention_dump},
      {"determinism", determinism},
  };
  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    passed += o.pass;
    std::cout << "criterion " << i + 1 << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  std::cout << passed << "/" << criteria.size() << " criteria passed" << std::endl;
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
