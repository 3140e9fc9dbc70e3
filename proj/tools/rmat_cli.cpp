#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "rmat/config.hpp"
#include "rmat/error.hpp"
#include "rmat/featurize.hpp"
#include "rmat/kernels.hpp"
#include "rmat/log.hpp"
#include "rmat/model.hpp"
#include "rmat/molio.hpp"
#include "rmat/pretrain.hpp"
#include "rmat/train.hpp"

namespace fs = std::filesystem;
using namespace rmat;

namespace {

struct Options {
  std::string input;
  std::string config_path;
  std::string out = "out";
  std::string format;
  std::string checkpoint;
  std::string splits;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::vector<int> layers;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// Collects written files so the manifest can hash them.
class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& bytes) {
    const fs::path p = fs::path(dir_) / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << bytes;
    files_[name] = hex(fnv1a(bytes));
  }

  void record_existing(const std::string& name) { files_[name] = hex(fnv1a(read_file((fs::path(dir_) / name).string()))); }
  const std::string& dir() const { return dir_; }
  const std::map<std::string, std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::map<std::string, std::string> files_;
};

void write_manifest(Outputs& out, const std::string& command, const Options& o, std::uint64_t seed,
                    const std::vector<std::string>& inputs, double wall_seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = o.config_path;
  j["seed"] = seed;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& p : inputs)
    if (!p.empty()) in[p] = hex(fnv1a(read_file(p)));
  j["inputs"] = in;
  j["outputs"] = out.files();
  j["wall_time_s"] = wall_seconds;
  std::ofstream f(fs::path(out.dir()) / "manifest.json");
  f << j.dump(2) << "\n";
}

config::RunConfig load_config(const Options& o) {
  config::RunConfig cfg = o.config_path.empty() ? config::parse("") : config::load(o.config_path);
  if (o.seed) cfg.set_seed(*o.seed);
  if (!o.variant.empty()) {
    try {
      cfg.model.variant = rmsa::variant_from_string(o.variant);
    } catch (const std::invalid_argument& e) {
      throw config::ConfigError(e.what());
    }
  }
  return cfg;
}

std::string detect_format(const Options& o) {
  if (!o.format.empty()) return o.format;
  const std::string ext = fs::path(o.input).extension().string();
  if (ext == ".sdf" || ext == ".mol") return "sdf";
  if (ext == ".csv") return "csv";
  return "smiles";
}

struct MoleculeSet {
  std::vector<molio::Molecule> mols;
  std::vector<std::string> errors;
  std::size_t records = 0;
};

MoleculeSet read_molecules(const Options& o) {
  MoleculeSet s;
  const std::string fmt = detect_format(o);
  if (fmt == "sdf") {
    auto r = molio::parse_sdf(read_file(o.input));
    for (const auto& w : r.warnings) warn(w);
    for (const auto& e : r.errors)
      s.errors.push_back("record " + std::to_string(e.record) + " line " + std::to_string(e.line) + ": " + e.message);
    s.records = r.molecules.size() + r.errors.size();
    s.mols = std::move(r.molecules);
  } else if (fmt == "smiles") {
    std::istringstream in(read_file(o.input));
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      std::istringstream ls(line);
      std::string smi, name;
      if (!(ls >> smi) || smi[0] == '#') continue;
      ls >> name;
      ++s.records;
      try {
        auto m = molio::parse_smiles(smi);
        m.name = name;
        s.mols.push_back(std::move(m));
      } catch (const DataError& e) {
        s.errors.push_back("line " + std::to_string(no) + ": " + e.what());
      }
    }
  } else if (fmt == "csv") {
    auto d = molio::read_dataset_csv(o.input);
    for (const auto& e : d.errors) s.errors.push_back("row " + std::to_string(e.line) + ": " + e.message);
    s.records = d.rows.size() + d.errors.size();
    for (auto& r : d.rows) s.mols.push_back(std::move(r.molecule));
  } else {
    throw config::ConfigError("unknown --format '" + fmt + "' (sdf, smiles, csv)");
  }
  return s;
}

std::string error_log(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += e + "\n";
  return out;
}

// ---- dataset helpers -------------------------------------------------------

train::FinetuneData load_dataset(const std::string& path, const config::RunConfig& cfg, std::vector<std::string>* errors) {
  const auto ds = molio::read_dataset_csv(path);
  for (const auto& e : ds.errors) {
    const std::string msg = "row " + std::to_string(e.line) + ": " + e.message;
    warn(msg);
    if (errors) errors->push_back(msg);
  }
  if (ds.label_names.empty()) throw DataError(path + ": no label column");
  std::size_t col = 0;
  if (!cfg.train.target_column.empty()) {
    auto it = std::find(ds.label_names.begin(), ds.label_names.end(), cfg.train.target_column);
    if (it == ds.label_names.end()) throw DataError(path + ": no column '" + cfg.train.target_column + "'");
    col = static_cast<std::size_t>(it - ds.label_names.begin());
  }
  const std::size_t e = cfg.model.extra_feature_dim;
  if (e && e != ds.extra_names.size())
    throw DataError("extra_feature_dim = " + std::to_string(e) + " but the dataset has " +
                    std::to_string(ds.extra_names.size()) + " extra_ columns");
  std::vector<molio::Molecule> mols;
  train::FinetuneData data;
  for (const auto& row : ds.rows) {
    if (!row.labels[col]) continue;
    mols.push_back(row.molecule);
    data.labels.push_back(*row.labels[col]);
    if (e) data.extra.push_back(row.extra);
  }
  if (mols.empty()) throw DataError(path + ": no labelled molecules");
  data.mols = featurize::featurize_all(mols, cfg.model.distance);
  return data;
}

std::vector<train::Split> load_splits(const std::string& path, std::size_t n) {
  train::Split s;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string name = line.substr(0, colon);
    std::vector<std::size_t>* dst = name == "train" ? &s.train : name == "valid" ? &s.valid : name == "test" ? &s.test : nullptr;
    if (!dst) throw DataError(path + ": unknown split '" + name + "'");
    std::istringstream ls(line.substr(colon + 1));
    std::size_t i;
    while (ls >> i) {
      if (i >= n) throw DataError(path + ": index " + std::to_string(i) + " out of range");
      dst->push_back(i);
    }
  }
  return {s};
}

// ---- commands --------------------------------------------------------------

int cmd_featurize(const Options& o) {
  const auto cfg = load_config(o);
  Outputs out(o.out);
  const auto set = read_molecules(o);
  std::vector<std::string> errors = set.errors;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < set.mols.size(); ++i) {
    try {
      const auto fm = featurize::featurize(set.mols[i], cfg.model.distance);
      out.write("mol_" + std::to_string(i) + ".csv", featurize::dump_csv(fm));
      ++ok;
    } catch (const DataError& e) {
      errors.push_back("molecule " + std::to_string(i) + ": " + e.what());
    }
  }
  out.write("errors.log", error_log(errors));
  if (set.records == 0) warn("no molecules in " + o.input);
  write_manifest(out, "featurize", o, cfg.train.seed, {o.input, o.config_path}, 0);
  for (const auto& e : errors) warn(e);
  return ok == 0 && set.records > 0 ? 2 : 0;
}

int cmd_pretrain(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(o);
  const auto set = read_molecules(o);
  for (const auto& e : set.errors) warn(e);
  Outputs out(o.out);
  const std::string echo = config::echo(cfg);
  auto result = pretrain::pretrain_run(set.mols, cfg.model, cfg.pretrain, o.out, echo);
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : result.stages) {
    log.push_back({{"stage", std::string(pretrain::to_string(s.stage))},
                   {"epoch_train_loss", s.epoch_train_loss},
                   {"epoch_valid_loss", s.epoch_valid_loss},
                   {"checkpoint", fs::path(s.checkpoint_path).filename().string()}});
    out.record_existing(fs::path(s.checkpoint_path).filename().string());
  }
  if (!result.vocab.labels().empty()) out.record_existing("vocab.txt");
  if (!result.stats.names.empty()) out.record_existing("descriptor_stats.txt");
  out.write("pretrain_log.json", nlohmann::json{{"config", echo}, {"stages", log}}.dump(2) + "\n");
  out.write("errors.log", error_log(set.errors));
  write_manifest(out, "pretrain", o, cfg.train.seed, {o.input, o.config_path},
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

void run_finetune(const Options& o, const config::RunConfig& cfg, Outputs& out, const std::string& prefix) {
  std::vector<std::string> errors;
  const auto data = load_dataset(o.input, cfg, &errors);
  std::optional<ad::Checkpoint> init;
  if (!o.checkpoint.empty()) {
    if (!fs::exists(o.checkpoint)) throw DataError("checkpoint not found: " + o.checkpoint);
    init = ad::load_checkpoint(o.checkpoint);
  }
  std::vector<train::Split> splits;
  if (!o.splits.empty()) splits = load_splits(o.splits, data.mols.size());
  const std::string echo = config::echo(cfg);
  const auto result = train::finetune(data, cfg.model, cfg.train, init ? &*init : nullptr,
                                      splits.empty() ? nullptr : &splits, echo);
  out.write(prefix + "result.json", train::result_json(result, echo));
  out.write(prefix + "summary.csv", train::summary_csv(result));
  out.write(prefix + "model.ckpt", ad::serialize_checkpoint(result.checkpoint));
  out.write(prefix + "errors.log", error_log(errors));
}

int cmd_finetune(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = load_config(o);
  Outputs out(o.out);
  run_finetune(o, cfg, out, "");
  write_manifest(out, "finetune", o, cfg.train.seed, {o.input, o.config_path, o.checkpoint, o.splits},
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

std::map<std::string, std::string> parse_meta(const std::string& meta) {
  std::map<std::string, std::string> out;
  std::istringstream in(meta);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct LoadedModel {
  config::RunConfig cfg;
  std::unique_ptr<model::Model> model;
  train::LabelNormalizer norm;
};

LoadedModel load_model(const Options& o) {
  LoadedModel lm;
  if (o.checkpoint.empty()) {
    lm.cfg = load_config(o);
    lm.model = std::make_unique<model::Model>(lm.cfg.model);
    return lm;
  }
  if (!fs::exists(o.checkpoint)) throw DataError("checkpoint not found: " + o.checkpoint);
  const auto ck = ad::load_checkpoint(o.checkpoint);
  lm.cfg = config::parse(ck.config);
  if (!o.config_path.empty()) {
    const auto user = config::load(o.config_path);
    if (config::echo(user) != ck.config)
      warn("--config differs from the checkpoint's config; the checkpoint's architecture is used");
    lm.cfg.train = user.train;
  }
  lm.model = std::make_unique<model::Model>(lm.cfg.model);
  model::load_parameters(*lm.model, ck, false);
  const auto meta = parse_meta(ck.meta);
  if (meta.count("label_mean")) lm.norm.mean = std::stod(meta.at("label_mean"));
  if (meta.count("label_std")) lm.norm.std = std::stod(meta.at("label_std"));
  return lm;
}

int cmd_evaluate(const Options& o) {
  if (o.checkpoint.empty()) throw config::ConfigError("evaluate needs --checkpoint");
  auto lm = load_model(o);
  Outputs out(o.out);
  std::vector<std::string> errors;
  const auto data = load_dataset(o.input, lm.cfg, &errors);
  std::vector<std::size_t> idx(data.mols.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto pred = train::predict_all(*lm.model, data, idx, lm.norm);
  nlohmann::json j;
  j["n"] = pred.size();
  if (lm.cfg.model.task == model::Task::regression) {
    j["rmse"] = train::rmse(pred, data.labels);
    j["mae"] = train::mae(pred, data.labels);
  } else {
    j["auc"] = train::roc_auc(pred, data.labels);
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "index,label,prediction\n";
  for (std::size_t i = 0; i < pred.size(); ++i) csv << i << "," << data.labels[i] << "," << pred[i] << "\n";
  out.write("metrics.json", j.dump(2) + "\n");
  out.write("predictions.csv", csv.str());
  out.write("errors.log", error_log(errors));
  write_manifest(out, "evaluate", o, lm.cfg.train.seed, {o.input, o.checkpoint, o.config_path}, 0);
  return 0;
}

int cmd_attention_dump(const Options& o) {
  auto lm = load_model(o);
  const auto set = read_molecules(o);
  for (const auto& e : set.errors) warn(e);
  if (set.mols.empty()) throw DataError("no molecules to dump");
  Outputs out(o.out);
  const std::size_t n_layers = lm.cfg.model.n_layers;
  std::vector<std::size_t> layers;
  if (o.layers.empty())
    for (std::size_t l = 0; l < n_layers; ++l) layers.push_back(l);
  for (int l : o.layers) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_layers)
      throw config::ConfigError("--layer " + std::to_string(l) + " outside 0.." + std::to_string(n_layers - 1));
    layers.push_back(static_cast<std::size_t>(l));
  }
  for (std::size_t m = 0; m < set.mols.size(); ++m) {
    const auto mol = set.mols[m].has_dummy() ? set.mols[m] : molio::add_dummy_node(set.mols[m], lm.cfg.model.distance.cutoff);
    const auto fm = featurize::featurize(mol, lm.cfg.model.distance);
    const auto batch = model::collate({&fm});
    model::ForwardOptions fo;
    fo.record_attention = true;
    const auto r = lm.model->forward(batch, fo);
    const std::size_t n = fm.n;
    std::string atoms = "index,symbol\n";
    std::string header = "atom";
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = mol.atoms[j];
      const std::string sym = a.element == molio::Element::Other ? a.symbol : std::string(molio::element_symbol(a.element));
      atoms += std::to_string(j) + "," + sym + "\n";
      header += "," + std::to_string(j);
    }
    const std::string base = "mol" + std::to_string(m);
    out.write(base + "_atoms.csv", atoms);
    for (std::size_t l : layers) {
      const auto& w = r.attention[l];
      const std::size_t heads = w.dim(1);
      for (std::size_t h = 0; h < heads; ++h) {
        std::string csv = header + "\n";
        for (std::size_t i = 0; i < n; ++i) {
          csv += std::to_string(i);
          for (std::size_t j = 0; j < n; ++j) {
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof buf, w.values()[((h * n) + i) * n + j]);
            csv += ",";
            csv.append(buf, res.ptr);
          }
          csv += "\n";
        }
        out.write(base + "_layer" + std::to_string(l) + "_head" + std::to_string(h) + ".csv", csv);
      }
    }
  }
  write_manifest(out, "attention-dump", o, lm.cfg.train.seed, {o.input, o.checkpoint, o.config_path}, 0);
  return 0;
}

int cmd_gridsearch(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  if (o.config_path.empty()) throw config::ConfigError("gridsearch needs --config with a config matrix");
  const auto points = config::expand_matrix(read_file(o.config_path));
  Outputs out(o.out);
  std::ostringstream csv;
  csv.precision(17);
  csv << "run,selected_lr,metric,test_mean,test_std,config\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    auto cfg = config::parse(points[k]);
    if (o.seed) cfg.set_seed(*o.seed);
    if (!o.variant.empty()) cfg.model.variant = rmsa::variant_from_string(o.variant);
    const std::string prefix = "run_" + std::to_string(k) + "/";
    run_finetune(o, cfg, out, prefix);
    const auto res = nlohmann::json::parse(read_file((fs::path(o.out) / (prefix + "result.json")).string()));
    std::string flat = points[k];
    std::replace(flat.begin(), flat.end(), '\n', ';');
    csv << k << "," << res["splits"][0]["selected_lr"].get<double>() << "," << res["metric"].get<std::string>()
        << "," << res["test_mean"].get<double>() << "," << res["test_std"].get<double>() << ",\"" << flat << "\"\n";
  }
  out.write("gridsearch.csv", csv.str());
  write_manifest(out, "gridsearch", o, o.seed.value_or(0), {o.input, o.config_path, o.checkpoint, o.splits},
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("RMAT_THREADS")) kernels::set_thread_limit(std::atoi(t));

  CLI::App app{"rmat: relative molecule self-attention toolkit"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub, bool needs_input) {
    auto* in = sub->add_option("input", o.input, "input file");
    if (needs_input) in->required()->check(CLI::ExistingFile);
    sub->add_option("--config", o.config_path, "config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) { o.seed = seed; });
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--format", o.format, "input format")->check(CLI::IsMember({"sdf", "smiles", "csv"}));
    sub->add_option("--variant", o.variant, "attention variant override");
  };

  auto* feat = app.add_subcommand("featurize", "dump atom features and relation tensors");
  common(feat, true);
  auto* pre = app.add_subcommand("pretrain", "pretrain an encoder on a molecule corpus");
  common(pre, true);
  auto* fine = app.add_subcommand("finetune", "fine-tune over the learning-rate grid");
  common(fine, true);
  fine->add_option("--checkpoint", o.checkpoint, "initial weights");
  fine->add_option("--splits", o.splits, "explicit split file (train:/valid:/test: index lines)");
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  common(eval, true);
  eval->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  auto* dump = app.add_subcommand("attention-dump", "write per-head attention matrices");
  common(dump, true);
  dump->add_option("--checkpoint", o.checkpoint, "model checkpoint (default: seeded initialization)");
  dump->add_option("--layer", o.layers, "layer index, repeatable (default: all)");
  auto* grid = app.add_subcommand("gridsearch", "fine-tune every point of a config matrix");
  common(grid, true);
  grid->add_option("--checkpoint", o.checkpoint, "initial weights");
  grid->add_option("--splits", o.splits, "explicit split file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*feat) return cmd_featurize(o);
    if (*pre) return cmd_pretrain(o);
    if (*fine) return cmd_finetune(o);
    if (*eval) return cmd_evaluate(o);
    if (*dump) return cmd_attention_dump(o);
    if (*grid) return cmd_gridsearch(o);
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const train::UndefinedMetric& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
