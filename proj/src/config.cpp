#include "rmat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rmat::config {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

double to_double(const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

template <class F>
auto wrap_enum(F f, const std::string& v) {
  try {
    return f(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

struct Entry {
  std::string_view key;
  std::string_view doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(name, field, doc)                                                   \
  Entry {                                                                            \
    name, doc, [](RunConfig& c, const std::string& v) { c.field = to_size(v); },     \
        [](const RunConfig& c) { return std::to_string(c.field); }                   \
  }
#define DOUBLE_KEY(name, field, doc)                                                 \
  Entry {                                                                            \
    name, doc, [](RunConfig& c, const std::string& v) { c.field = to_double(v); },   \
        [](const RunConfig& c) { return fmt(c.field); }                              \
  }
#define BOOL_KEY(name, field, doc)                                                   \
  Entry {                                                                            \
    name, doc, [](RunConfig& c, const std::string& v) { c.field = to_bool(v); },     \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }   \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> t = {
      SIZE_KEY("n_layers", model.n_layers, "encoder blocks"),
      SIZE_KEY("n_heads", model.n_heads, "attention heads per block"),
      SIZE_KEY("d_model", model.d_model, "embedding width"),
      SIZE_KEY("relation_hidden", model.relation_hidden, "hidden width of the relation networks"),
      SIZE_KEY("ffn_hidden", model.ffn_hidden, "feed-forward width, 0 for 2*d_model"),
      SIZE_KEY("pool_heads", model.pool_heads, "pooling heads S"),
      SIZE_KEY("pool_hidden", model.pool_hidden, "pooling hidden width P"),
      SIZE_KEY("mlp_hidden", model.mlp_hidden, "prediction MLP width"),
      DOUBLE_KEY("mlp_dropout", model.mlp_dropout, "dropout inside the prediction MLP"),
      Entry{"variant", "vanilla | mat_baseline | rmat | relative_shaw | relative_attentive_bias | relative_improved",
            [](RunConfig& c, const std::string& v) { c.model.variant = wrap_enum(rmsa::variant_from_string, v); },
            [](const RunConfig& c) { return std::string(rmsa::to_string(c.model.variant)); }},
      DOUBLE_KEY("mat_lambda_a", model.mat_lambda_a, "mat_baseline attention weight"),
      DOUBLE_KEY("mat_lambda_d", model.mat_lambda_d, "mat_baseline distance weight"),
      DOUBLE_KEY("mat_lambda_g", model.mat_lambda_g, "mat_baseline adjacency weight"),
      Entry{"mat_distance_g", "softmax | exp_neg",
            [](RunConfig& c, const std::string& v) {
              c.model.mat_distance_g = wrap_enum(rmsa::distance_kernel_from_string, v);
            },
            [](const RunConfig& c) { return std::string(rmsa::to_string(c.model.mat_distance_g)); }},
      DOUBLE_KEY("cutoff", model.distance.cutoff, "distance cutoff in Angstrom"),
      Entry{"n_emb", "distance embedding size",
            [](RunConfig& c, const std::string& v) { c.model.distance.n_emb = static_cast<int>(to_size(v)); },
            [](const RunConfig& c) { return std::to_string(c.model.distance.n_emb); }},
      Entry{"envelope_p", "envelope exponent",
            [](RunConfig& c, const std::string& v) { c.model.distance.envelope_p = static_cast<int>(to_size(v)); },
            [](const RunConfig& c) { return std::to_string(c.model.distance.envelope_p); }},
      Entry{"distance_encoding", "radial_envelope | radial_plain | gaussian_schnet",
            [](RunConfig& c, const std::string& v) {
              c.model.distance.encoding = wrap_enum(featurize::distance_encoding_from_string, v);
            },
            [](const RunConfig& c) { return std::string(featurize::to_string(c.model.distance.encoding)); }},
      SIZE_KEY("extra_feature_dim", model.extra_feature_dim, "number of extra_* dataset columns fed to the MLP"),
      Entry{"task", "regression | binary_classification",
            [](RunConfig& c, const std::string& v) { c.model.task = wrap_enum(model::task_from_string, v); },
            [](const RunConfig& c) { return std::string(model::to_string(c.model.task)); }},
      Entry{"seed", "seed for initialization, splits, shuffling and masking",
            [](RunConfig& c, const std::string& v) { c.set_seed(to_u64(v)); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      SIZE_KEY("epochs", train.epochs, "fine-tuning epochs"),
      SIZE_KEY("batch_size", train.batch_size, "fine-tuning batch size"),
      DOUBLE_KEY("warmup_fraction", train.warmup_fraction, "share of steps spent warming up"),
      Entry{"lr_grid", "comma-separated peak learning rates",
            [](RunConfig& c, const std::string& v) {
              c.train.lr_grid.clear();
              for (const auto& x : split(v, ',')) c.train.lr_grid.push_back(to_double(x));
            },
            [](const RunConfig& c) { return fmt_list(c.train.lr_grid); }},
      BOOL_KEY("normalize_labels", train.normalize_labels, "z-score regression labels"),
      SIZE_KEY("n_splits", train.n_splits, "repeated random splits"),
      DOUBLE_KEY("split_train", train.split_ratios[0], "train share of random splits"),
      DOUBLE_KEY("split_valid", train.split_ratios[1], "validation share"),
      DOUBLE_KEY("split_test", train.split_ratios[2], "test share"),
      SIZE_KEY("max_steps", train.max_steps, "cap on optimizer steps, 0 for none"),
      Entry{"metric", "rmse | mae | auc | default",
            [](RunConfig& c, const std::string& v) {
              if (v == "default") c.train.metric.reset();
              else c.train.metric = wrap_enum(train::metric_from_string, v);
            },
            [](const RunConfig& c) {
              return c.train.metric ? std::string(train::to_string(*c.train.metric)) : std::string("default");
            }},
      Entry{"target_column", "label column to fit; empty for the first",
            [](RunConfig& c, const std::string& v) { c.train.target_column = v; },
            [](const RunConfig& c) { return c.train.target_column; }},
      BOOL_KEY("parallel_grid", train.parallel_grid, "train grid points concurrently"),
      BOOL_KEY("track_train_metric", train.track_train_metric, "record the train-split metric each evaluation"),
      DOUBLE_KEY("rmse_threshold", train.rmse_threshold, "normalized train RMSE for steps-to-threshold"),
      SIZE_KEY("eval_every", train.eval_every, "epochs between evaluations"),
      BOOL_KEY("stop_at_threshold", train.stop_at_threshold, "end a run once the RMSE threshold is reached"),
      Entry{"stages", "comma-separated pretraining stages: masking, contextual, descriptors",
            [](RunConfig& c, const std::string& v) {
              c.pretrain.stages.clear();
              for (const auto& x : split(v, ','))
                c.pretrain.stages.push_back(wrap_enum(pretrain::stage_from_string, x));
            },
            [](const RunConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.pretrain.stages.size(); ++i)
                out += (i ? ", " : "") + std::string(pretrain::to_string(c.pretrain.stages[i]));
              return out;
            }},
      DOUBLE_KEY("mask_rate", pretrain.mask_rate, "share of atoms chosen as masking centers"),
      SIZE_KEY("pretrain_epochs", pretrain.epochs, "epochs per pretraining stage"),
      DOUBLE_KEY("pretrain_lr", pretrain.lr, "peak pretraining learning rate"),
      SIZE_KEY("pretrain_warmup_steps", pretrain.warmup_steps, "pretraining warmup steps"),
      SIZE_KEY("pretrain_batch_size", pretrain.batch_size, "pretraining batch size"),
      DOUBLE_KEY("validation_fraction", pretrain.validation_fraction, "pretraining validation share"),
  };
  return t;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

struct Line {
  std::size_t number;
  std::string key;
  std::string value;
};

std::vector<Line> lines_of(std::string_view text) {
  std::vector<Line> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t no = 0;
  while (std::getline(in, raw)) {
    ++no;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected 'key = value'");
    out.push_back({no, trim(body.substr(0, eq)), trim(body.substr(eq + 1))});
  }
  return out;
}

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
  pretrain.seed = seed;
}

std::vector<KeyInfo> keys() {
  std::vector<KeyInfo> out;
  for (const auto& e : table()) out.push_back({e.key, e.doc});
  return out;
}

RunConfig parse(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  for (const auto& l : lines_of(text)) {
    const Entry* entry = nullptr;
    for (const auto& e : table())
      if (e.key == l.key) entry = &e;
    if (!entry) throw ConfigError("config line " + std::to_string(l.number) + ": unknown key '" + l.key + "'");
    if (!seen.insert(l.key).second)
      throw ConfigError("config line " + std::to_string(l.number) + ": key '" + l.key + "' repeated");
    try {
      entry->set(cfg, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(l.number) + " (" + l.key + "): " + e.what());
    }
  }
  try {
    cfg.model.check();
    cfg.train.check();
    cfg.pretrain.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string echo(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : table()) out += std::string(e.key) + " = " + e.get(cfg) + "\n";
  return out;
}

std::vector<std::string> expand_matrix(std::string_view text) {
  const auto lines = lines_of(text);
  std::vector<std::vector<std::string>> options;
  for (const auto& l : lines) options.push_back(split(l.value, '|'));
  std::vector<std::string> out;
  std::vector<std::size_t> pick(lines.size(), 0);
  while (true) {
    std::string cfg;
    for (std::size_t i = 0; i < lines.size(); ++i) cfg += lines[i].key + " = " + options[i][pick[i]] + "\n";
    out.push_back(cfg);
    std::size_t k = lines.size();
    while (k > 0) {
      --k;
      if (++pick[k] < options[k].size()) break;
      pick[k] = 0;
      if (k == 0) return out;
    }
    if (lines.empty()) return out;
  }
}

}  // namespace rmat::config
