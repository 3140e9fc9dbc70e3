#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmat/model.hpp"
#include "rmat/pretrain.hpp"
#include "rmat/train.hpp"

namespace rmat::config {

// Malformed config text, unknown keys, bad values. CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  pretrain::PretrainConfig pretrain;

  // Sets the seed of every sub-config.
  void set_seed(std::uint64_t seed);
};

struct KeyInfo {
  std::string_view key;
  std::string_view doc;
};

// Every accepted key, in echo order.
std::vector<KeyInfo> keys();

// Flat "key = value" lines; '#' starts a comment. Keys not listed are
// applied on top of the defaults; unknown or repeated keys are errors.
RunConfig parse(std::string_view text);
RunConfig load(const std::string& path);

// All keys with their effective values, one per line, in schema order.
std::string echo(const RunConfig& cfg);

// Expands "key = a | b | c" alternatives into the Cartesian product of
// single-valued config texts (later keys vary fastest).
std::vector<std::string> expand_matrix(std::string_view text);

}  // namespace rmat::config
