#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rmat/autodiff.hpp"

namespace rmat::testing {

inline ad::Tensor random_tensor(Rng& rng, ad::Shape shape, bool grad = true) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = rng.uniform(-1, 1);
  return ad::Tensor::from(std::move(shape), std::move(v), grad);
}

// Contracts an op output against fixed random weights so every output
// element carries a distinct gradient.
inline ad::Tensor probe(const ad::Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum_all(ad::mul(y, random_tensor(rng, y.shape(), false)));
}

struct OpCase {
  std::string name;
  std::function<ad::Tensor()> loss;
};

// One scalar loss per primitive op, all over the same leaf tensors.
struct OpCases {
  std::vector<ad::Parameter> leaves;
  std::vector<OpCase> cases;
};

inline OpCases primitive_op_cases(std::uint64_t seed) {
  Rng rng(seed);
  auto a = random_tensor(rng, {2, 3, 4});
  auto b = random_tensor(rng, {2, 4, 5});
  auto w = random_tensor(rng, {4, 5});
  auto row = random_tensor(rng, {4});
  auto s = random_tensor(rng, {2, 3, 4});
  auto x = random_tensor(rng, {2, 2, 3, 4});      // (B, H, N, dk)
  auto att = random_tensor(rng, {2, 2, 3, 3});    // (B, H, N, N)
  auto table = random_tensor(rng, {5, 8});        // (U, H*dk)
  auto idx = std::make_shared<std::vector<std::size_t>>();
  for (std::size_t k = 0; k < 2 * 3 * 3; ++k) idx->push_back(rng.below(5));
  OpCases oc;
  oc.leaves = {{"a", a}, {"b", b}, {"w", w}, {"row", row}, {"s", s}, {"x", x}, {"att", att}, {"table", table}};
  oc.cases = {
      {"matmul", [=] { return probe(ad::matmul(a, b), 1); }},
      {"matmul 2d", [=] { return probe(ad::matmul(a, w), 2); }},
      {"add broadcast", [=] { return probe(ad::add(a, row), 3); }},
      {"sub", [=] { return probe(ad::sub(a, s), 4); }},
      {"mul", [=] { return probe(ad::mul(a, s), 5); }},
      {"mul broadcast", [=] { return probe(ad::mul(a, row), 6); }},
      {"scalars", [=] { return probe(ad::add_scalar(ad::mul_scalar(a, 1.7), 0.3), 7); }},
      {"concat", [=] { return probe(ad::concat({a, s}), 8); }},
      {"slice", [=] { return probe(ad::slice(a, 1, 3), 9); }},
      {"transpose", [=] { return probe(ad::transpose(a), 10); }},
      {"permute", [=] { return probe(ad::permute(a, {2, 0, 1}), 11); }},
      {"reshape", [=] { return probe(ad::reshape(a, {6, 4}), 12); }},
      {"flatten", [=] { return probe(ad::flatten(a, 1), 13); }},
      {"sum", [=] { return probe(ad::sum(a, 1), 14); }},
      {"mean", [=] { return probe(ad::mean(a, -1, true), 15); }},
      {"softmax", [=] { return probe(ad::softmax(a), 16); }},
      {"log_softmax", [=] { return probe(ad::log_softmax(a), 17); }},
      {"tanh", [=] { return probe(ad::tanh(a), 18); }},
      {"leaky_relu", [=] { return probe(ad::leaky_relu(a, 0.1), 19); }},
      {"layer_norm", [=] { return probe(ad::layer_norm(a), 20); }},
      {"embedding", [=] { return probe(ad::embedding_lookup(w, {3, 0, 3, 1}), 21); }},
      {"replace_rows", [=] { return probe(ad::replace_rows(a, {true, false, false, true, false, true}, row), 22); }},
      {"pair_dot", [=] { return probe(ad::pair_dot(x, table, *idx, false), 23); }},
      {"pair_dot by key", [=] { return probe(ad::pair_dot(x, table, *idx, true), 24); }},
      {"pair_mix", [=] { return probe(ad::pair_mix(att, table, *idx), 25); }},
      {"attend", [=] { return probe(ad::attend(att, x), 26); }},
      {"attend relative", [=] { return probe(ad::attend(att, x, table, idx.get()), 27); }},
      {"mse", [=] { return ad::mse_loss(ad::reshape(a, {24}), std::vector<double>(24, 0.2)); }},
      {"cross_entropy", [=] { return ad::cross_entropy(ad::reshape(a, {6, 4}), {0, 1, 2, 3, 0, 1}); }},
      {"bce", [=] { return ad::bce_with_logits(ad::reshape(s, {24}), std::vector<double>(24, 1.0)); }},
  };
  return oc;
}

}  // namespace rmat::testing
