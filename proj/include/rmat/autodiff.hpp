#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rmat/rng.hpp"

namespace rmat::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Graph node. Backward closures read their inputs from `inputs` and the
// node's own value/grad, and accumulate into input grads.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

// Shared handle onto a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  // Negative axes count from the end.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& handle() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Reverse sweep from a scalar. Leaf gradients accumulate across calls;
// interior gradients are reset on every call.
void backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

// (..., m, k) x (..., k, n). Leading dims must match, or one side is 2-D.
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor concat(const std::vector<Tensor>& parts);  // along the last axis
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);  // last axis
Tensor transpose(const Tensor& a);  // swap last two axes
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a, std::size_t start_axis = 0);
Tensor sum(const Tensor& a, int axis, bool keepdim = false);
Tensor mean(const Tensor& a, int axis, bool keepdim = false);
Tensor sum_all(const Tensor& a);
Tensor softmax(const Tensor& a);  // last axis
Tensor log_softmax(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor layer_norm(const Tensor& a, double eps = 1e-6);  // last axis, no affine
// Rows of `table` (V, d) picked by index -> (len, d).
Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& indices);
// Pairwise products against rows of a (U, H*dk) table picked per (b, i, j)
// by `index` (B*N*N entries), without materializing (B, H, N, N, dk).
// pair_dot: x (B, H, N, dk) -> (B, H, N, N),
//   out[b,h,i,j] = x[b,h,s,:] . table[index[b,i,j], h*dk:(h+1)*dk], s = by_key ? j : i.
// pair_mix: a (B, H, N, N) -> (B, H, N, dk),
//   out[b,h,i,:] = sum_j a[b,h,i,j] table[index[b,i,j], h*dk:(h+1)*dk].
Tensor pair_dot(const Tensor& x, const Tensor& table, const std::vector<std::size_t>& index, bool by_key);
Tensor pair_mix(const Tensor& a, const Tensor& table, const std::vector<std::size_t>& index);
// Attention readout: a (B, H, N, N), v (B, H, N, dk) -> (B, H, N, dk),
//   out[b,h,i,:] = sum_j a[b,h,i,j] (v[b,h,j,:] + table[index[b,i,j], h*dk:(h+1)*dk]),
// the table term only when `table` is defined. Each sum over j is a sorted
// sum, so relabeling atoms permutes the output exactly.
Tensor attend(const Tensor& a, const Tensor& v, const Tensor& table = {},
              const std::vector<std::size_t>* index = nullptr);
// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);
// Views `a` as rows of its last axis and swaps flagged rows for `token`.
// Flagged input rows never influence the output.
Tensor replace_rows(const Tensor& a, const std::vector<bool>& flags, const Tensor& token);

// Losses (scalar results).
Tensor mse_loss(const Tensor& pred, const std::vector<double>& target);
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& labels);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---- parameters -----------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Ordered, uniquely named parameter set.
class ParameterStore {
 public:
  Tensor& create(const std::string& name, Shape shape);
  Tensor& xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Tensor& zeros(const std::string& name, Shape shape);
  Tensor& constant(const std::string& name, Shape shape, double v);

  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Parameter>& parameters() { return params_; }
  const Tensor* find(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t count() const;  // total scalar count
  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

// ---- gradient check -------------------------------------------------------

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  bool ok = true;
  std::string failure;  // set when a gradient is non-finite
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  std::size_t samples = 32;  // coordinates per parameter (all if fewer)
  std::uint64_t seed = 7;
};

// Central differences against backward() on a random coordinate subsample.
// Per parameter: ||g_ad - g_fd|| / max(||g_ad||, ||g_fd||, 1e-12).
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Parameter> params,
                           const GradCheckOptions& opt = {});

// ---- checkpoints ----------------------------------------------------------

struct Checkpoint {
  std::string config;  // config echo (key = value lines)
  std::string meta;    // free key = value lines (label statistics, stage, ...)
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline constexpr char kCheckpointMagic[] = "RMATCKPT1";

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace rmat::ad
