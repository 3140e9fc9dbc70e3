#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rmat/autodiff.hpp"
#include "rmat/error.hpp"
#include "rmat/kernels.hpp"

namespace rmat::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

Tensor make(const char* op, Shape shape, std::vector<Tensor> inputs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value.assign(numel(shape), 0.0);
  n->shape = std::move(shape);
  for (auto& t : inputs) {
    n->requires_grad = n->requires_grad || t.requires_grad();
    n->inputs.push_back(t.handle());
  }
  return Tensor(std::move(n));
}

// Attaches a backward closure only when something upstream needs it.
template <class F>
void on_backward(Tensor& out, F&& f) {
  if (out.requires_grad()) out.node()->backward = std::forward<F>(f);
}

inline bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

struct Broadcast {
  Shape out;
  std::vector<std::size_t> sa, sb;
  bool same = false;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  p.sa.assign(r, 0);
  p.sb.assign(r, 0);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t ax = r - 1 - k;
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) shape_error(op, a, b);
    p.out[ax] = std::max(da, db);
    p.sa[ax] = da == 1 ? 0 : stride_a;
    p.sb[ax] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  return p;
}

template <class F>
void broadcast_loop(const Broadcast& p, F&& f) {
  const std::size_t total = numel(p.out);
  if (p.same) {
    for (std::size_t o = 0; o < total; ++o) f(o, o, o);
    return;
  }
  const std::size_t r = p.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = p.out[r - 1];
  if (inner == 0) return;
  const std::size_t sa_in = p.sa[r - 1], sb_in = p.sb[r - 1];
  const std::size_t outer = total / inner;
  std::vector<std::size_t> idx(r - 1, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) f(o * inner + j, ia + j * sa_in, ib + j * sb_in);
    for (std::size_t k = r - 1; k-- > 0;) {
      ++idx[k];
      ia += p.sa[k];
      ib += p.sb[k];
      if (idx[k] < p.out[k]) break;
      ia -= p.sa[k] * p.out[k];
      ib -= p.sb[k] * p.out[k];
      idx[k] = 0;
    }
  }
}

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp kind, const char* name) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  Tensor out = make(name, plan->out, {a, b});
  auto& y = out.node()->value;
  const auto& av = a.node()->value;
  const auto& bv = b.node()->value;
  switch (kind) {
    case BinOp::add: broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { y[o] = av[i] + bv[j]; }); break;
    case BinOp::sub: broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { y[o] = av[i] - bv[j]; }); break;
    case BinOp::mul: broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { y[o] = av[i] * bv[j]; }); break;
  }
  on_backward(out, [plan, kind](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const bool ga = na.requires_grad, gb = nb.requires_grad;
    const auto& g = self.grad;
    auto& da = na.grad;
    auto& db = nb.grad;
    const auto& va = na.value;
    const auto& vb = nb.value;
    const double sign = kind == BinOp::sub ? -1.0 : 1.0;
    if (kind == BinOp::mul) {
      if (ga) broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { da[i] += g[o] * vb[j]; });
      if (gb) broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t j) { db[j] += g[o] * va[i]; });
    } else {
      if (ga) broadcast_loop(*plan, [&](std::size_t o, std::size_t i, std::size_t) { da[i] += g[o]; });
      if (gb) broadcast_loop(*plan, [&](std::size_t o, std::size_t, std::size_t j) { db[j] += sign * g[o]; });
    }
  });
  return out;
}

// Source index in the input for every output position of a permutation.
std::shared_ptr<std::vector<std::size_t>> permutation_map(const Shape& in, const std::vector<std::size_t>& axes,
                                                          Shape& out_shape) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t k = r; k-- > 1;) in_stride[k - 1] = in_stride[k] * in[k];
  out_shape.resize(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t k = 0; k < r; ++k) {
    out_shape[k] = in[axes[k]];
    stride[k] = in_stride[axes[k]];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(numel(in));
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < map->size(); ++o) {
    (*map)[o] = src;
    for (std::size_t k = r; k-- > 0;) {
      ++idx[k];
      src += stride[k];
      if (idx[k] < out_shape[k]) break;
      src -= stride[k] * out_shape[k];
      idx[k] = 0;
    }
  }
  return map;
}

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw std::invalid_argument(std::string(op) + ": axis out of range");
  return static_cast<std::size_t>(a);
}

Tensor reduce_sum(const Tensor& a, int axis, bool keepdim, double scale, const char* name) {
  const std::size_t ax = normalize_axis(axis, a.rank(), name);
  const Shape& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t k = 0; k < ax; ++k) outer *= s[k];
  for (std::size_t k = ax + 1; k < s.size(); ++k) inner *= s[k];
  const std::size_t len = s[ax];
  Shape os = s;
  if (keepdim) os[ax] = 1;
  else os.erase(os.begin() + static_cast<long>(ax));
  Tensor out = make(name, os, {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i) y[o * inner + i] += x[(o * len + l) * inner + i];
  if (scale != 1.0)
    for (double& v : y) v *= scale;
  on_backward(out, [outer, len, inner, scale](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t i = 0; i < inner; ++i) in.grad[(o * len + l) * inner + i] += scale * self.grad[o * inner + i];
  });
  return out;
}

std::size_t last_dim(const Tensor& a, const char* op) {
  if (a.rank() == 0) throw std::invalid_argument(std::string(op) + ": needs rank >= 1");
  return a.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) shape_error("matmul", a.shape(), b.shape());
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);

  enum class Mode { shared_b, shared_a, batched } mode;
  Shape os;
  if (b.rank() == 2) {
    mode = Mode::shared_b;
    os = lead_a;
  } else if (a.rank() == 2) {
    mode = Mode::shared_a;
    os = lead_b;
  } else {
    if (lead_a != lead_b) shape_error("matmul", a.shape(), b.shape());
    mode = Mode::batched;
    os = lead_a;
  }
  os.push_back(m);
  os.push_back(n);
  Tensor out = make("matmul", os, {a, b});
  const double* av = a.node()->value.data();
  const double* bv = b.node()->value.data();
  double* cv = out.node()->value.data();
  const std::size_t batch_a = numel(lead_a), batch_b = numel(lead_b);
  switch (mode) {
    case Mode::shared_b:
      kernels::gemm({1, batch_a * m, n, k, av, 0, false, bv, 0, false, cv, 0, false});
      break;
    case Mode::shared_a:
      kernels::gemm({batch_b, m, n, k, av, 0, false, bv, k * n, false, cv, m * n, false});
      break;
    case Mode::batched:
      kernels::gemm({batch_a, m, n, k, av, m * k, false, bv, k * n, false, cv, m * n, false});
      break;
  }
  on_backward(out, [mode, m, n, k, batch_a, batch_b](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const double* g = self.grad.data();
    const double* av = na.value.data();
    const double* bv = nb.value.data();
    switch (mode) {
      case Mode::shared_b: {
        const std::size_t rows = batch_a * m;
        if (na.requires_grad) kernels::gemm({1, rows, k, n, g, 0, false, bv, 0, true, na.grad.data(), 0, true});
        if (nb.requires_grad) kernels::gemm({1, k, n, rows, av, 0, true, g, 0, false, nb.grad.data(), 0, true});
        break;
      }
      case Mode::shared_a:
        if (na.requires_grad)
          for (std::size_t bi = 0; bi < batch_b; ++bi)
            kernels::gemm({1, m, k, n, g + bi * m * n, 0, false, bv + bi * k * n, 0, true, na.grad.data(), 0, true});
        if (nb.requires_grad)
          kernels::gemm({batch_b, k, n, m, av, 0, true, g, m * n, false, nb.grad.data(), k * n, true});
        break;
      case Mode::batched:
        if (na.requires_grad)
          kernels::gemm({batch_a, m, k, n, g, m * n, false, bv, k * n, true, na.grad.data(), m * k, true});
        if (nb.requires_grad)
          kernels::gemm({batch_a, k, n, m, av, m * k, true, g, m * n, false, nb.grad.data(), k * n, true});
        break;
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = make("mul_scalar", a.shape(), {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * s;
  on_backward(out, [s](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += s * self.grad[i];
  });
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = make("add_scalar", a.shape(), {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] + s;
  on_backward(out, [](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() == 0) throw std::invalid_argument("concat: scalar input");
    if (!std::equal(lead.begin(), lead.end(), p.shape().begin()) || p.rank() != lead.size() + 1)
      shape_error("concat", parts[0].shape(), p.shape());
    widths.push_back(p.shape().back());
    total += widths.back();
  }
  Shape os = lead;
  os.push_back(total);
  Tensor out = make("concat", os, parts);
  const std::size_t rows = numel(lead);
  auto& y = out.node()->value;
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& x = parts[p].node()->value;
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(x.data() + r * widths[p], widths[p], y.data() + r * total + off);
    off += widths[p];
  }
  on_backward(out, [widths, rows, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      Node& in = *self.inputs[p];
      if (in.requires_grad)
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[p]; ++c) in.grad[r * widths[p] + c] += self.grad[r * total + off + c];
      off += widths[p];
    }
  });
  return out;
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  const std::size_t w = last_dim(a, "slice");
  if (begin > end || end > w)
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") outside " + shape_str(a.shape()));
  Shape os = a.shape();
  os.back() = end - begin;
  Tensor out = make("slice", os, {a});
  const std::size_t rows = a.numel() / std::max<std::size_t>(w, 1), ow = end - begin;
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * w + begin, ow, y.data() + r * ow);
  on_backward(out, [rows, w, ow, begin](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ow; ++c) in.grad[r * w + begin + c] += self.grad[r * ow + c];
  });
  return out;
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const std::size_t r = a.rank();
  if (axes.size() != r) throw std::invalid_argument("permute: axis count mismatch for " + shape_str(a.shape()));
  std::vector<bool> seen(r, false);
  for (std::size_t ax : axes) {
    if (ax >= r || seen[ax]) throw std::invalid_argument("permute: invalid axes for " + shape_str(a.shape()));
    seen[ax] = true;
  }
  Shape os;
  auto map = permutation_map(a.shape(), axes, os);
  Tensor out = make("permute", os, {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t o = 0; o < map->size(); ++o) y[o] = x[(*map)[o]];
  on_backward(out, [map](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t o = 0; o < map->size(); ++o) in.grad[(*map)[o]] += self.grad[o];
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw std::invalid_argument("transpose: needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(a.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[a.rank() - 1], axes[a.rank() - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  Tensor out = make("reshape", std::move(shape), {a});
  out.node()->value = a.node()->value;
  on_backward(out, [](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
  return out;
}

Tensor flatten(const Tensor& a, std::size_t start_axis) {
  if (start_axis > a.rank()) throw std::invalid_argument("flatten: start axis beyond rank");
  Shape os(a.shape().begin(), a.shape().begin() + static_cast<long>(start_axis));
  std::size_t tail = 1;
  for (std::size_t k = start_axis; k < a.rank(); ++k) tail *= a.shape()[k];
  os.push_back(tail);
  return reshape(a, os);
}

Tensor sum(const Tensor& a, int axis, bool keepdim) { return reduce_sum(a, axis, keepdim, 1.0, "sum"); }

Tensor mean(const Tensor& a, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, a.rank(), "mean");
  return reduce_sum(a, axis, keepdim, 1.0 / static_cast<double>(a.shape()[ax]), "mean");
}

Tensor sum_all(const Tensor& a) {
  Tensor out = make("sum_all", {}, {a});
  double s = 0;
  for (double v : a.values()) s += v;
  out.node()->value[0] = s;
  on_backward(out, [](Node& self) {
    Node& in = *self.inputs[0];
    for (double& g : in.grad) g += self.grad[0];
  });
  return out;
}

namespace {

// Row-wise softmax of x into y; returns false if some row is entirely -inf.
// The normalizer is a sorted sum, so permuting a row permutes the output
// exactly.
bool softmax_rows(const std::vector<double>& x, std::vector<double>& y, std::size_t w) {
  const std::size_t rows = w ? x.size() / w : 0;
  std::vector<double> scratch;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * w;
    double* yr = y.data() + r * w;
    const double mx = *std::max_element(xr, xr + w);
    if (mx == -std::numeric_limits<double>::infinity()) return false;
    scratch.resize(w);
    for (std::size_t c = 0; c < w; ++c) scratch[c] = yr[c] = std::exp(xr[c] - mx);
    const double z = kernels::sorted_sum(scratch.data(), w);
    for (std::size_t c = 0; c < w; ++c) yr[c] /= z;
  }
  return true;
}

}  // namespace

Tensor softmax(const Tensor& a) {
  const std::size_t w = last_dim(a, "softmax");
  Tensor out = make("softmax", a.shape(), {a});
  if (!softmax_rows(a.node()->value, out.node()->value, w))
    throw NumericError("softmax: row with no finite entries");
  on_backward(out, [w](Node& self) {
    Node& in = *self.inputs[0];
    const std::size_t rows = self.value.size() / w;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * w;
      const double* g = self.grad.data() + r * w;
      double dot = 0;
      for (std::size_t c = 0; c < w; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < w; ++c) in.grad[r * w + c] += y[c] * (g[c] - dot);
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t w = last_dim(a, "log_softmax");
  Tensor out = make("log_softmax", a.shape(), {a});
  const auto& x = a.node()->value;
  auto& y = out.node()->value;
  const std::size_t rows = w ? x.size() / w : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * w;
    const double mx = *std::max_element(xr, xr + w);
    if (!std::isfinite(mx)) throw NumericError("log_softmax: non-finite row maximum");
    double z = 0;
    for (std::size_t c = 0; c < w; ++c) z += std::exp(xr[c] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t c = 0; c < w; ++c) y[r * w + c] = xr[c] - lz;
  }
  on_backward(out, [w](Node& self) {
    Node& in = *self.inputs[0];
    const std::size_t rows = self.value.size() / w;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * w;
      const double* g = self.grad.data() + r * w;
      double gs = 0;
      for (std::size_t c = 0; c < w; ++c) gs += g[c];
      for (std::size_t c = 0; c < w; ++c) in.grad[r * w + c] += g[c] - std::exp(y[c]) * gs;
    }
  });
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out = make("tanh", a.shape(), {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  on_backward(out, [](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      in.grad[i] += self.grad[i] * (1 - self.value[i] * self.value[i]);
  });
  return out;
}

Tensor leaky_relu(const Tensor& a, double slope) {
  Tensor out = make("leaky_relu", a.shape(), {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
  on_backward(out, [slope](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      in.grad[i] += self.grad[i] * (in.value[i] > 0 ? 1.0 : slope);
  });
  return out;
}

Tensor layer_norm(const Tensor& a, double eps) {
  const std::size_t w = last_dim(a, "layer_norm");
  const std::size_t rows = a.numel() / std::max<std::size_t>(w, 1);
  Tensor out = make("layer_norm", a.shape(), {a});
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& x = a.node()->value;
  auto& y = out.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * w;
    double mu = 0;
    for (std::size_t c = 0; c < w; ++c) mu += xr[c];
    mu /= static_cast<double>(w);
    double var = 0;
    for (std::size_t c = 0; c < w; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(w);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < w; ++c) y[r * w + c] = (xr[c] - mu) * is;
  }
  on_backward(out, [w, rows, inv_std](Node& self) {
    Node& in = *self.inputs[0];
    const double inv_w = 1.0 / static_cast<double>(w);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xh = self.value.data() + r * w;
      const double* g = self.grad.data() + r * w;
      double gm = 0, gx = 0;
      for (std::size_t c = 0; c < w; ++c) {
        gm += g[c];
        gx += g[c] * xh[c];
      }
      gm *= inv_w;
      gx *= inv_w;
      for (std::size_t c = 0; c < w; ++c) in.grad[r * w + c] += (*inv_std)[r] * (g[c] - gm - xh[c] * gx);
    }
  });
  return out;
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& indices) {
  if (table.rank() != 2) throw std::invalid_argument("embedding_lookup: table must be 2-D, got " + shape_str(table.shape()));
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (std::size_t i : indices)
    if (i >= v) throw std::out_of_range("embedding_lookup: index " + std::to_string(i) + " >= " + std::to_string(v));
  Tensor out = make("embedding_lookup", {indices.size(), d}, {table});
  auto& y = out.node()->value;
  const auto& x = table.node()->value;
  for (std::size_t r = 0; r < indices.size(); ++r) std::copy_n(x.data() + indices[r] * d, d, y.data() + r * d);
  on_backward(out, [indices, d](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) in.grad[indices[r] * d + c] += self.grad[r * d + c];
  });
  return out;
}

namespace {

struct PairDims {
  std::size_t b, h, n, dk;
};

PairDims pair_dims(const char* op, const Tensor& x, std::size_t last, const Tensor& table,
                   const std::vector<std::size_t>& index) {
  if (x.rank() != 4 || table.rank() != 2) shape_error(op, x.shape(), table.shape());
  PairDims d{x.dim(0), x.dim(1), x.dim(2), 0};
  if (d.h == 0 || table.dim(1) % d.h != 0) shape_error(op, x.shape(), table.shape());
  d.dk = table.dim(1) / d.h;
  if (x.dim(3) != last || index.size() != d.b * d.n * d.n) shape_error(op, x.shape(), table.shape());
  for (std::size_t i : index)
    if (i >= table.dim(0))
      throw std::out_of_range(std::string(op) + ": index " + std::to_string(i) + " >= " + std::to_string(table.dim(0)));
  return d;
}

}  // namespace

Tensor pair_dot(const Tensor& x, const Tensor& table, const std::vector<std::size_t>& index, bool by_key) {
  const PairDims d = pair_dims("pair_dot", x, x.rank() == 4 ? x.dim(3) : 0, table, index);
  const std::size_t w = table.dim(1);
  auto idx = std::make_shared<const std::vector<std::size_t>>(index);
  Tensor out = make("pair_dot", {d.b, d.h, d.n, d.n}, {x, table});
  auto& y = out.node()->value;
  const double* xv = x.node()->value.data();
  const double* tv = table.node()->value.data();
  for (std::size_t b = 0; b < d.b; ++b)
    for (std::size_t h = 0; h < d.h; ++h)
      for (std::size_t i = 0; i < d.n; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
          const double* xr = xv + ((b * d.h + h) * d.n + (by_key ? j : i)) * d.dk;
          const double* tr = tv + (*idx)[(b * d.n + i) * d.n + j] * w + h * d.dk;
          double s = 0.0;
          for (std::size_t k = 0; k < d.dk; ++k) s += xr[k] * tr[k];
          y[((b * d.h + h) * d.n + i) * d.n + j] = s;
        }
  on_backward(out, [idx, d, w, by_key](Node& self) {
    Node& xn = *self.inputs[0];
    Node& tn = *self.inputs[1];
    const bool gx = wants(self.inputs[0]), gt = wants(self.inputs[1]);
    for (std::size_t b = 0; b < d.b; ++b)
      for (std::size_t h = 0; h < d.h; ++h)
        for (std::size_t i = 0; i < d.n; ++i)
          for (std::size_t j = 0; j < d.n; ++j) {
            const double g = self.grad[((b * d.h + h) * d.n + i) * d.n + j];
            if (g == 0.0) continue;
            const std::size_t xo = ((b * d.h + h) * d.n + (by_key ? j : i)) * d.dk;
            const std::size_t to = (*idx)[(b * d.n + i) * d.n + j] * w + h * d.dk;
            for (std::size_t k = 0; k < d.dk; ++k) {
              if (gx) xn.grad[xo + k] += g * tn.value[to + k];
              if (gt) tn.grad[to + k] += g * xn.value[xo + k];
            }
          }
  });
  return out;
}

Tensor pair_mix(const Tensor& a, const Tensor& table, const std::vector<std::size_t>& index) {
  const PairDims d = pair_dims("pair_mix", a, a.rank() == 4 ? a.dim(2) : 0, table, index);
  const std::size_t w = table.dim(1);
  auto idx = std::make_shared<const std::vector<std::size_t>>(index);
  Tensor out = make("pair_mix", {d.b, d.h, d.n, d.dk}, {a, table});
  auto& y = out.node()->value;
  const double* av = a.node()->value.data();
  const double* tv = table.node()->value.data();
  for (std::size_t b = 0; b < d.b; ++b)
    for (std::size_t h = 0; h < d.h; ++h)
      for (std::size_t i = 0; i < d.n; ++i) {
        double* yr = y.data() + ((b * d.h + h) * d.n + i) * d.dk;
        for (std::size_t j = 0; j < d.n; ++j) {
          const double aij = av[((b * d.h + h) * d.n + i) * d.n + j];
          const double* tr = tv + (*idx)[(b * d.n + i) * d.n + j] * w + h * d.dk;
          for (std::size_t k = 0; k < d.dk; ++k) yr[k] += aij * tr[k];
        }
      }
  on_backward(out, [idx, d, w](Node& self) {
    Node& an = *self.inputs[0];
    Node& tn = *self.inputs[1];
    const bool ga = wants(self.inputs[0]), gt = wants(self.inputs[1]);
    for (std::size_t b = 0; b < d.b; ++b)
      for (std::size_t h = 0; h < d.h; ++h)
        for (std::size_t i = 0; i < d.n; ++i) {
          const double* gr = self.grad.data() + ((b * d.h + h) * d.n + i) * d.dk;
          for (std::size_t j = 0; j < d.n; ++j) {
            const std::size_t ao = ((b * d.h + h) * d.n + i) * d.n + j;
            const std::size_t to = (*idx)[(b * d.n + i) * d.n + j] * w + h * d.dk;
            if (ga) {
              double s = 0.0;
              for (std::size_t k = 0; k < d.dk; ++k) s += gr[k] * tn.value[to + k];
              an.grad[ao] += s;
            }
            if (gt) {
              const double aij = an.value[ao];
              for (std::size_t k = 0; k < d.dk; ++k) tn.grad[to + k] += aij * gr[k];
            }
          }
        }
  });
  return out;
}

Tensor attend(const Tensor& a, const Tensor& v, const Tensor& table, const std::vector<std::size_t>* index) {
  if (a.rank() != 4 || v.rank() != 4 || a.dim(0) != v.dim(0) || a.dim(1) != v.dim(1) || a.dim(2) != v.dim(2) ||
      a.dim(3) != v.dim(2))
    shape_error("attend", a.shape(), v.shape());
  const std::size_t bs = a.dim(0), hs = a.dim(1), n = a.dim(2), dk = v.dim(3);
  const bool rel = table.defined();
  std::shared_ptr<const std::vector<std::size_t>> idx;
  std::size_t w = 0;
  if (rel) {
    if (!index) throw std::invalid_argument("attend: table without index");
    const PairDims d = pair_dims("attend", a, n, table, *index);
    if (d.dk != dk) shape_error("attend", v.shape(), table.shape());
    idx = std::make_shared<const std::vector<std::size_t>>(*index);
    w = table.dim(1);
  }
  Tensor out = rel ? make("attend", {bs, hs, n, dk}, {a, v, table}) : make("attend", {bs, hs, n, dk}, {a, v});
  auto& y = out.node()->value;
  const double* av = a.node()->value.data();
  const double* vv = v.node()->value.data();
  const double* tv = rel ? table.node()->value.data() : nullptr;
  std::vector<double> terms(n * dk);
  std::vector<std::size_t> order(n);
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t h = 0; h < hs; ++h)
      for (std::size_t i = 0; i < n; ++i) {
        const double* ar = av + ((b * hs + h) * n + i) * n;
        for (std::size_t j = 0; j < n; ++j) {
          const double* vr = vv + ((b * hs + h) * n + j) * dk;
          double* t = terms.data() + j * dk;
          if (rel) {
            const double* tr = tv + (*idx)[(b * n + i) * n + j] * w + h * dk;
            for (std::size_t c = 0; c < dk; ++c) t[c] = ar[j] * (vr[c] + tr[c]);
          } else {
            for (std::size_t c = 0; c < dk; ++c) t[c] = ar[j] * vr[c];
          }
        }
        // Keys in a canonical order: by weight, then by their terms. Keys
        // that tie contribute identical terms, so their order is immaterial.
        auto before = [&](std::size_t p, std::size_t q) {
          if (ar[p] != ar[q]) return ar[p] < ar[q];
          const double* tp = terms.data() + p * dk;
          const double* tq = terms.data() + q * dk;
          for (std::size_t c = 0; c < dk; ++c)
            if (tp[c] != tq[c]) return tp[c] < tq[c];
          return false;
        };
        for (std::size_t j = 0; j < n; ++j) {
          std::size_t k = j;
          for (; k > 0 && before(j, order[k - 1]); --k) order[k] = order[k - 1];
          order[k] = j;
        }
        double* yr = y.data() + ((b * hs + h) * n + i) * dk;
        std::fill(yr, yr + dk, 0.0);
        for (std::size_t j : order) {
          const double* t = terms.data() + j * dk;
          for (std::size_t c = 0; c < dk; ++c) yr[c] += t[c];
        }
      }
  on_backward(out, [idx, bs, hs, n, dk, w, rel](Node& self) {
    Node& an = *self.inputs[0];
    Node& vn = *self.inputs[1];
    Node* tn = rel ? self.inputs[2].get() : nullptr;
    const bool ga = wants(self.inputs[0]), gv = wants(self.inputs[1]), gt = rel && wants(self.inputs[2]);
    std::vector<double> u(dk);
    for (std::size_t b = 0; b < bs; ++b)
      for (std::size_t h = 0; h < hs; ++h)
        for (std::size_t i = 0; i < n; ++i) {
          const double* gr = self.grad.data() + ((b * hs + h) * n + i) * dk;
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t ao = ((b * hs + h) * n + i) * n + j;
            const double* vr = vn.value.data() + ((b * hs + h) * n + j) * dk;
            const std::size_t to = rel ? (*idx)[(b * n + i) * n + j] * w + h * dk : 0;
            const double aij = an.value[ao];
            if (ga) {
              double s = 0.0;
              if (rel) {
                const double* tr = tn->value.data() + to;
                for (std::size_t c = 0; c < dk; ++c) s += gr[c] * (vr[c] + tr[c]);
              } else {
                for (std::size_t c = 0; c < dk; ++c) s += gr[c] * vr[c];
              }
              an.grad[ao] += s;
            }
            if (aij == 0.0) continue;
            if (gv) {
              double* gvr = vn.grad.data() + ((b * hs + h) * n + j) * dk;
              for (std::size_t c = 0; c < dk; ++c) gvr[c] += aij * gr[c];
            }
            if (gt) {
              double* gtr = tn->grad.data() + to;
              for (std::size_t c = 0; c < dk; ++c) gtr[c] += aij * gr[c];
            }
          }
        }
  });
  return out;
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  if (!training || p <= 0) return a;
  if (p >= 1) throw std::invalid_argument("dropout: p must be < 1");
  auto mask = std::make_shared<std::vector<double>>(a.numel());
  const double keep = 1.0 / (1.0 - p);
  for (double& m : *mask) m = rng.uniform() < p ? 0.0 : keep;
  Tensor out = make("dropout", a.shape(), {a});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*mask)[i] == 0.0 ? 0.0 : x[i] * (*mask)[i];
  on_backward(out, [mask](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i] * (*mask)[i];
  });
  return out;
}

Tensor replace_rows(const Tensor& a, const std::vector<bool>& flags, const Tensor& token) {
  const std::size_t d = last_dim(a, "replace_rows");
  const std::size_t rows = a.numel() / std::max<std::size_t>(d, 1);
  if (flags.size() != rows) throw std::invalid_argument("replace_rows: " + std::to_string(flags.size()) +
                                                        " flags for " + std::to_string(rows) + " rows");
  if (token.numel() != d) shape_error("replace_rows", a.shape(), token.shape());
  Tensor out = make("replace_rows", a.shape(), {a, token});
  auto& y = out.node()->value;
  const auto& x = a.node()->value;
  const auto& t = token.node()->value;
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(flags[r] ? t.data() : x.data() + r * d, d, y.data() + r * d);
  on_backward(out, [flags, d, rows](Node& self) {
    Node& in = *self.inputs[0];
    Node& tok = *self.inputs[1];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * d;
      if (flags[r]) {
        if (tok.requires_grad)
          for (std::size_t c = 0; c < d; ++c) tok.grad[c] += g[c];
      } else if (in.requires_grad) {
        for (std::size_t c = 0; c < d; ++c) in.grad[r * d + c] += g[c];
      }
    }
  });
  return out;
}

Tensor mse_loss(const Tensor& pred, const std::vector<double>& target) {
  if (pred.numel() != target.size() || target.empty())
    throw std::invalid_argument("mse_loss: " + shape_str(pred.shape()) + " vs " + std::to_string(target.size()) + " targets");
  Tensor out = make("mse_loss", {}, {pred});
  const auto& p = pred.node()->value;
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - target[i]) * (p[i] - target[i]);
  const double inv = 1.0 / static_cast<double>(target.size());
  out.node()->value[0] = s * inv;
  on_backward(out, [target, inv](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < target.size(); ++i) in.grad[i] += self.grad[0] * 2 * (in.value[i] - target[i]) * inv;
  });
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty())
    throw std::invalid_argument("cross_entropy: logits " + shape_str(logits.shape()) + " for " +
                                std::to_string(labels.size()) + " labels");
  const std::size_t m = logits.dim(0), v = logits.dim(1);
  for (std::size_t l : labels)
    if (l >= v) throw std::out_of_range("cross_entropy: label out of range");
  Tensor out = make("cross_entropy", {}, {logits});
  auto probs = std::make_shared<std::vector<double>>(m * v);
  const auto& x = logits.node()->value;
  double loss = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const double* xr = x.data() + r * v;
    const double mx = *std::max_element(xr, xr + v);
    if (!std::isfinite(mx)) throw NumericError("cross_entropy: non-finite logits");
    double z = 0;
    for (std::size_t c = 0; c < v; ++c) z += ((*probs)[r * v + c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < v; ++c) (*probs)[r * v + c] /= z;
    loss -= xr[labels[r]] - mx - std::log(z);
  }
  const double inv = 1.0 / static_cast<double>(m);
  out.node()->value[0] = loss * inv;
  on_backward(out, [probs, labels, v, inv](Node& self) {
    Node& in = *self.inputs[0];
    const double g = self.grad[0] * inv;
    for (std::size_t r = 0; r < labels.size(); ++r)
      for (std::size_t c = 0; c < v; ++c)
        in.grad[r * v + c] += g * ((*probs)[r * v + c] - (c == labels[r] ? 1.0 : 0.0));
  });
  return out;
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& labels) {
  if (logits.numel() != labels.size() || labels.empty())
    throw std::invalid_argument("bce_with_logits: " + shape_str(logits.shape()) + " for " +
                                std::to_string(labels.size()) + " labels");
  Tensor out = make("bce_with_logits", {}, {logits});
  const auto& x = logits.node()->value;
  double loss = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    loss += std::max(x[i], 0.0) - x[i] * labels[i] + std::log1p(std::exp(-std::abs(x[i])));
  const double inv = 1.0 / static_cast<double>(labels.size());
  out.node()->value[0] = loss * inv;
  on_backward(out, [labels, inv](Node& self) {
    Node& in = *self.inputs[0];
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-in.value[i]));
      in.grad[i] += self.grad[0] * (s - labels[i]) * inv;
    }
  });
  return out;
}

}  // namespace rmat::ad
