#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmat/error.hpp"
#include "rmat/train.hpp"

namespace rmat::train {

double noam_lr(std::size_t step, std::size_t d_model, std::size_t warmup_steps, double scale) {
  if (step == 0) throw std::invalid_argument("noam_lr: step must be >= 1");
  if (warmup_steps == 0 || d_model == 0) throw std::invalid_argument("noam_lr: warmup and d_model must be positive");
  const double s = static_cast<double>(step), w = static_cast<double>(warmup_steps);
  return scale * std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

double noam_scale_for_peak(double peak_lr, std::size_t d_model, std::size_t warmup_steps) {
  return peak_lr * std::sqrt(static_cast<double>(d_model)) * std::sqrt(static_cast<double>(warmup_steps));
}

const std::vector<double>& default_lr_grid() {
  static const std::vector<double> grid{1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6};
  return grid;
}

Adam::Adam(std::vector<ad::Parameter> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Tensor& t = params_[k].tensor;
    if (!t.has_grad()) continue;
    auto w = t.mutable_values();
    auto g = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(g[i])) throw NumericError("non-finite gradient in " + params_[k].name);
      m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace rmat::train
