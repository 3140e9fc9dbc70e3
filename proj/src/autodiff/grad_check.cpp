#include <algorithm>
#include <cmath>

#include "rmat/autodiff.hpp"

namespace rmat::ad {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Parameter> params,
                           const GradCheckOptions& opt) {
  GradCheckReport report;
  for (auto& p : params) p.tensor.zero_grad();
  Tensor loss = f();
  backward(loss);

  Rng rng(opt.seed);
  for (auto& p : params) {
    GradCheckEntry entry{p.name, 0, 0};
    const std::size_t n = p.tensor.numel();
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (n > opt.samples) {
      rng.shuffle(coords);
      coords.resize(opt.samples);
    }
    std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    if (analytic.size() != n) analytic.assign(n, 0.0);
    auto values = p.tensor.mutable_values();
    double diff2 = 0, ad2 = 0, fd2 = 0;
    for (std::size_t c : coords) {
      const double orig = values[c];
      values[c] = orig + opt.eps;
      const double up = f().item();
      values[c] = orig - opt.eps;
      const double down = f().item();
      values[c] = orig;
      const double fd = (up - down) / (2 * opt.eps);
      const double ga = analytic[c];
      if (!std::isfinite(fd) || !std::isfinite(ga)) {
        report.ok = false;
        report.failure = "non-finite gradient for " + p.name;
      }
      diff2 += (ga - fd) * (ga - fd);
      ad2 += ga * ga;
      fd2 += fd * fd;
    }
    entry.checked = coords.size();
    entry.max_rel_error = std::sqrt(diff2) / std::max({std::sqrt(ad2), std::sqrt(fd2), 1e-12});
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(entry);
  }
  if (report.max_rel_error > opt.tol) report.ok = false;
  return report;
}

}  // namespace rmat::ad
