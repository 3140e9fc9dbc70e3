#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmat/error.hpp"
#include "rmat/train.hpp"

namespace rmat::train {

namespace {

void check_lengths(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (a.empty()) throw UndefinedMetric(std::string(what) + ": no samples");
}

}  // namespace

double rmse(const std::vector<double>& pred, const std::vector<double>& y) {
  check_lengths(pred, y, "rmse");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(const std::vector<double>& pred, const std::vector<double>& y) {
  check_lengths(pred, y, "mae");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  check_lengths(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("roc_auc: labels must be 0 or 1");
    if (labels[i] == 1) {
      pos += 1;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetric("roc_auc: only one class present");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::rmse: return "rmse";
    case Metric::mae: return "mae";
    case Metric::auc: return "auc";
  }
  return "?";
}

Metric metric_from_string(std::string_view s) {
  if (s == "rmse") return Metric::rmse;
  if (s == "mae") return Metric::mae;
  if (s == "auc" || s == "roc_auc") return Metric::auc;
  throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

bool higher_is_better(Metric m) { return m == Metric::auc; }

double compute_metric(Metric m, const std::vector<double>& pred, const std::vector<double>& y) {
  switch (m) {
    case Metric::rmse: return rmse(pred, y);
    case Metric::mae: return mae(pred, y);
    case Metric::auc: return roc_auc(pred, y);
  }
  return 0;
}

LabelNormalizer LabelNormalizer::fit(const std::vector<double>& y) {
  if (y.size() < 2) throw DataError("normalize_labels: need at least 2 training labels");
  LabelNormalizer n;
  for (double v : y) n.mean += v;
  n.mean /= static_cast<double>(y.size());
  double var = 0;
  for (double v : y) var += (v - n.mean) * (v - n.mean);
  var /= static_cast<double>(y.size());
  if (!(var > 0)) throw DataError("normalize_labels: training labels have zero variance");
  n.std = std::sqrt(var);
  return n;
}

std::vector<double> LabelNormalizer::transform(const std::vector<double>& y) const {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = transform(y[i]);
  return out;
}

std::vector<double> LabelNormalizer::inverse(const std::vector<double>& z) const {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = inverse(z[i]);
  return out;
}

}  // namespace rmat::train
