#include "curvetransfer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "curvetransfer/error.hpp"

namespace curvetransfer::metrics {

namespace {

void require_pair(std::span<const double> a, std::span<const double> b, std::size_t min_len, const char* what) {
  if (a.size() != b.size())
    throw DataError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  if (a.size() < min_len)
    throw DataError(std::string(what) + ": needs at least " + std::to_string(min_len) + " points");
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

MapeResult mape(std::span<const double> actual, std::span<const double> predicted, double epsilon) {
  require_pair(actual, predicted, 1, "mape");
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (std::abs(actual[i]) < epsilon) {
      ++r.n_excluded;
      continue;
    }
    sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
    ++r.n_used;
  }
  if (r.n_used == 0) throw DataError("mape: every actual value is below the zero-guard epsilon");
  r.percent = sum / static_cast<double>(r.n_used) * 100.0;
  return r;
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  require_pair(actual, predicted, 1, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double e = actual[i] - predicted[i];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

double r2(std::span<const double> actual, std::span<const double> predicted) {
  require_pair(actual, predicted, 2, "r2");
  const double ybar = mean(actual);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - ybar) * (actual[i] - ybar);
  }
  if (ss_tot == 0.0) throw DataError("r2: actual values are constant");
  return 1.0 - ss_res / ss_tot;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  require_pair(xs, ys, 2, "pearson");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: zero variance");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

MetricSummary summarize(std::span<const double> actual, std::span<const double> predicted, double mape_epsilon) {
  const auto m = mape(actual, predicted, mape_epsilon);
  MetricSummary s;
  s.mape = m.percent;
  s.n_excluded = m.n_excluded;
  s.rmse = rmse(actual, predicted);
  s.r2 = r2(actual, predicted);
  s.n_points = actual.size();
  return s;
}

}  // namespace curvetransfer::metrics
