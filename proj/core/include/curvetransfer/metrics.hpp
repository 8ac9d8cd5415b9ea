#pragma once

#include <cstddef>
#include <span>

namespace curvetransfer::metrics {

/// Points with |actual| below this are left out of MAPE.
inline constexpr double kDefaultMapeEpsilon = 1e-6;

struct MapeResult {
  double percent = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

/// Mean absolute percentage error (in percent) over the points whose actual
/// value is at least `epsilon` in magnitude. Throws when no point qualifies.
MapeResult mape(std::span<const double> actual, std::span<const double> predicted,
                double epsilon = kDefaultMapeEpsilon);

double rmse(std::span<const double> actual, std::span<const double> predicted);

/// Coefficient of determination 1 - SS_res / SS_tot. May be negative.
double r2(std::span<const double> actual, std::span<const double> predicted);

/// Sample Pearson correlation. Throws on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct MetricSummary {
  double mape = 0.0;  // percent
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
  std::size_t n_excluded = 0;
};

MetricSummary summarize(std::span<const double> actual, std::span<const double> predicted,
                        double mape_epsilon = kDefaultMapeEpsilon);

}  // namespace curvetransfer::metrics
