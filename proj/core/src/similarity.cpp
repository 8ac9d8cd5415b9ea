#include "curvetransfer/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>

#include "curvetransfer/error.hpp"
#include "curvetransfer/metrics.hpp"

namespace curvetransfer {

namespace {

void require_same_length(const GridCurve& a, const GridCurve& b) {
  if (a.stress_norm.size() != b.stress_norm.size())
    throw DataError("grid length mismatch: " + std::to_string(a.stress_norm.size()) + " vs " +
                    std::to_string(b.stress_norm.size()));
}

void require_non_empty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("DTW needs non-empty sequences");
}

double sq(double v) { return v * v; }

}  // namespace

Matrix local_distance_matrix(std::span<const double> a, std::span<const double> b) {
  Matrix local(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t l = 0; l < b.size(); ++l) local(k, l) = sq(a[k] - b[l]);
  return local;
}

Matrix local_distance_matrix(const GridCurve& a, const GridCurve& b) {
  require_same_length(a, b);
  return local_distance_matrix(a.stress_norm, b.stress_norm);
}

Matrix cumulative_cost(const Matrix& local) {
  const std::size_t rows = local.rows();
  const std::size_t cols = local.cols();
  Matrix d(rows, cols);
  if (local.empty()) return d;
  d(0, 0) = local(0, 0);
  for (std::size_t k = 1; k < rows; ++k) d(k, 0) = local(k, 0) + d(k - 1, 0);
  for (std::size_t l = 1; l < cols; ++l) d(0, l) = local(0, l) + d(0, l - 1);
  for (std::size_t k = 1; k < rows; ++k)
    for (std::size_t l = 1; l < cols; ++l)
      d(k, l) = local(k, l) + std::min({d(k - 1, l), d(k, l - 1), d(k - 1, l - 1)});
  return d;
}

CostMatrices cost_matrices(std::span<const double> a, std::span<const double> b) {
  CostMatrices m;
  m.local = local_distance_matrix(a, b);
  m.cumulative = cumulative_cost(m.local);
  return m;
}

WarpingPath backtrack_path(const Matrix& cumulative) {
  WarpingPath path;
  if (cumulative.empty()) return path;
  std::size_t k = cumulative.rows() - 1;
  std::size_t l = cumulative.cols() - 1;
  path.emplace_back(k, l);
  while (k > 0 || l > 0) {
    if (k == 0) {
      --l;
    } else if (l == 0) {
      --k;
    } else {
      const double diag = cumulative(k - 1, l - 1);
      const double up = cumulative(k - 1, l);
      const double left = cumulative(k, l - 1);
      if (diag <= up && diag <= left) {
        --k;
        --l;
      } else if (up <= left) {
        --k;
      } else {
        --l;
      }
    }
    path.emplace_back(k, l);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

DtwResult dtw_distance(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b);
  const auto m = cost_matrices(a, b);
  return {m.cumulative(a.size() - 1, b.size() - 1), backtrack_path(m.cumulative)};
}

DtwResult dtw_distance(const GridCurve& a, const GridCurve& b) {
  require_same_length(a, b);
  return dtw_distance(a.stress_norm, b.stress_norm);
}

double dtw_cost(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b);
  // Two rolling rows over b; same operation order as cumulative_cost.
  std::vector<double> prev(b.size());
  std::vector<double> cur(b.size());
  prev[0] = sq(a[0] - b[0]);
  for (std::size_t l = 1; l < b.size(); ++l) prev[l] = sq(a[0] - b[l]) + prev[l - 1];
  for (std::size_t k = 1; k < a.size(); ++k) {
    const double ak = a[k];
    cur[0] = sq(ak - b[0]) + prev[0];
    for (std::size_t l = 1; l < b.size(); ++l)
      cur[l] = sq(ak - b[l]) + std::min({prev[l], cur[l - 1], prev[l - 1]});
    std::swap(prev, cur);
  }
  return prev.back();
}

namespace {

void enumerate_paths(std::span<const double> a, std::span<const double> b, std::size_t k, std::size_t l,
                     double acc, double& best) {
  acc += sq(a[k] - b[l]);
  if (k + 1 == a.size() && l + 1 == b.size()) {
    best = std::min(best, acc);
    return;
  }
  if (k + 1 < a.size()) enumerate_paths(a, b, k + 1, l, acc, best);
  if (l + 1 < b.size()) enumerate_paths(a, b, k, l + 1, acc, best);
  if (k + 1 < a.size() && l + 1 < b.size()) enumerate_paths(a, b, k + 1, l + 1, acc, best);
}

}  // namespace

double brute_force_dtw(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b);
  if (a.size() > kBruteForceMaxLength || b.size() > kBruteForceMaxLength)
    throw DataError("brute_force_dtw: sequences longer than " + std::to_string(kBruteForceMaxLength));
  double best = std::numeric_limits<double>::infinity();
  enumerate_paths(a, b, 0, 0, 0.0, best);
  return best;
}

double average_dtw(std::span<const GridCurve> source, std::span<const GridCurve> target) {
  if (source.empty() || target.empty()) throw DataError("average_dtw: empty curve list");
  double outer = 0.0;
  for (const auto& p : source) {
    double inner = 0.0;
    for (const auto& m : target) {
      require_same_length(p, m);
      inner += dtw_cost(p.stress_norm, m.stress_norm);
    }
    outer += inner / static_cast<double>(target.size());
  }
  return outer / static_cast<double>(source.size());
}

SourceRanking make_ranking(std::vector<SourceRanking::Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) {
    if (x.avg_dtw != y.avg_dtw) return x.avg_dtw < y.avg_dtw;
    return x.source < y.source;
  });
  SourceRanking ranking;
  ranking.entries = std::move(entries);
  if (!ranking.entries.empty()) ranking.selected = ranking.entries.front().source;
  return ranking;
}

SourceRanking rank_sources(std::span<const Dataset> sources, std::span<const RawCurve> target_train,
                           std::size_t grid_n) {
  if (sources.empty()) throw DataError("rank_sources: no source datasets");
  if (target_train.empty()) throw DataError("rank_sources: no target training curves");
  const auto target_grid = to_grid_curves(target_train, grid_n);
  std::vector<SourceRanking::Entry> entries;
  entries.reserve(sources.size());
  for (const auto& ds : sources) {
    if (ds.curves.empty()) throw DataError("rank_sources: source dataset '" + ds.name + "' is empty");
    const auto source_grid = to_grid_curves(ds.curves, grid_n);
    entries.push_back({ds.name, average_dtw(source_grid, target_grid)});
  }
  return make_ranking(std::move(entries));
}

double euclidean_distance(const GridCurve& a, const GridCurve& b) {
  require_same_length(a, b);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.stress_norm.size(); ++k) sum += sq(a.stress_norm[k] - b.stress_norm[k]);
  return sum;
}

double pearson_similarity(const GridCurve& a, const GridCurve& b) {
  require_same_length(a, b);
  return metrics::pearson(a.stress_norm, b.stress_norm);
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  for (std::size_t l = 0; l < m.cols(); ++l) out << (l ? "," : "") << l;
  out << '\n';
  char buf[64];
  for (std::size_t k = 0; k < m.rows(); ++k) {
    for (std::size_t l = 0; l < m.cols(); ++l) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(k, l));
      if (l) out << ',';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace

void write_dtw_csv(const std::filesystem::path& dir, const CostMatrices& matrices, const WarpingPath& path) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "local.csv", matrices.local);
  write_matrix_csv(dir / "cumulative.csv", matrices.cumulative);
  std::ofstream out(dir / "path.csv", std::ios::binary);
  if (!out) throw DataError("cannot write file: " + (dir / "path.csv").string());
  out << "k,l\n";
  for (const auto& [k, l] : path) out << k << ',' << l << '\n';
}

}  // namespace curvetransfer
