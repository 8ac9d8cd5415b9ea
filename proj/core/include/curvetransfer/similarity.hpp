#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curvetransfer/curve_model.hpp"
#include "curvetransfer/matrix.hpp"

namespace curvetransfer {

// Dynamic time warping over normalized stress sequences.
//
// The local cost of aligning point k of one curve with point l of the other
// is the squared stress difference. The cumulative cost D is built with the
// unconstrained symmetric step pattern {(1,0), (0,1), (1,1)}, first row and
// column as running sums, and the DTW distance is D at the last cell: the
// raw sum of squared differences along the cheapest warping path, with no
// square root and no length normalization.
//
// Indices in this API are zero-based.

using WarpingPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct CostMatrices {
  Matrix local;
  Matrix cumulative;
};

struct DtwResult {
  double distance = 0.0;
  WarpingPath path;
};

/// Datasets ranked by ascending average DTW to the target training curves.
struct SourceRanking {
  struct Entry {
    std::string source;
    double avg_dtw = 0.0;

    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;
  std::string selected;

  bool operator==(const SourceRanking&) const = default;
};

Matrix local_distance_matrix(std::span<const double> a, std::span<const double> b);
/// Throws DataError when the grids differ in length.
Matrix local_distance_matrix(const GridCurve& a, const GridCurve& b);

Matrix cumulative_cost(const Matrix& local);

CostMatrices cost_matrices(std::span<const double> a, std::span<const double> b);

/// Backtracks from the last cell. Among equal-cost predecessors the diagonal
/// step wins, then (k-1, l), then (k, l-1).
WarpingPath backtrack_path(const Matrix& cumulative);

DtwResult dtw_distance(std::span<const double> a, std::span<const double> b);
DtwResult dtw_distance(const GridCurve& a, const GridCurve& b);

/// Distance only, O(min) memory. Bitwise equal to dtw_distance(a, b).distance.
double dtw_cost(std::span<const double> a, std::span<const double> b);

/// Minimum path cost by enumerating every valid warping path. Exponential;
/// both sequences must be 1..10 long.
double brute_force_dtw(std::span<const double> a, std::span<const double> b);
inline constexpr std::size_t kBruteForceMaxLength = 10;

/// Mean DTW over all source x target pairs.
double average_dtw(std::span<const GridCurve> source, std::span<const GridCurve> target);

/// Normalizes and grids every curve, computes the average DTW of each source
/// dataset against the target *training* curves, sorts ascending (ties by
/// name) and selects the first.
SourceRanking rank_sources(std::span<const Dataset> sources, std::span<const RawCurve> target_train,
                           std::size_t grid_n = kDefaultGridSize);

/// Orders entries by (avg_dtw, source) and sets `selected`.
SourceRanking make_ranking(std::vector<SourceRanking::Entry> entries);

/// Point-by-point sum of squared stress differences (no warping).
double euclidean_distance(const GridCurve& a, const GridCurve& b);

/// Pearson correlation of the two normalized stress vectors.
double pearson_similarity(const GridCurve& a, const GridCurve& b);

/// Writes local.csv, cumulative.csv (row-major, header row of column grid
/// indices) and path.csv (k,l) into `dir`.
void write_dtw_csv(const std::filesystem::path& dir, const CostMatrices& matrices, const WarpingPath& path);

}  // namespace curvetransfer
