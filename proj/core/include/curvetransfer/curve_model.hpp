#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace curvetransfer {

/// Number of points on the common strain grid used for curve comparison.
inline constexpr std::size_t kDefaultGridSize = 120;

struct ParamSpec {
  std::string name;
  std::string unit;

  bool operator==(const ParamSpec&) const = default;
};

struct ParamValue {
  std::string name;
  double value = 0.0;

  bool operator==(const ParamValue&) const = default;
};

/// One tensile sample: measured (strain, stress) points plus the constant
/// process parameters it was built with. Strain is dimensionless, stress in
/// MPa. Parameters are kept in the owning dataset's schema order.
struct RawCurve {
  std::string sample_id;
  std::vector<double> strain;
  std::vector<double> stress;
  std::vector<ParamValue> params;

  std::size_t size() const noexcept { return strain.size(); }
  std::vector<double> param_values() const;
  std::optional<double> param(std::string_view name) const;

  bool operator==(const RawCurve&) const = default;
};

enum class DatasetRole { source, target };

std::string_view to_string(DatasetRole role);
DatasetRole parse_role(std::string_view text);

/// Named collection of curves sharing one process-parameter schema.
struct Dataset {
  std::string name;
  DatasetRole role = DatasetRole::source;
  std::vector<ParamSpec> param_schema;
  std::vector<RawCurve> curves;

  const RawCurve* find(std::string_view sample_id) const;
  const RawCurve& at(std::string_view sample_id) const;
  std::vector<std::string> sample_ids() const;
  /// Curves with the given ids, in the order given. Throws DataError on an unknown id.
  std::vector<RawCurve> select(std::span<const std::string> ids) const;

  bool operator==(const Dataset&) const = default;
};

/// Throws DataError when curves disagree with the schema or ids repeat.
void check_dataset(const Dataset& dataset);

/// Curve normalized by its own maxima.
struct NormalizedCurve {
  std::vector<double> strain;
  std::vector<double> stress;
};

/// Normalized stress sampled on an evenly spaced strain grid over [0, 1].
struct GridCurve {
  std::string sample_id;
  std::vector<double> grid;
  std::vector<double> stress_norm;

  std::size_t size() const noexcept { return grid.size(); }
};

// CSV with header `strain,stress`, one point per row.
RawCurve read_curve_csv(const std::filesystem::path& path, std::string sample_id = {});
RawCurve parse_curve_csv(std::string_view text, std::string_view origin, std::string sample_id = {});
void write_curve_csv(const std::filesystem::path& path, const RawCurve& curve);

/// Reads a JSON manifest and every per-sample CSV it references (paths are
/// relative to the manifest). Each curve is passed through validate_curve.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `<dir>/<file_stem>.json` plus one CSV per sample under
/// `<dir>/<file_stem>/`. The output loads back with load_dataset.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                                    std::string_view file_stem = {});

/// Sorts by strain, clamps negative stress readings to 0, merges runs of
/// equal strain by averaging their stresses. Requires finite values and at
/// least two distinct strains.
RawCurve validate_curve(RawCurve curve);

/// Divides strain and stress by their respective maxima.
NormalizedCurve normalize_curve(const RawCurve& curve);
NormalizedCurve normalize_curve(std::span<const double> strain, std::span<const double> stress);

/// Piecewise-linear interpolation onto `n` evenly spaced points in [0, 1].
/// Grid points left of the first strain take the first stress; right of the
/// last strain, the last stress.
GridCurve resample_to_grid(std::span<const double> strain_norm, std::span<const double> stress_norm,
                           std::size_t n, std::string sample_id = {});

/// normalize_curve followed by resample_to_grid.
GridCurve to_grid_curve(const RawCurve& curve, std::size_t n = kDefaultGridSize);
std::vector<GridCurve> to_grid_curves(std::span<const RawCurve> curves, std::size_t n = kDefaultGridSize);

/// Evenly spaced grid with exact endpoints 0 and 1.
std::vector<double> unit_grid(std::size_t n);

}  // namespace curvetransfer
