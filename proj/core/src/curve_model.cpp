#include "curvetransfer/curve_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "curvetransfer/error.hpp"

namespace curvetransfer {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<double> RawCurve::param_values() const {
  std::vector<double> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.value);
  return values;
}

std::optional<double> RawCurve::param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  return std::nullopt;
}

std::string_view to_string(DatasetRole role) {
  return role == DatasetRole::source ? "source" : "target";
}

DatasetRole parse_role(std::string_view text) {
  if (text == "source") return DatasetRole::source;
  if (text == "target") return DatasetRole::target;
  throw DataError("unknown dataset role '" + std::string(text) + "' (expected source or target)");
}

const RawCurve* Dataset::find(std::string_view sample_id) const {
  for (const auto& c : curves)
    if (c.sample_id == sample_id) return &c;
  return nullptr;
}

const RawCurve& Dataset::at(std::string_view sample_id) const {
  if (const auto* c = find(sample_id)) return *c;
  throw DataError("dataset '" + name + "' has no sample '" + std::string(sample_id) + "'");
}

std::vector<std::string> Dataset::sample_ids() const {
  std::vector<std::string> ids;
  ids.reserve(curves.size());
  for (const auto& c : curves) ids.push_back(c.sample_id);
  return ids;
}

std::vector<RawCurve> Dataset::select(std::span<const std::string> ids) const {
  std::vector<RawCurve> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return out;
}

void check_dataset(const Dataset& dataset) {
  std::set<std::string> seen;
  for (const auto& curve : dataset.curves) {
    if (!seen.insert(curve.sample_id).second)
      throw DataError("dataset '" + dataset.name + "': duplicate sample_id '" + curve.sample_id + "'");
    if (curve.params.size() != dataset.param_schema.size())
      throw DataError("dataset '" + dataset.name + "': sample '" + curve.sample_id + "' has " +
                      std::to_string(curve.params.size()) + " parameters, schema declares " +
                      std::to_string(dataset.param_schema.size()));
    for (std::size_t j = 0; j < curve.params.size(); ++j) {
      if (curve.params[j].name != dataset.param_schema[j].name)
        throw DataError("dataset '" + dataset.name + "': sample '" + curve.sample_id + "' parameter '" +
                        curve.params[j].name + "' does not match schema entry '" +
                        dataset.param_schema[j].name + "'");
    }
    if (curve.strain.size() != curve.stress.size())
      throw DataError("dataset '" + dataset.name + "': sample '" + curve.sample_id +
                      "' has mismatched strain/stress lengths");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_real(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

RawCurve parse_curve_csv(std::string_view text, std::string_view origin, std::string sample_id) {
  RawCurve curve;
  curve.sample_id = std::move(sample_id);
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
    text.remove_prefix(3);

  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (!header_seen) {
      if (line != "strain,stress")
        throw DataError(std::string(origin) + ": expected header 'strain,stress', got '" + std::string(line) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    auto comma = line.find(',');
    double strain = 0.0;
    double stress = 0.0;
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos ||
        !parse_real(line.substr(0, comma), strain) || !parse_real(line.substr(comma + 1), stress))
      throw DataError(std::string(origin) + ":" + std::to_string(line_no) + ": malformed row '" +
                      std::string(line) + "'");
    curve.strain.push_back(strain);
    curve.stress.push_back(stress);
  }
  if (!header_seen) throw DataError(std::string(origin) + ": empty curve file");
  return curve;
}

RawCurve read_curve_csv(const fs::path& path, std::string sample_id) {
  return parse_curve_csv(read_file(path), path.string(), std::move(sample_id));
}

void write_curve_csv(const fs::path& path, const RawCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << "strain,stress\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << format_real(curve.strain[i]) << ',' << format_real(curve.stress[i]) << '\n';
  if (!out) throw DataError("failed writing file: " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path) {
  const std::string origin = manifest_path.string();
  json doc;
  try {
    doc = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": invalid JSON: " + e.what());
  }

  Dataset dataset;
  try {
    dataset.name = doc.at("name").get<std::string>();
    dataset.role = parse_role(doc.at("role").get<std::string>());
    for (const auto& p : doc.at("param_schema"))
      dataset.param_schema.push_back({p.at("name").get<std::string>(), p.value("unit", std::string{})});

    const fs::path base = manifest_path.parent_path();
    for (const auto& s : doc.at("samples")) {
      const auto id = s.at("id").get<std::string>();
      const auto file = s.at("file").get<std::string>();
      const json& params = s.contains("params") ? s.at("params") : json::object();

      for (const auto& [key, value] : params.items()) {
        auto it = std::find_if(dataset.param_schema.begin(), dataset.param_schema.end(),
                               [&](const ParamSpec& p) { return p.name == key; });
        if (it == dataset.param_schema.end())
          throw DataError(origin + ": sample '" + id + "' declares parameter '" + key +
                          "' which is not in param_schema");
      }
      RawCurve curve = read_curve_csv(base / file, id);
      for (const auto& spec : dataset.param_schema) {
        if (!params.contains(spec.name))
          throw DataError(origin + ": sample '" + id + "' is missing parameter '" + spec.name + "'");
        curve.params.push_back({spec.name, params.at(spec.name).get<double>()});
      }
      try {
        dataset.curves.push_back(validate_curve(std::move(curve)));
      } catch (const DataError& e) {
        throw DataError(origin + ": sample '" + id + "': " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw DataError(origin + ": malformed manifest: " + e.what());
  }
  check_dataset(dataset);
  return dataset;
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir, std::string_view file_stem) {
  check_dataset(dataset);
  const std::string stem = file_stem.empty() ? dataset.name : std::string(file_stem);
  fs::create_directories(dir / stem);

  json doc;
  doc["name"] = dataset.name;
  doc["role"] = std::string(to_string(dataset.role));
  doc["param_schema"] = json::array();
  for (const auto& p : dataset.param_schema) doc["param_schema"].push_back({{"name", p.name}, {"unit", p.unit}});
  doc["samples"] = json::array();
  for (const auto& curve : dataset.curves) {
    const std::string rel = stem + "/" + curve.sample_id + ".csv";
    write_curve_csv(dir / rel, curve);
    json params = json::object();
    for (const auto& p : curve.params) params[p.name] = p.value;
    doc["samples"].push_back({{"id", curve.sample_id}, {"file", rel}, {"params", params}});
  }

  const fs::path manifest = dir / (stem + ".json");
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + manifest.string());
  out << doc.dump(2) << '\n';
  return manifest;
}

RawCurve validate_curve(RawCurve curve) {
  if (curve.strain.size() != curve.stress.size())
    throw DataError("strain and stress sequences differ in length");
  if (curve.strain.size() < 2) throw DataError("curve needs at least 2 points");
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (!std::isfinite(curve.strain[i]) || !std::isfinite(curve.stress[i]))
      throw DataError("non-finite value at point " + std::to_string(i));

  std::vector<std::size_t> order(curve.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return curve.strain[a] < curve.strain[b]; });

  std::vector<double> strain;
  std::vector<double> stress;
  strain.reserve(order.size());
  stress.reserve(order.size());
  for (std::size_t k = 0; k < order.size();) {
    const double x = curve.strain[order[k]];
    double sum = 0.0;
    std::size_t count = 0;
    for (; k < order.size() && curve.strain[order[k]] == x; ++k, ++count)
      sum += std::max(0.0, curve.stress[order[k]]);
    strain.push_back(x);
    stress.push_back(sum / static_cast<double>(count));
  }
  if (strain.size() < 2) throw DataError("fewer than 2 distinct strain values after merging duplicates");

  curve.strain = std::move(strain);
  curve.stress = std::move(stress);
  return curve;
}

NormalizedCurve normalize_curve(std::span<const double> strain, std::span<const double> stress) {
  if (strain.size() != stress.size() || strain.empty())
    throw DataError("normalize_curve: strain/stress must be non-empty and equal length");
  const double max_strain = *std::max_element(strain.begin(), strain.end());
  const double max_stress = *std::max_element(stress.begin(), stress.end());
  if (!(max_strain > 0.0)) throw DataError("cannot normalize curve: maximum strain is not positive");
  if (!(max_stress > 0.0)) throw DataError("cannot normalize curve: maximum stress is not positive (flat curve)");

  NormalizedCurve out;
  out.strain.reserve(strain.size());
  out.stress.reserve(stress.size());
  for (double v : strain) out.strain.push_back(v / max_strain);
  for (double v : stress) out.stress.push_back(v / max_stress);
  return out;
}

NormalizedCurve normalize_curve(const RawCurve& curve) {
  try {
    return normalize_curve(curve.strain, curve.stress);
  } catch (const DataError& e) {
    throw DataError("sample '" + curve.sample_id + "': " + e.what());
  }
}

std::vector<double> unit_grid(std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = 1.0;
  return grid;
}

GridCurve resample_to_grid(std::span<const double> strain_norm, std::span<const double> stress_norm,
                           std::size_t n, std::string sample_id) {
  if (n < 2) throw DataError("grid size must be at least 2");
  if (strain_norm.size() != stress_norm.size() || strain_norm.empty())
    throw DataError("resample_to_grid: strain/stress must be non-empty and equal length");
  for (std::size_t i = 1; i < strain_norm.size(); ++i)
    if (!(strain_norm[i] > strain_norm[i - 1]))
      throw DataError("resample_to_grid: strain must be strictly increasing");

  GridCurve out;
  out.sample_id = std::move(sample_id);
  out.grid = unit_grid(n);
  out.stress_norm.resize(n);
  const std::size_t last = strain_norm.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = out.grid[i];
    if (g <= strain_norm.front()) {
      out.stress_norm[i] = stress_norm.front();
    } else if (g >= strain_norm[last]) {
      out.stress_norm[i] = stress_norm[last];
    } else {
      // First knot strictly greater than g; the segment starts one before it.
      const auto hi = static_cast<std::size_t>(
          std::upper_bound(strain_norm.begin(), strain_norm.end(), g) - strain_norm.begin());
      const std::size_t lo = hi - 1;
      const double t = (g - strain_norm[lo]) / (strain_norm[hi] - strain_norm[lo]);
      out.stress_norm[i] = stress_norm[lo] + t * (stress_norm[hi] - stress_norm[lo]);
    }
  }
  return out;
}

GridCurve to_grid_curve(const RawCurve& curve, std::size_t n) {
  const auto norm = normalize_curve(curve);
  return resample_to_grid(norm.strain, norm.stress, n, curve.sample_id);
}

std::vector<GridCurve> to_grid_curves(std::span<const RawCurve> curves, std::size_t n) {
  std::vector<GridCurve> out;
  out.reserve(curves.size());
  for (const auto& c : curves) out.push_back(to_grid_curve(c, n));
  return out;
}

}  // namespace curvetransfer
