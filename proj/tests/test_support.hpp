#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "curvetransfer/curve_model.hpp"

namespace curvetransfer::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "curvetransfer_";
    if (info) name += std::string(info->test_suite_name()) + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline GridCurve random_grid_curve(std::mt19937_64& rng, std::size_t n) {
  GridCurve g;
  g.grid = unit_grid(n);
  g.stress_norm = random_vector(rng, n);
  return g;
}

inline RawCurve make_curve(std::string id, std::vector<double> strain, std::vector<double> stress,
                           std::vector<ParamValue> params = {}) {
  return RawCurve{std::move(id), std::move(strain), std::move(stress), std::move(params)};
}

// Monotone curve with a linear rise and a flat top, params appended.
inline RawCurve ramp_curve(std::string id, std::size_t n, double peak, std::vector<ParamValue> params = {}) {
  std::vector<double> strain(n), stress(n);
  for (std::size_t i = 0; i < n; ++i) {
    strain[i] = 0.01 * static_cast<double>(i);
    stress[i] = peak * std::min(1.0, 2.0 * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return make_curve(std::move(id), std::move(strain), std::move(stress), std::move(params));
}

}  // namespace curvetransfer::testing
