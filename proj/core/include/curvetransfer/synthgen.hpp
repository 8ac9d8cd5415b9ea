#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "curvetransfer/curve_model.hpp"

namespace curvetransfer::synth {

enum class Family {
  plateau,     // smooth saturating rise to a post-yield plateau
  hardening,   // steady work-hardening after yield
  yield_drop,  // upper yield peak, drop, damped oscillation about a lower plateau
  brittle,     // linear to fracture
};

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

/// Shape of one synthetic material. The elastic segment is stress = E * strain
/// up to `yield_strain`; the post-yield segment depends on the family:
///
///   plateau    s_y + (s_u - s_y) * (1 - exp(-k x)) / (1 - exp(-k)),  k = shape
///   hardening  s_y + (s_u - s_y) * x^shape
///   yield_drop s_u + (s_y - s_u) * exp(-x / 0.04)
///              + 0.06 s_y * exp(-2 x) * sin(2 pi shape x) * (1 - exp(-x / 0.04))
///   brittle    E * strain all the way (ultimate_stress unused)
///
/// with s_y = E * yield_strain and x in [0, 1] the post-yield strain fraction.
/// For yield_drop, `ultimate_stress` is the lower plateau the curve settles
/// to and must lie below s_y; for plateau and hardening it is the final
/// stress and must be at least s_y.
struct FamilySpec {
  Family family = Family::plateau;
  double modulus = 1000.0;         // MPa
  double yield_strain = 0.03;
  double ultimate_stress = 40.0;   // MPa
  double failure_strain = 0.15;
  double shape = 5.0;
  /// Per-parameter coefficient c: stresses scale by 1 + sum c * (u - 0.5)
  /// where u is the parameter's level normalized over the DOE.
  std::map<std::string, double> param_sensitivity;
  /// Same form, applied to the failure strain.
  std::map<std::string, double> strain_sensitivity;
  double noise_sd = 0.0;  // MPa, additive Gaussian
  std::size_t points_per_curve = 40;

  double yield_stress() const noexcept { return modulus * yield_strain; }
  /// Throws DataError when the spec is inconsistent.
  void validate() const;
};

/// Full-factorial design: every combination of levels, first parameter
/// varying slowest, each combination repeated `replicates` times.
struct Doe {
  std::vector<ParamSpec> schema;
  std::vector<std::vector<double>> levels;
  std::size_t replicates = 1;

  std::vector<std::vector<double>> points() const;
};

/// Noise-free stress at `strain` for a spec whose sensitivities are already applied.
double family_stress(const FamilySpec& spec, double strain);

/// One curve per DOE point (ids "1", "2", ...). Every curve draws its noise
/// from a sub-seed derived from (seed, index), so output does not depend on
/// generation order.
Dataset generate_dataset(const std::string& name, DatasetRole role, const FamilySpec& spec, const Doe& doe,
                         std::uint64_t seed);

/// Four source materials with distinct shapes and three metal-scale targets
/// (stresses about 10x the matched source), each shaped after one source.
struct Suite {
  std::vector<Dataset> sources;
  std::vector<Dataset> targets;
  std::map<std::string, std::string> ground_truth;  // target -> matching source
  std::map<std::string, Family> families;          // every dataset's family
  std::uint64_t seed = 0;
};

Suite standard_suite(std::uint64_t seed);

}  // namespace curvetransfer::synth
