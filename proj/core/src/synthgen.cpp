#include "curvetransfer/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "curvetransfer/error.hpp"

namespace curvetransfer::synth {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::plateau: return "plateau";
    case Family::hardening: return "hardening";
    case Family::yield_drop: return "yield_drop";
    case Family::brittle: return "brittle";
  }
  return "plateau";
}

Family parse_family(std::string_view text) {
  if (text == "plateau") return Family::plateau;
  if (text == "hardening") return Family::hardening;
  if (text == "yield_drop") return Family::yield_drop;
  if (text == "brittle") return Family::brittle;
  throw DataError("unknown curve family '" + std::string(text) + "'");
}

void FamilySpec::validate() const {
  if (!(modulus > 0.0)) throw DataError("family spec: modulus must be positive");
  if (!(yield_strain > 0.0 && yield_strain < failure_strain))
    throw DataError("family spec: need 0 < yield_strain < failure_strain");
  if (!(noise_sd >= 0.0)) throw DataError("family spec: noise_sd must be >= 0");
  if (points_per_curve < 2) throw DataError("family spec: need at least 2 points per curve");
  switch (family) {
    case Family::plateau:
    case Family::hardening:
      if (ultimate_stress < yield_stress())
        throw DataError("family spec: ultimate stress below yield stress for a rising family");
      if (!(shape > 0.0)) throw DataError("family spec: shape must be positive");
      break;
    case Family::yield_drop:
      if (!(ultimate_stress > 0.0 && ultimate_stress < yield_stress()))
        throw DataError("family spec: yield_drop plateau must lie between 0 and the yield stress");
      break;
    case Family::brittle:
      break;
  }
}

std::vector<std::vector<double>> Doe::points() const {
  if (levels.size() != schema.size()) throw DataError("DOE: one level list per parameter required");
  std::vector<std::vector<double>> out{{}};
  for (const auto& lv : levels) {
    if (lv.empty()) throw DataError("DOE: parameter with no levels");
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out)
      for (double v : lv) {
        auto p = prefix;
        p.push_back(v);
        next.push_back(std::move(p));
      }
    out = std::move(next);
  }
  std::vector<std::vector<double>> replicated;
  for (const auto& p : out)
    for (std::size_t r = 0; r < std::max<std::size_t>(replicates, 1); ++r) replicated.push_back(p);
  return replicated;
}

double family_stress(const FamilySpec& spec, double strain) {
  if (spec.family == Family::brittle || strain <= spec.yield_strain) return spec.modulus * strain;
  const double sy = spec.yield_stress();
  const double su = spec.ultimate_stress;
  const double x = std::clamp((strain - spec.yield_strain) / (spec.failure_strain - spec.yield_strain), 0.0, 1.0);
  switch (spec.family) {
    case Family::plateau: {
      const double k = spec.shape;
      return sy + (su - sy) * (1.0 - std::exp(-k * x)) / (1.0 - std::exp(-k));
    }
    case Family::hardening:
      return sy + (su - sy) * std::pow(x, spec.shape);
    case Family::yield_drop: {
      const double settle = std::exp(-x / 0.04);
      const double ripple = 0.06 * sy * std::exp(-2.0 * x) * std::sin(2.0 * std::numbers::pi * spec.shape * x);
      return su + (sy - su) * settle + ripple * (1.0 - settle);
    }
    case Family::brittle:
      break;
  }
  return spec.modulus * strain;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double sensitivity_factor(const std::map<std::string, double>& coeffs, const std::vector<ParamSpec>& schema,
                          const std::vector<double>& normalized) {
  double f = 1.0;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto it = coeffs.find(schema[j].name);
    if (it != coeffs.end()) f += it->second * (normalized[j] - 0.5);
  }
  return f;
}

}  // namespace

Dataset generate_dataset(const std::string& name, DatasetRole role, const FamilySpec& spec, const Doe& doe,
                         std::uint64_t seed) {
  spec.validate();
  const auto points = doe.points();
  if (points.empty()) throw DataError("DOE is empty");
  for (const auto& [param, c] : spec.param_sensitivity) {
    (void)c;
    if (std::none_of(doe.schema.begin(), doe.schema.end(), [&](const ParamSpec& p) { return p.name == param; }))
      throw DataError("family spec names parameter '" + param + "' which is not in the DOE");
  }

  std::vector<double> lo(doe.schema.size()), hi(doe.schema.size());
  for (std::size_t j = 0; j < doe.schema.size(); ++j) {
    const auto [mn, mx] = std::minmax_element(doe.levels[j].begin(), doe.levels[j].end());
    lo[j] = *mn;
    hi[j] = *mx;
  }

  Dataset ds;
  ds.name = name;
  ds.role = role;
  ds.param_schema = doe.schema;
  for (std::size_t idx = 0; idx < points.size(); ++idx) {
    const auto& point = points[idx];
    std::vector<double> u(point.size());
    for (std::size_t j = 0; j < point.size(); ++j) u[j] = hi[j] > lo[j] ? (point[j] - lo[j]) / (hi[j] - lo[j]) : 0.5;

    FamilySpec local = spec;
    const double stress_scale = sensitivity_factor(spec.param_sensitivity, doe.schema, u);
    const double strain_scale = sensitivity_factor(spec.strain_sensitivity, doe.schema, u);
    if (!(stress_scale > 0.0) || !(strain_scale > 0.0))
      throw DataError("family spec sensitivities drive a DOE point to a non-positive scale");
    local.modulus *= stress_scale;
    local.ultimate_stress *= stress_scale;
    local.failure_strain *= strain_scale;
    if (!(local.failure_strain > local.yield_strain))
      throw DataError("family spec sensitivities push failure strain below yield strain");

    std::mt19937_64 rng(derive_seed(seed, idx, 0x5eed));
    std::normal_distribution<double> noise(0.0, 1.0);

    RawCurve curve;
    curve.sample_id = std::to_string(idx + 1);
    const std::size_t n = spec.points_per_curve;
    for (std::size_t i = 0; i < n; ++i) {
      const double strain = local.failure_strain * static_cast<double>(i) / static_cast<double>(n - 1);
      double stress = family_stress(local, strain);
      const double z = noise(rng);
      if (i > 0 && spec.noise_sd > 0.0) stress = std::max(0.0, stress + spec.noise_sd * z);
      curve.strain.push_back(strain);
      curve.stress.push_back(stress);
    }
    for (std::size_t j = 0; j < doe.schema.size(); ++j) curve.params.push_back({doe.schema[j].name, point[j]});
    ds.curves.push_back(std::move(curve));
  }
  return ds;
}

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

struct Material {
  std::string name;
  DatasetRole role;
  FamilySpec spec;
  Doe doe;
};

// Nominal materials. Targets reuse their matched source's sensitivity
// pattern by parameter position, at ten times the stress.
std::vector<Material> nominal_materials() {
  std::vector<Material> m;

  FamilySpec nylon;
  nylon.family = Family::yield_drop;
  nylon.modulus = 1500.0;
  nylon.yield_strain = 0.04;
  nylon.ultimate_stress = 46.0;
  nylon.failure_strain = 0.30;
  nylon.shape = 4.0;
  nylon.param_sensitivity = {{"print_temperature", 0.25}, {"print_speed", -0.15}};
  nylon.strain_sensitivity = {{"print_temperature", 0.20}, {"print_speed", -0.10}};
  nylon.noise_sd = 0.2;
  m.push_back({"nylon_like", DatasetRole::source, nylon,
               {{{"print_temperature", "C"}, {"print_speed", "mm/s"}},
                {linspace(220, 260, 5), linspace(10, 50, 5)}}});

  FamilySpec pla;
  pla.family = Family::hardening;
  pla.modulus = 2200.0;
  pla.yield_strain = 0.012;
  pla.ultimate_stress = 55.0;
  pla.failure_strain = 0.06;
  pla.shape = 0.8;
  pla.param_sensitivity = {{"print_temperature", 0.30}, {"print_speed", -0.20}};
  pla.strain_sensitivity = {{"print_temperature", 0.15}, {"print_speed", -0.10}};
  pla.noise_sd = 0.2;
  m.push_back({"pla_like", DatasetRole::source, pla,
               {{{"print_temperature", "C"}, {"print_speed", "mm/s"}},
                {linspace(180, 260, 5), linspace(10, 90, 5)}}});

  FamilySpec cfabs;
  cfabs.family = Family::brittle;
  cfabs.modulus = 2500.0;
  cfabs.yield_strain = 0.01;
  cfabs.ultimate_stress = 50.0;
  cfabs.failure_strain = 0.02;
  cfabs.param_sensitivity = {{"print_temperature", 0.20}, {"print_speed", -0.10}};
  cfabs.strain_sensitivity = {{"print_temperature", 0.20}, {"print_speed", -0.10}};
  cfabs.noise_sd = 0.2;
  m.push_back({"cfabs_like", DatasetRole::source, cfabs,
               {{{"print_temperature", "C"}, {"print_speed", "mm/s"}},
                {linspace(200, 280, 5), linspace(10, 90, 5)}}});

  FamilySpec resin;
  resin.family = Family::plateau;
  resin.modulus = 1300.0;
  resin.yield_strain = 0.025;
  resin.ultimate_stress = 40.0;
  resin.failure_strain = 0.15;
  resin.shape = 5.0;
  resin.param_sensitivity = {{"uv_exposure", 0.30}, {"post_processing", 0.20}};
  resin.strain_sensitivity = {{"uv_exposure", -0.15}, {"post_processing", 0.10}};
  resin.noise_sd = 0.2;
  m.push_back({"resin_like", DatasetRole::source, resin,
               {{{"uv_exposure", "s"}, {"post_processing", "min"}}, {linspace(2, 4, 5), linspace(2, 10, 5)}}});

  FamilySpec alsi = resin;
  alsi.modulus = 50000.0;
  alsi.yield_strain = 0.006;
  alsi.ultimate_stress = 400.0;
  alsi.failure_strain = 0.06;
  alsi.shape = 5.5;
  alsi.param_sensitivity = {{"laser_power", 0.30}, {"scanning_speed", 0.20}};
  alsi.strain_sensitivity = {{"laser_power", -0.15}, {"scanning_speed", 0.10}};
  alsi.noise_sd = 2.0;
  m.push_back({"alsi10mg_like", DatasetRole::target, alsi,
               {{{"laser_power", "W"}, {"scanning_speed", "mm/s"}},
                {linspace(60, 460, 5), linspace(250, 3000, 5)}}});

  FamilySpec ti = resin;
  ti.modulus = 44625.0;
  ti.yield_strain = 0.008;
  ti.ultimate_stress = 420.0;
  ti.failure_strain = 0.09;
  ti.shape = 4.5;
  ti.param_sensitivity = {{"laser_power", 0.30}, {"scanning_speed", 0.20}};
  ti.strain_sensitivity = {{"laser_power", -0.15}, {"scanning_speed", 0.10}};
  ti.noise_sd = 2.0;
  m.push_back({"ti6al4v_like", DatasetRole::target, ti,
               {{{"laser_power", "W"}, {"scanning_speed", "mm/s"}},
                {linspace(175, 375, 5), linspace(600, 1000, 5)}}});

  FamilySpec steel = nylon;
  steel.modulus = 24000.0;
  steel.yield_strain = 0.025;
  steel.ultimate_stress = 465.0;
  steel.failure_strain = 0.19;
  steel.shape = 4.0;
  steel.param_sensitivity = {{"build_angle", 0.25}, {"nozzle_angle", -0.15}};
  steel.strain_sensitivity = {{"build_angle", 0.20}, {"nozzle_angle", -0.10}};
  steel.noise_sd = 2.0;
  m.push_back({"steel_like", DatasetRole::target, steel,
               {{{"build_angle", "deg"}, {"nozzle_angle", "deg"}}, {{0.0, 45.0}, {0.0, 22.5, 45.0}}, 3}});
  return m;
}

}  // namespace

Suite standard_suite(std::uint64_t seed) {
  Suite suite;
  suite.seed = seed;
  suite.ground_truth = {{"alsi10mg_like", "resin_like"}, {"ti6al4v_like", "resin_like"}, {"steel_like", "nylon_like"}};
  auto materials = nominal_materials();
  for (std::size_t k = 0; k < materials.size(); ++k) {
    auto& mat = materials[k];
    // Seed-dependent jitter of the nominal shape, within +-6%. A target
    // shares the draw of its matched source so the pair keeps one shape.
    const auto gt = suite.ground_truth.find(mat.name);
    const std::string& group = gt == suite.ground_truth.end() ? mat.name : gt->second;
    std::uint64_t group_index = 0;
    while (materials[group_index].name != group) ++group_index;
    std::mt19937_64 rng(derive_seed(seed, group_index, 0x7a11));
    std::uniform_real_distribution<double> jitter(0.94, 1.06);
    mat.spec.modulus *= jitter(rng);
    mat.spec.ultimate_stress = mat.spec.family == Family::yield_drop
                                   ? std::min(mat.spec.ultimate_stress * jitter(rng), 0.95 * mat.spec.yield_stress())
                                   : std::max(mat.spec.ultimate_stress * jitter(rng), mat.spec.yield_stress());
    mat.spec.failure_strain *= jitter(rng);

    auto ds = generate_dataset(mat.name, mat.role, mat.spec, mat.doe, derive_seed(seed, k, 0xda7a));
    suite.families[mat.name] = mat.spec.family;
    (mat.role == DatasetRole::source ? suite.sources : suite.targets).push_back(std::move(ds));
  }
  return suite;
}

}  // namespace curvetransfer::synth
