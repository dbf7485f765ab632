#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plateopt/compliance.hpp"
#include "plateopt/fe_solver.hpp"
#include "plateopt/load_optimizer.hpp"
#include "plateopt/target_compare.hpp"

namespace plateopt {

struct NoiseSpec {
    double sigma = 0; // mm, additive Gaussian on w
    std::uint64_t seed = 0;
};

// Adds seeded Gaussian noise to every unmasked value (row-major order).
void add_noise(ScalarField& field, const NoiseSpec& noise);

// Simply supported rectangular thin plate [0,a]x[0,b] under uniform pressure.
// deflection() is positive along the pressure; navier_field() stores the z
// displacement for pressure acting along -z (negative values).
struct NavierPlate {
    double a = 0, b = 0;       // mm
    double thickness = 0;      // mm
    double E = 0, nu = 0.3;    // MPa, -
    double pressure = 0;       // MPa
    double spacing = 0;        // output grid spacing, mm
    int terms = 1001;          // highest odd harmonic in each direction

    double rigidity() const { return E * thickness * thickness * thickness / (12.0 * (1.0 - nu * nu)); }
    // Throws ConfigError outside thin-plate validity (t <= min(a, b) / 10) or
    // for non-positive sizes, |nu| >= 0.5, or a grid not fitting the plate.
    void validate() const;
    double deflection(double x, double y) const;
};

ScalarField navier_field(const NavierPlate& plate);

enum class TargetVariant { ForwardSolve, Analytic, File };

struct PlantedLoad {
    double x = 0, y = 0;
    double F = 0; // N, along the recipe direction
};

struct TargetRecipe {
    TargetVariant variant = TargetVariant::ForwardSolve;
    std::vector<PlantedLoad> loads;
    LoadDirection direction = LoadDirection::MinusZ;
    NavierPlate plate;
    std::filesystem::path path;
    NoiseSpec noise;
};

// Recipe JSON:
//   {"variant": "forward-solve", "loads": [{"x":..,"y":..,"F":..}], "direction": "-z"}
//   {"variant": "analytic", "benchmark": "navier-simply-supported-uniform",
//    "a":.., "b":.., "thickness":.., "E":.., "nu":.., "pressure":.., "spacing":.., "terms":..}
//   {"variant": "file", "path": ".."}
// each with an optional "noise": {"sigma":.., "seed":..}. Relative file paths
// resolve against base_dir.
TargetRecipe parse_recipe(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct GeneratedTarget {
    ScalarField field;
    std::optional<LoadCase> loads; // forward-solve only
    nlohmann::json record;         // recipe as applied, with resolved node ids
};

// The forward-solve variant needs the assembled model.
GeneratedTarget generate(const TargetRecipe& recipe, const PlateModel* model = nullptr,
                         const SystemMatrix* sys = nullptr);

struct NoiseSweepRow {
    double sigma = 0;
    int trials = 0;
    int nodes_recovered = 0;        // trials returning the planted node triple
    int loaded_nodes_recovered = 0; // trials matching every planted node with F* above the zero threshold
    double mean_amplitude_error = 0; // mean of |F - F*| / |F*| (Euclidean norms)
    double max_amplitude_error = 0;
};

// Re-runs the optimizer on clean + sigma * z_t for seeded standard normal
// vectors z_t (t = 0..trials-1, shared across sigmas).
std::vector<NoiseSweepRow> noise_sweep(const ComplianceMatrix& m, const Eigen::VectorXd& clean_target,
                                       const std::array<int, 3>& true_nodes, const Amplitudes& true_F,
                                       std::span<const double> sigmas, int trials, std::uint64_t seed,
                                       const Bounds& bounds, const SearchOptions& opt = {});

nlohmann::json sweep_json(std::span<const NoiseSweepRow> rows);

} // namespace plateopt
