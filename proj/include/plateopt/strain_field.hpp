#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plateopt/fe_solver.hpp"
#include "plateopt/mesh_model.hpp"
#include "plateopt/strain_tensor.hpp"

namespace plateopt {

// Angles are in degrees, canonical in [0, 180).
double canonical_angle(double deg);

struct PrincipalStrains {
    double alpha1 = 0, alpha2 = 0; // directions of eps1 and eps2
    double eps1 = 0, eps2 = 0;     // eps1 >= eps2
    bool isotropic = false;        // every direction is principal; alpha1 = 0
};

PrincipalStrains principal(const StrainTensor2D& t);

// Directions along which the normal strain vanishes, beta_A <= beta_B.
// Empty when the principal strains share a sign (or the tensor is zero).
std::optional<std::array<double, 2>> zero_strain(const StrainTensor2D& t);

// Normal strain along the direction at angle deg.
double normal_strain(const StrainTensor2D& t, double deg);
// Shear strain between the direction at angle deg and its normal.
double shear_strain(const StrainTensor2D& t, double deg);

enum class DirectionMode : std::uint8_t { PrincipalMajor, PrincipalMinor, ZeroA, ZeroB, None };
std::string to_string(DirectionMode m);

enum class FieldKind : std::uint8_t { ZeroWithMinorFallback, ZeroOnly, PrincipalMajor, PrincipalMinor };
FieldKind parse_field_kind(const std::string& s);
std::string to_string(FieldKind k);

enum class Branch : std::uint8_t { A, B };

// Resolution of the angles stored in a DirectionField [deg]. Rounding to it
// keeps the field unchanged when the strains are rescaled, since the angle
// computed from c * eps differs from the one from eps by round-off only.
inline constexpr double kAngleResolution = 1e-6;
double quantize_angle(double deg);

struct DirectionEntry {
    DirectionMode mode = DirectionMode::None;
    double angle = 0;
    bool masked = false;
    friend bool operator==(const DirectionEntry&, const DirectionEntry&) = default;
};

struct DirectionField {
    FieldKind kind = FieldKind::ZeroWithMinorFallback;
    Branch branch = Branch::A;
    GridSpec grid;
    std::vector<DirectionEntry> entries; // one per grid node, row-major
    std::shared_ptr<const StrainField> strains;
    std::vector<Rect> excluded;

    double width() const { return grid.spacing * (grid.nodes_x - 1); }
    double height() const { return grid.spacing * (grid.nodes_y - 1); }
    bool inside(double x, double y) const;
    bool is_excluded(double x, double y) const;
    StrainTensor2D tensor_at(double x, double y) const; // bilinear
};

// Per-node directions. Nodes inside an excluded rectangle are masked (mode
// None). With ZeroWithMinorFallback, nodes without zero-strain directions
// take the minor principal direction.
DirectionField direction_field(const StrainField& strains, FieldKind kind, Branch branch = Branch::A,
                               std::vector<Rect> excluded = {});

enum class Termination : std::uint8_t { Boundary, MaxSteps, ExcludedRegion, ModeIsland };
std::string to_string(Termination t);

struct TraceParams {
    double step = 0;          // mm; 0 selects a quarter of the grid spacing
    int max_steps = 100000;
    bool reverse = false;     // start against the default heading (upper half plane)
};

struct TrajectoryVertex {
    double x = 0, y = 0;
    DirectionMode mode = DirectionMode::None;
    double angle = 0;
};

struct Trajectory {
    std::vector<TrajectoryVertex> vertices;
    double seed_x = 0, seed_y = 0;
    Branch branch = Branch::A;
    Termination reason = Termination::MaxSteps;
};

// Follows the field from the seed with explicit midpoint steps on the
// bilinearly interpolated tensor. Throws ConfigError when the seed lies
// outside the domain or in an excluded region.
Trajectory trace(const DirectionField& field, double x, double y, Branch branch, const TraceParams& params = {});

void write_trajectory_csv(const Trajectory& t, std::ostream& os);
void write_direction_field_csv(const DirectionField& f, std::ostream& os);

// Connected (4-neighbour) groups of unmasked nodes that fell back to the
// minor principal direction, each as a sorted node list.
std::vector<std::vector<int>> fallback_islands(const DirectionField& f);

} // namespace plateopt
