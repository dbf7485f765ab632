#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateopt/fe_solver.hpp"
#include "plateopt/mesh_model.hpp"

namespace plateopt {

// Regular grid of scalar values, row-major from the origin, with an optional
// mask (masked cells carry no value).
struct ScalarField {
    double x0 = 0, y0 = 0;
    double spacing = 1;
    int nx = 0, ny = 0;
    std::vector<double> values;
    std::vector<char> mask; // empty or one flag per value; 1 = masked

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    bool masked(std::size_t n) const { return !mask.empty() && mask[n]; }
    double x(int i) const { return x0 + i * spacing; }
    double y(int j) const { return y0 + j * spacing; }

    // Bilinear value; empty outside the grid or when a contributing node is masked.
    std::optional<double> sample(double x, double y) const;
    void validate() const;
};

// Field on the nodes of a mesh (grid spacing = element size).
ScalarField field_from_nodes(const Mesh& mesh, std::span<const double> node_values);
ScalarField w_field(const Mesh& mesh, const DisplacementField& disp);

// Gridded CSV:
//   # gridded-field 1
//   origin,<x0>,<y0>
//   spacing,<h>
//   dims,<nx>,<ny>
//   <ny rows of nx comma-separated values; NA marks a masked cell>
void save_field(const ScalarField& f, std::ostream& os);
void save_field(const ScalarField& f, const std::filesystem::path& path);
ScalarField load_field(std::istream& is);
ScalarField load_field(const std::filesystem::path& path);

// Mesh coordinates (x, y) map to field coordinates (tx + scale x, ty + scale y).
struct FieldTransform {
    double tx = 0, ty = 0, scale = 1;
};

struct Resampled {
    std::vector<int> nodes;      // nodes that received a value, ascending
    std::vector<double> values;  // same order
    std::vector<int> dropped;    // nodes mapping to masked cells (or outside)
};

// Samples the field at the given mesh nodes. Nodes outside the field domain
// are an error unless allow_outside is set, in which case they are dropped
// like masked ones. Throws ModelError when no node receives a value.
Resampled resample_to_mesh(const ScalarField& field, const Mesh& mesh, std::span<const int> nodes,
                           const FieldTransform& transform = {}, bool allow_outside = false);

// Divides the field by its interpolated value at p0.
ScalarField normalize_at(const ScalarField& field, Point2 p0, double epsilon = 1e-9);

struct Probe {
    std::string name;
    Point2 point;
};

struct ProbeResult {
    std::string name;
    Point2 point;
    std::optional<double> a, b;
    std::optional<double> relative_deviation; // (b - a) / a
};

struct DeviationStats {
    double rms = 0, max_abs = 0;
    double rms_relative = 0, max_relative = 0; // relative to max |a| over the overlap
};

struct ComparisonReport {
    std::size_t overlap = 0;
    double k = 0; // least-squares a ~ k b
    DeviationStats raw;     // a - b
    DeviationStats fitted;  // a - k b
    std::optional<Point2> p0;
    std::optional<double> a_p0, b_p0;
    std::optional<DeviationStats> normalized; // a / a(p0) - b / b(p0)
    std::vector<ProbeResult> probes;
};

// Compares b against a on the unmasked nodes of a's grid (b sampled bilinearly).
ComparisonReport compare(const ScalarField& a, const ScalarField& b, std::optional<Point2> p0 = {},
                         std::span<const Probe> probes = {});

nlohmann::json report_json(const ComparisonReport& r);

// Area fraction of the surface where max |principal strain| < threshold, using
// tributary node areas.
double min_strain_audit(const StrainField& strains, double threshold);

} // namespace plateopt
