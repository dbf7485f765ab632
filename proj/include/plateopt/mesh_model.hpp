#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plateopt {

// ---------------------------------------------------------------------------
// Materials and laminates
// ---------------------------------------------------------------------------

// Orthotropic lamina in its material axes. Moduli in MPa.
// E3 is carried for completeness; the shell formulation has no thickness
// stretch and never reads it.
struct MaterialSpec {
    std::string id;
    double E1 = 0, E2 = 0, E3 = 0;
    double nu12 = 0, nu13 = 0, nu23 = 0;
    double G12 = 0, G13 = 0, G23 = 0;
    std::optional<double> allowable_stress; // max in-plane stress [MPa]

    static MaterialSpec isotropic(std::string id, double E, double nu,
                                  std::optional<double> allowable = std::nullopt);

    // Throws ConfigError on non-positive moduli or Poisson ratios outside [0, 0.5).
    void validate() const;
};

using MaterialTable = std::map<std::string, MaterialSpec>;

struct Layer {
    std::string material;
    double thickness = 0; // mm
    double angle_deg = 0; // fiber angle from the x axis
};

struct LaminateSpec {
    std::string id;
    std::vector<Layer> layers; // bottom (z = -h/2) to top

    double thickness() const;
};

using Matrix3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

// Per-layer data kept with the stiffness for stress recovery.
struct LayerStiffness {
    std::string material;
    double z_bottom = 0, z_top = 0;
    Matrix3 q_bar;  // reduced stiffness in plate axes, engineering shear
    std::optional<double> allowable_stress;
};

// Resultant stiffness of an equivalent single-layer shell:
//   [N; M] = abd * [eps0; kappa]   (engineering shear strain gamma_xy)
//   [Qx; Qy] = shear * [gamma_xz; gamma_yz]
struct ShellStiffness {
    Matrix6 abd = Matrix6::Zero();
    Eigen::Matrix2d shear = Eigen::Matrix2d::Zero();
    double thickness = 0;
    std::vector<LayerStiffness> layers;

    Matrix3 A() const { return abd.topLeftCorner<3, 3>(); }
    Matrix3 B() const { return abd.topRightCorner<3, 3>(); }
    Matrix3 D() const { return abd.bottomRightCorner<3, 3>(); }
};

// Plane-stress reduced stiffness of a lamina rotated by angle_deg.
Matrix3 rotated_reduced_stiffness(const MaterialSpec& m, double angle_deg);

// Classical lamination (A, B, D) plus first-order transverse shear stiffness
// summed from per-layer G13/G23 and scaled by shear_correction.
ShellStiffness laminate_stiffness(const LaminateSpec& spec, const MaterialTable& materials,
                                  double shear_correction = 5.0 / 6.0);

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point2 {
    double x = 0, y = 0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

// Axis-aligned rectangle; containment is inclusive with a small tolerance so
// nodes sitting exactly on an edge are selected.
struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(double x, double y, double tol = 1e-9) const {
        return x >= x0 - tol && x <= x1 + tol && y >= y0 - tol && y <= y1 + tol;
    }
    bool contains(Point2 p, double tol = 1e-9) const { return contains(p.x, p.y, tol); }
    Rect expanded(double margin) const {
        return {x0 - margin, y0 - margin, x1 + margin, y1 + margin};
    }
};

// Regular grid of square elements. Nodes are numbered row-major from the
// origin: node(i, j) = j * nodes_x + i, element(i, j) = j * elements_x + i.
class Mesh {
public:
    Mesh() = default;
    Mesh(double width, double height, double element_size, int elements_x, int elements_y,
         bool half_model);

    double width() const { return width_; }
    double height() const { return height_; }
    double element_size() const { return element_size_; }
    bool half_model() const { return half_model_; }

    int elements_x() const { return elements_x_; }
    int elements_y() const { return elements_y_; }
    int nodes_x() const { return elements_x_ + 1; }
    int nodes_y() const { return elements_y_ + 1; }
    int node_count() const { return nodes_x() * nodes_y(); }
    int element_count() const { return elements_x_ * elements_y_; }

    int node_index(int i, int j) const { return j * nodes_x() + i; }
    std::array<int, 2> node_ij(int node) const { return {node % nodes_x(), node / nodes_x()}; }
    Point2 node_xy(int node) const;

    // Node lying exactly (within tol) on the given coordinates, if any.
    std::optional<int> node_at(double x, double y, double tol = 1e-6) const;

    int element_index(int i, int j) const { return j * elements_x_ + i; }
    // Counter-clockwise from the lower-left corner.
    std::array<int, 4> element_nodes(int element) const;
    Point2 element_center(int element) const;

    // Laminate assignment; every element carries exactly one index into
    // laminate_ids().
    const std::vector<std::string>& laminate_ids() const { return laminate_ids_; }
    int element_laminate(int element) const { return element_laminate_[element]; }
    const std::vector<int>& element_laminates() const { return element_laminate_; }
    void set_laminates(std::vector<std::string> ids, std::vector<int> per_element);

    bool contains(double x, double y, double tol = 1e-9) const {
        return x >= -tol && x <= width_ + tol && y >= -tol && y <= height_ + tol;
    }

private:
    double width_ = 0, height_ = 0, element_size_ = 0;
    int elements_x_ = 0, elements_y_ = 0;
    bool half_model_ = false;
    std::vector<std::string> laminate_ids_;
    std::vector<int> element_laminate_;
};

// Throws ConfigError when width or height is not an integer multiple of
// element_size; the message reports the remainder.
Mesh build_grid_mesh(double width, double height, double element_size, bool half_model);

struct Region {
    std::string name;
    std::string laminate;
    Rect rect;
};

// Assigns default_laminate everywhere, then each region (first match wins) to
// the elements whose center lies inside its rectangle.
void assign_laminates(Mesh& mesh, const std::string& default_laminate,
                      const std::vector<Region>& regions);

// ---------------------------------------------------------------------------
// Candidate load node sets
// ---------------------------------------------------------------------------

enum class SetId : std::uint8_t { J = 0, K = 1, L = 2 };
char set_name(SetId id);

struct NodeSets {
    std::array<std::vector<int>, 3> sets; // ascending node indices

    const std::vector<int>& J() const { return sets[0]; }
    const std::vector<int>& K() const { return sets[1]; }
    const std::vector<int>& L() const { return sets[2]; }
    std::size_t total() const { return sets[0].size() + sets[1].size() + sets[2].size(); }
};

NodeSets define_node_sets(const Mesh& mesh, const std::array<Rect, 3>& rectangles);

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

enum Dof : int { U = 0, V = 1, W = 2, RX = 3, RY = 4 };
inline constexpr int kDofsPerNode = 5;

// Bit i set <=> Dof i constrained.
using DofMask = std::uint8_t;
inline constexpr DofMask kAllDofs = 0b11111;
constexpr DofMask dof_bit(Dof d) { return static_cast<DofMask>(1u << d); }

// Parses names such as "u", "w", "rx" or "all".
DofMask parse_dofs(const std::vector<std::string>& names);
std::vector<std::string> dof_names(DofMask mask);

enum class SymmetryEdge : std::uint8_t { None, XMin, XMax, YMin, YMax };
SymmetryEdge parse_symmetry_edge(const std::string& s);
std::string to_string(SymmetryEdge e);

struct Constraint {
    std::string name;
    Rect rect;
    DofMask dofs = 0;
};

struct BoundaryConditions {
    std::vector<Constraint> constraints;
    SymmetryEdge symmetry = SymmetryEdge::None;
};

// Per-node mask of constrained DOFs. A symmetry edge normal to x fixes u and
// the rotation about y; normal to y fixes v and the rotation about x.
std::vector<DofMask> constrained_dofs(const Mesh& mesh, const BoundaryConditions& bc);

} // namespace plateopt
