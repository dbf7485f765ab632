#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "plateopt/mesh_model.hpp"
#include "plateopt/strain_tensor.hpp"

namespace plateopt {

// Everything the plate analysis needs: mesh with laminate assignment, the
// resultant stiffness of every laminate (indexed like mesh.laminate_ids()) and
// the boundary conditions.
struct PlateModel {
    Mesh mesh;
    std::vector<ShellStiffness> stiffness;
    BoundaryConditions bc;

    const ShellStiffness& element_stiffness(int element) const {
        return stiffness[static_cast<std::size_t>(mesh.element_laminate(element))];
    }
};

using ElementMatrix = Eigen::Matrix<double, 20, 20>;

// 4-node shear-deformable plate element with membrane-bending coupling.
// Membrane and bending use 2x2 Gauss integration; the transverse shear strains
// are sampled at the edge midpoints (gamma_xz on the edges normal to y,
// gamma_yz on the edges normal to x) and interpolated across the element,
// which on rectangles equals 1x2 / 2x1 reduced integration of the shear terms.
ElementMatrix element_stiffness(double size_x, double size_y, const ShellStiffness& s);

class SystemMatrix {
public:
    int equation_count() const { return equations_; }
    int node_count() const { return node_count_; }
    // (node * 5 + dof) -> equation index, or -1 when constrained.
    const std::vector<int>& dof_map() const { return dof_map_; }
    const std::vector<DofMask>& constrained() const { return constrained_; }
    const Eigen::SparseMatrix<double>& free_stiffness() const { return k_ff_; }
    const Eigen::SparseMatrix<double>& coupling_stiffness() const { return k_fc_; }
    const std::vector<int>& constrained_dofs() const { return constrained_list_; }

    // Solves K x = rhs on the free equations with one step of iterative
    // refinement. Safe to call concurrently.
    Eigen::VectorXd solve_free(const Eigen::VectorXd& rhs) const;

private:
    friend SystemMatrix assemble(const PlateModel& model);
    struct Factorization;

    int equations_ = 0;
    int node_count_ = 0;
    std::vector<int> dof_map_;
    std::vector<int> constrained_list_; // global dof ids, ascending
    std::vector<DofMask> constrained_;
    Eigen::SparseMatrix<double> k_ff_;
    Eigen::SparseMatrix<double> k_fc_;
    std::shared_ptr<const Factorization> factor_;
};

// Throws SingularSystemError (with the count of unconstrained modes) when the
// constrained system is not positive definite.
SystemMatrix assemble(const PlateModel& model);

// Writes the free-free stiffness as "row col value" triplets (upper triangle
// included), preceded by a header with the DOF map.
void write_stiffness_triplets(const SystemMatrix& sys, std::ostream& os);

enum class LoadDirection { PlusZ, MinusZ };

struct NodalLoad {
    int node = 0;
    double magnitude = 0; // N, along direction
    LoadDirection direction = LoadDirection::MinusZ;

    double fz() const { return direction == LoadDirection::MinusZ ? -magnitude : magnitude; }
};

struct LoadCase {
    std::vector<NodalLoad> loads;
    std::string description;

    // Adds a load; throws ConfigError if the node already carries one.
    void add(int node, double magnitude, LoadDirection dir = LoadDirection::MinusZ);
};

// Consistent nodal forces of a uniform pressure p [MPa] acting along dir.
LoadCase uniform_pressure(const Mesh& mesh, double pressure,
                          LoadDirection dir = LoadDirection::MinusZ);

struct PrescribedValue {
    int node = 0;
    Dof dof = W;
    double value = 0;
};

struct GridSpec {
    int nodes_x = 0, nodes_y = 0;
    double spacing = 0;
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

GridSpec grid_of(const Mesh& mesh);

using NodeDisplacement = std::array<double, kDofsPerNode>; // u, v, w, rx, ry

struct DisplacementField {
    GridSpec grid;
    std::vector<NodeDisplacement> values;

    double w(int node) const { return values[static_cast<std::size_t>(node)][W]; }
};

// Solves for the displacements. Constrained DOFs are zero unless given in
// prescribed (which may only name constrained DOFs).
DisplacementField solve(const SystemMatrix& sys, const LoadCase& loads,
                        std::span<const PrescribedValue> prescribed = {});

// Out-of-plane displacement at the listed nodes, in order.
std::vector<double> extract_w(const DisplacementField& disp, std::span<const int> nodes);

// Mid-surface strain (engineering shear) and curvature at a point.
struct SectionStrain {
    Eigen::Vector3d membrane = Eigen::Vector3d::Zero(); // eps_xx, eps_yy, gamma_xy
    Eigen::Vector3d curvature = Eigen::Vector3d::Zero(); // k_xx, k_yy, k_xy (engineering)

    StrainTensor2D at(double z) const {
        const Eigen::Vector3d e = membrane + z * curvature;
        return {e[0], e[1], 0.5 * e[2]};
    }
};

// Section strains of one element extrapolated from its 2x2 Gauss points to
// its four corners (same order as Mesh::element_nodes).
std::array<SectionStrain, 4> element_section_strains(const DisplacementField& disp,
                                                     const Mesh& mesh, int element);

// Arithmetic average over the elements adjacent to each node.
std::vector<SectionStrain> nodal_section_strains(const DisplacementField& disp, const Mesh& mesh);

struct StrainField {
    GridSpec grid;
    double z = 0;
    std::vector<StrainTensor2D> values;
};

// Strain at offset z from the mid-surface. Throws ConfigError when |z|
// exceeds half the thickness of a laminate adjacent to any node.
StrainField surface_strain(const DisplacementField& disp, const PlateModel& model, double z);

// z of the upper surface: the smallest half-thickness over all laminates in use.
double upper_surface_z(const PlateModel& model);

} // namespace plateopt
