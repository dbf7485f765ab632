#include "plateopt/fe_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include <Eigen/SparseCholesky>

#include "plateopt/error.hpp"

namespace plateopt {

namespace {

constexpr double kXi[4] = {-1.0, 1.0, 1.0, -1.0};
constexpr double kEta[4] = {-1.0, -1.0, 1.0, 1.0};
const double kGauss = 1.0 / std::sqrt(3.0);

struct Shape {
    double n[4];
    double dx[4];
    double dy[4];
};

Shape shape_at(double xi, double eta, double size_x, double size_y) {
    Shape s{};
    for (int k = 0; k < 4; ++k) {
        s.n[k] = 0.25 * (1.0 + kXi[k] * xi) * (1.0 + kEta[k] * eta);
        s.dx[k] = 0.25 * kXi[k] * (1.0 + kEta[k] * eta) * 2.0 / size_x;
        s.dy[k] = 0.25 * kEta[k] * (1.0 + kXi[k] * xi) * 2.0 / size_y;
    }
    return s;
}

using RowB = Eigen::Matrix<double, 1, 20>;
using Bmat6 = Eigen::Matrix<double, 6, 20>;
using Bmat2 = Eigen::Matrix<double, 2, 20>;

Bmat6 membrane_bending_b(const Shape& s) {
    Bmat6 b = Bmat6::Zero();
    for (int k = 0; k < 4; ++k) {
        const int o = 5 * k;
        b(0, o + U) = s.dx[k];
        b(1, o + V) = s.dy[k];
        b(2, o + U) = s.dy[k];
        b(2, o + V) = s.dx[k];
        b(3, o + RY) = s.dx[k];
        b(4, o + RX) = -s.dy[k];
        b(5, o + RY) = s.dy[k];
        b(5, o + RX) = -s.dx[k];
    }
    return b;
}

RowB gamma_xz_row(const Shape& s) {
    RowB r = RowB::Zero();
    for (int k = 0; k < 4; ++k) {
        r(5 * k + W) = s.dx[k];
        r(5 * k + RY) = s.n[k];
    }
    return r;
}

RowB gamma_yz_row(const Shape& s) {
    RowB r = RowB::Zero();
    for (int k = 0; k < 4; ++k) {
        r(5 * k + W) = s.dy[k];
        r(5 * k + RX) = -s.n[k];
    }
    return r;
}

} // namespace

ElementMatrix element_stiffness(double size_x, double size_y, const ShellStiffness& st) {
    ElementMatrix k = ElementMatrix::Zero();
    const double det_j = 0.25 * size_x * size_y;

    // Tying points for the assumed transverse shear strains.
    const RowB gxz_bottom = gamma_xz_row(shape_at(0.0, -1.0, size_x, size_y));
    const RowB gxz_top = gamma_xz_row(shape_at(0.0, 1.0, size_x, size_y));
    const RowB gyz_left = gamma_yz_row(shape_at(-1.0, 0.0, size_x, size_y));
    const RowB gyz_right = gamma_yz_row(shape_at(1.0, 0.0, size_x, size_y));

    for (int g = 0; g < 4; ++g) {
        const double xi = kXi[g] * kGauss, eta = kEta[g] * kGauss;
        const Shape s = shape_at(xi, eta, size_x, size_y);
        const Bmat6 b = membrane_bending_b(s);
        k.noalias() += b.transpose() * st.abd * b * det_j;

        Bmat2 bs;
        bs.row(0) = 0.5 * (1.0 - eta) * gxz_bottom + 0.5 * (1.0 + eta) * gxz_top;
        bs.row(1) = 0.5 * (1.0 - xi) * gyz_left + 0.5 * (1.0 + xi) * gyz_right;
        k.noalias() += bs.transpose() * st.shear * bs * det_j;
    }
    return 0.5 * (k + k.transpose());
}

// ---------------------------------------------------------------------------

struct SystemMatrix::Factorization {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
};

Eigen::VectorXd SystemMatrix::solve_free(const Eigen::VectorXd& rhs) const {
    if (equations_ == 0) return Eigen::VectorXd();
    Eigen::VectorXd x = factor_->ldlt.solve(rhs);
    // Iterative refinement with the residual accumulated in extended precision.
    Eigen::VectorXd r(equations_);
    for (int iteration = 0; iteration < 4; ++iteration) {
        std::vector<long double> acc(rhs.data(), rhs.data() + rhs.size());
        for (int c = 0; c < k_ff_.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(k_ff_, c); it; ++it) {
                const long double k = it.value();
                acc[static_cast<std::size_t>(it.row())] -= k * x[it.col()];
                if (it.row() != it.col()) acc[static_cast<std::size_t>(it.col())] -= k * x[it.row()];
            }
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = static_cast<double>(acc[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd dx = factor_->ldlt.solve(r);
        x += dx;
        if (dx.cwiseAbs().maxCoeff() <= 1e-16 * x.cwiseAbs().maxCoeff()) break;
    }
    return x;
}

SystemMatrix assemble(const PlateModel& model) {
    const Mesh& mesh = model.mesh;
    if (model.stiffness.size() != mesh.laminate_ids().size())
        throw ConfigError("stiffness table does not match the mesh laminate list");

    SystemMatrix sys;
    sys.node_count_ = mesh.node_count();
    sys.constrained_ = constrained_dofs(mesh, model.bc);
    const int total = mesh.node_count() * kDofsPerNode;
    sys.dof_map_.assign(static_cast<std::size_t>(total), -1);
    std::vector<int> constrained_index(static_cast<std::size_t>(total), -1);
    for (int n = 0; n < mesh.node_count(); ++n) {
        for (int d = 0; d < kDofsPerNode; ++d) {
            const int g = n * kDofsPerNode + d;
            if (sys.constrained_[n] & (1u << d)) {
                constrained_index[g] = static_cast<int>(sys.constrained_list_.size());
                sys.constrained_list_.push_back(g);
            } else {
                sys.dof_map_[g] = sys.equations_++;
            }
        }
    }

    // Element matrices are shared per laminate: all elements are congruent.
    std::vector<ElementMatrix> ke;
    ke.reserve(model.stiffness.size());
    for (const auto& s : model.stiffness)
        ke.push_back(element_stiffness(mesh.element_size(), mesh.element_size(), s));

    std::vector<Eigen::Triplet<double>> ff, fc;
    ff.reserve(static_cast<std::size_t>(mesh.element_count()) * 210);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        const ElementMatrix& k = ke[static_cast<std::size_t>(mesh.element_laminate(e))];
        for (int a = 0; a < 20; ++a) {
            const int ga = nodes[a / 5] * kDofsPerNode + a % 5;
            const int ra = sys.dof_map_[ga];
            if (ra < 0) continue;
            for (int b = 0; b < 20; ++b) {
                const int gb = nodes[b / 5] * kDofsPerNode + b % 5;
                const int rb = sys.dof_map_[gb];
                if (rb >= 0) {
                    if (rb <= ra) ff.emplace_back(ra, rb, k(a, b));
                } else {
                    fc.emplace_back(ra, constrained_index[gb], k(a, b));
                }
            }
        }
    }

    sys.k_ff_.resize(sys.equations_, sys.equations_);
    sys.k_ff_.setFromTriplets(ff.begin(), ff.end());
    sys.k_fc_.resize(sys.equations_, static_cast<int>(sys.constrained_list_.size()));
    sys.k_fc_.setFromTriplets(fc.begin(), fc.end());

    auto factor = std::make_shared<SystemMatrix::Factorization>();
    if (sys.equations_ > 0) {
        factor->ldlt.compute(sys.k_ff_);
        const Eigen::VectorXd d = factor->ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        int modes = 0;
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (!(d[i] > 1e-9 * dmax)) ++modes;
        if (factor->ldlt.info() != Eigen::Success || modes > 0) {
            std::ostringstream msg;
            msg << "stiffness system is singular: " << modes
                << " unconstrained (rigid-body or mechanism) mode(s)";
            throw SingularSystemError(msg.str(), std::max(modes, 1));
        }
    }
    sys.factor_ = std::move(factor);
    return sys;
}

void write_stiffness_triplets(const SystemMatrix& sys, std::ostream& os) {
    os << "stiffness-triplets 1\n";
    os << "equations " << sys.equation_count() << "\n";
    os << "dof_map";
    for (int v : sys.dof_map()) os << ' ' << v;
    os << "\n";
    os.precision(17);
    const auto& k = sys.free_stiffness();
    for (int c = 0; c < k.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(k, c); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
            if (it.row() != it.col())
                os << it.col() << ' ' << it.row() << ' ' << it.value() << '\n';
        }
}

// ---------------------------------------------------------------------------

void LoadCase::add(int node, double magnitude, LoadDirection dir) {
    for (const auto& l : loads)
        if (l.node == node)
            throw ConfigError("load case already has a load at node " + std::to_string(node));
    loads.push_back({node, magnitude, dir});
}

LoadCase uniform_pressure(const Mesh& mesh, double pressure, LoadDirection dir) {
    std::vector<double> force(static_cast<std::size_t>(mesh.node_count()), 0.0);
    const double quarter = 0.25 * pressure * mesh.element_size() * mesh.element_size();
    for (int e = 0; e < mesh.element_count(); ++e)
        for (int n : mesh.element_nodes(e)) force[n] += quarter;
    LoadCase lc;
    lc.description = "uniform pressure";
    for (int n = 0; n < mesh.node_count(); ++n) lc.loads.push_back({n, force[n], dir});
    return lc;
}

GridSpec grid_of(const Mesh& mesh) {
    return {mesh.nodes_x(), mesh.nodes_y(), mesh.element_size()};
}

DisplacementField solve(const SystemMatrix& sys, const LoadCase& loads,
                        std::span<const PrescribedValue> prescribed) {
    const int nodes = sys.node_count();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(sys.equation_count());
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    for (const auto& l : loads.loads) {
        if (l.node < 0 || l.node >= nodes)
            throw ConfigError("load references unknown node " + std::to_string(l.node));
        if (!std::isfinite(l.magnitude))
            throw ConfigError("non-finite load at node " + std::to_string(l.node));
        if (seen[l.node]++)
            throw ConfigError("more than one load at node " + std::to_string(l.node));
        const int eq = sys.dof_map()[static_cast<std::size_t>(l.node * kDofsPerNode + W)];
        if (eq >= 0) f[eq] += l.fz();
    }

    Eigen::VectorXd uc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.constrained_dofs().size()));
    for (const auto& p : prescribed) {
        const int g = p.node * kDofsPerNode + p.dof;
        auto it = std::lower_bound(sys.constrained_dofs().begin(), sys.constrained_dofs().end(), g);
        if (p.node < 0 || p.node >= nodes || it == sys.constrained_dofs().end() || *it != g)
            throw ConfigError("prescribed value on unconstrained DOF of node " +
                              std::to_string(p.node));
        uc[it - sys.constrained_dofs().begin()] = p.value;
    }
    if (!prescribed.empty()) f -= sys.coupling_stiffness() * uc;

    const Eigen::VectorXd x = sys.solve_free(f);

    DisplacementField out;
    out.values.assign(static_cast<std::size_t>(nodes), NodeDisplacement{});
    for (int g = 0; g < nodes * kDofsPerNode; ++g) {
        const int eq = sys.dof_map()[static_cast<std::size_t>(g)];
        if (eq >= 0) out.values[g / kDofsPerNode][g % kDofsPerNode] = x[eq];
    }
    for (std::size_t c = 0; c < sys.constrained_dofs().size(); ++c) {
        const int g = sys.constrained_dofs()[c];
        out.values[g / kDofsPerNode][g % kDofsPerNode] = uc[static_cast<Eigen::Index>(c)];
    }
    return out;
}

std::vector<double> extract_w(const DisplacementField& disp, std::span<const int> nodes) {
    std::vector<double> out;
    out.reserve(nodes.size());
    for (int n : nodes) {
        if (n < 0 || n >= static_cast<int>(disp.values.size()))
            throw ConfigError("extract_w: unknown node " + std::to_string(n));
        out.push_back(disp.w(n));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::array<SectionStrain, 4> element_section_strains(const DisplacementField& disp,
                                                     const Mesh& mesh, int element) {
    const auto nodes = mesh.element_nodes(element);
    Eigen::Matrix<double, 20, 1> d;
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < kDofsPerNode; ++j)
            d[5 * k + j] = disp.values[static_cast<std::size_t>(nodes[k])][j];

    const double es = mesh.element_size();
    Eigen::Matrix<double, 6, 4> at_gauss;
    for (int g = 0; g < 4; ++g) {
        const Shape s = shape_at(kXi[g] * kGauss, kEta[g] * kGauss, es, es);
        at_gauss.col(g) = membrane_bending_b(s) * d;
    }

    // Bilinear extrapolation: corner k sits at natural coordinate sqrt(3) * (xi_k, eta_k)
    // in the frame spanned by the Gauss points.
    const double r = std::sqrt(3.0);
    std::array<SectionStrain, 4> out;
    for (int k = 0; k < 4; ++k) {
        Eigen::Matrix<double, 6, 1> v = Eigen::Matrix<double, 6, 1>::Zero();
        for (int g = 0; g < 4; ++g) {
            const double w = 0.25 * (1.0 + kXi[g] * kXi[k] * r) * (1.0 + kEta[g] * kEta[k] * r);
            v += w * at_gauss.col(g);
        }
        out[k].membrane = v.head<3>();
        out[k].curvature = v.tail<3>();
    }
    return out;
}

std::vector<SectionStrain> nodal_section_strains(const DisplacementField& disp, const Mesh& mesh) {
    std::vector<SectionStrain> sum(static_cast<std::size_t>(mesh.node_count()));
    std::vector<int> count(static_cast<std::size_t>(mesh.node_count()), 0);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto nodes = mesh.element_nodes(e);
        const auto corner = element_section_strains(disp, mesh, e);
        for (int k = 0; k < 4; ++k) {
            sum[nodes[k]].membrane += corner[k].membrane;
            sum[nodes[k]].curvature += corner[k].curvature;
            ++count[nodes[k]];
        }
    }
    for (std::size_t n = 0; n < sum.size(); ++n) {
        sum[n].membrane /= count[n];
        sum[n].curvature /= count[n];
    }
    return sum;
}

double upper_surface_z(const PlateModel& model) {
    double z = std::numeric_limits<double>::infinity();
    std::vector<char> used(model.stiffness.size(), 0);
    for (int l : model.mesh.element_laminates()) used[static_cast<std::size_t>(l)] = 1;
    for (std::size_t l = 0; l < model.stiffness.size(); ++l)
        if (used[l]) z = std::min(z, 0.5 * model.stiffness[l].thickness);
    return z;
}

StrainField surface_strain(const DisplacementField& disp, const PlateModel& model, double z) {
    const Mesh& mesh = model.mesh;
    const double tol = 1e-12 * std::max(1.0, std::abs(z));
    for (int e = 0; e < mesh.element_count(); ++e) {
        const double half = 0.5 * model.element_stiffness(e).thickness;
        if (std::abs(z) > half + tol) {
            std::ostringstream msg;
            msg << "surface offset z = " << z << " lies outside laminate '"
                << mesh.laminate_ids()[static_cast<std::size_t>(mesh.element_laminate(e))]
                << "' (half thickness " << half << ")";
            throw ConfigError(msg.str());
        }
    }

    StrainField out;
    out.grid = grid_of(mesh);
    out.z = z;
    const auto section = nodal_section_strains(disp, mesh);
    out.values.reserve(section.size());
    for (const auto& s : section) out.values.push_back(s.at(z));
    return out;
}

} // namespace plateopt
