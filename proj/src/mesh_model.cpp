#include "plateopt/mesh_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "plateopt/error.hpp"

namespace plateopt {

MaterialSpec MaterialSpec::isotropic(std::string id, double E, double nu,
                                     std::optional<double> allowable) {
    MaterialSpec m;
    m.id = std::move(id);
    m.E1 = m.E2 = m.E3 = E;
    m.nu12 = m.nu13 = m.nu23 = nu;
    m.G12 = m.G13 = m.G23 = E / (2.0 * (1.0 + nu));
    m.allowable_stress = allowable;
    return m;
}

void MaterialSpec::validate() const {
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("material '" + id + "': " + name + " must be > 0");
    };
    positive(E1, "E1");
    positive(E2, "E2");
    positive(E3, "E3");
    positive(G12, "G12");
    positive(G13, "G13");
    positive(G23, "G23");
    for (auto [v, name] : {std::pair{nu12, "nu12"}, {nu13, "nu13"}, {nu23, "nu23"}}) {
        if (!(v >= 0.0 && v < 0.5))
            throw ConfigError("material '" + id + "': " + name + " must lie in [0, 0.5)");
    }
    if (allowable_stress && !(*allowable_stress > 0.0))
        throw ConfigError("material '" + id + "': allowable_stress must be > 0");
}

double LaminateSpec::thickness() const {
    double h = 0.0;
    for (const auto& l : layers) h += l.thickness;
    return h;
}

Matrix3 rotated_reduced_stiffness(const MaterialSpec& m, double angle_deg) {
    const double nu21 = m.nu12 * m.E2 / m.E1;
    const double den = 1.0 - m.nu12 * nu21;
    const double Q11 = m.E1 / den;
    const double Q22 = m.E2 / den;
    const double Q12 = m.nu12 * m.E2 / den;
    const double Q66 = m.G12;

    const double t = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    const double c2 = c * c, s2 = s * s, cs = c * s;

    Matrix3 q;
    q(0, 0) = Q11 * c2 * c2 + 2.0 * (Q12 + 2.0 * Q66) * s2 * c2 + Q22 * s2 * s2;
    q(1, 1) = Q11 * s2 * s2 + 2.0 * (Q12 + 2.0 * Q66) * s2 * c2 + Q22 * c2 * c2;
    q(0, 1) = (Q11 + Q22 - 4.0 * Q66) * s2 * c2 + Q12 * (s2 * s2 + c2 * c2);
    q(2, 2) = (Q11 + Q22 - 2.0 * Q12 - 2.0 * Q66) * s2 * c2 + Q66 * (s2 * s2 + c2 * c2);
    q(0, 2) = (Q11 - Q12 - 2.0 * Q66) * cs * c2 + (Q12 - Q22 + 2.0 * Q66) * cs * s2;
    q(1, 2) = (Q11 - Q12 - 2.0 * Q66) * cs * s2 + (Q12 - Q22 + 2.0 * Q66) * cs * c2;
    q(1, 0) = q(0, 1);
    q(2, 0) = q(0, 2);
    q(2, 1) = q(1, 2);
    return q;
}

ShellStiffness laminate_stiffness(const LaminateSpec& spec, const MaterialTable& materials,
                                  double shear_correction) {
    if (spec.layers.empty())
        throw ConfigError("laminate '" + spec.id + "' has no layers");

    ShellStiffness out;
    out.thickness = spec.thickness();
    Matrix3 A = Matrix3::Zero(), B = Matrix3::Zero(), D = Matrix3::Zero();

    double z = -0.5 * out.thickness;
    for (std::size_t k = 0; k < spec.layers.size(); ++k) {
        const Layer& layer = spec.layers[k];
        if (!(layer.thickness > 0.0))
            throw ConfigError("laminate '" + spec.id + "': layer " + std::to_string(k) +
                              " has non-positive thickness");
        auto it = materials.find(layer.material);
        if (it == materials.end())
            throw ConfigError("laminate '" + spec.id + "': unknown material '" +
                              layer.material + "'");
        const MaterialSpec& m = it->second;

        const double zb = z;
        const double zt = (k + 1 == spec.layers.size()) ? 0.5 * out.thickness : z + layer.thickness;
        const Matrix3 q = rotated_reduced_stiffness(m, layer.angle_deg);
        A += q * (zt - zb);
        B += q * (0.5 * (zt * zt - zb * zb));
        D += q * ((zt * zt * zt - zb * zb * zb) / 3.0);

        const double t = layer.angle_deg * std::numbers::pi / 180.0;
        const double c = std::cos(t), s = std::sin(t);
        // Order (gamma_xz, gamma_yz).
        Eigen::Matrix2d qs;
        qs(0, 0) = m.G13 * c * c + m.G23 * s * s;
        qs(1, 1) = m.G23 * c * c + m.G13 * s * s;
        qs(0, 1) = qs(1, 0) = (m.G13 - m.G23) * c * s;
        out.shear += qs * (layer.thickness * shear_correction);

        out.layers.push_back({layer.material, zb, zt, q, m.allowable_stress});
        z = zt;
    }

    out.abd.topLeftCorner<3, 3>() = A;
    out.abd.topRightCorner<3, 3>() = B;
    out.abd.bottomLeftCorner<3, 3>() = B;
    out.abd.bottomRightCorner<3, 3>() = D;
    return out;
}

// ---------------------------------------------------------------------------

Mesh::Mesh(double width, double height, double element_size, int elements_x, int elements_y,
           bool half_model)
    : width_(width), height_(height), element_size_(element_size), elements_x_(elements_x),
      elements_y_(elements_y), half_model_(half_model), laminate_ids_{"default"},
      element_laminate_(static_cast<std::size_t>(elements_x * elements_y), 0) {}

Point2 Mesh::node_xy(int node) const {
    const auto [i, j] = node_ij(node);
    return {i * element_size_, j * element_size_};
}

std::optional<int> Mesh::node_at(double x, double y, double tol) const {
    const double fi = x / element_size_, fj = y / element_size_;
    const long i = std::lround(fi), j = std::lround(fj);
    if (i < 0 || j < 0 || i >= nodes_x() || j >= nodes_y()) return std::nullopt;
    if (std::abs(i * element_size_ - x) > tol || std::abs(j * element_size_ - y) > tol)
        return std::nullopt;
    return node_index(static_cast<int>(i), static_cast<int>(j));
}

std::array<int, 4> Mesh::element_nodes(int element) const {
    const int i = element % elements_x_, j = element / elements_x_;
    return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1),
            node_index(i, j + 1)};
}

Point2 Mesh::element_center(int element) const {
    const int i = element % elements_x_, j = element / elements_x_;
    return {(i + 0.5) * element_size_, (j + 0.5) * element_size_};
}

void Mesh::set_laminates(std::vector<std::string> ids, std::vector<int> per_element) {
    if (per_element.size() != static_cast<std::size_t>(element_count()))
        throw ConfigError("laminate assignment size does not match element count");
    for (int l : per_element)
        if (l < 0 || l >= static_cast<int>(ids.size()))
            throw ConfigError("laminate assignment references an undefined laminate");
    laminate_ids_ = std::move(ids);
    element_laminate_ = std::move(per_element);
}

namespace {

// Number of elements along one side, or nullopt with a remainder report.
std::optional<int> exact_divisions(double length, double element_size, const char* what,
                                   std::ostringstream& problems) {
    const long n = std::lround(length / element_size);
    const double remainder = length - static_cast<double>(n) * element_size;
    if (n >= 1 && std::abs(remainder) <= 1e-9 * std::max(1.0, length)) return static_cast<int>(n);
    if (problems.tellp() > 0) problems << "; ";
    problems << what << " " << length << " is not an integer multiple of element size "
             << element_size << " (remainder " << std::fmod(length, element_size) << ")";
    return std::nullopt;
}

} // namespace

Mesh build_grid_mesh(double width, double height, double element_size, bool half_model) {
    if (!(element_size > 0.0)) throw ConfigError("element size must be > 0");
    if (!(width > 0.0) || !(height > 0.0)) throw ConfigError("mesh dimensions must be > 0");
    std::ostringstream problems;
    const auto nx = exact_divisions(width, element_size, "width", problems);
    const auto ny = exact_divisions(height, element_size, "height", problems);
    if (!nx || !ny) throw ConfigError(problems.str());
    return Mesh(width, height, element_size, *nx, *ny, half_model);
}

void assign_laminates(Mesh& mesh, const std::string& default_laminate,
                      const std::vector<Region>& regions) {
    std::vector<std::string> ids{default_laminate};
    auto id_of = [&](const std::string& name) {
        auto it = std::find(ids.begin(), ids.end(), name);
        if (it != ids.end()) return static_cast<int>(it - ids.begin());
        ids.push_back(name);
        return static_cast<int>(ids.size() - 1);
    };
    std::vector<int> region_ids;
    for (const auto& r : regions) region_ids.push_back(id_of(r.laminate));

    std::vector<int> per_element(static_cast<std::size_t>(mesh.element_count()), 0);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const Point2 c = mesh.element_center(e);
        for (std::size_t r = 0; r < regions.size(); ++r) {
            if (regions[r].rect.contains(c, 0.0)) {
                per_element[e] = region_ids[r];
                break;
            }
        }
    }
    mesh.set_laminates(std::move(ids), std::move(per_element));
}

// ---------------------------------------------------------------------------

char set_name(SetId id) {
    switch (id) {
    case SetId::J: return 'J';
    case SetId::K: return 'K';
    case SetId::L: return 'L';
    }
    return '?';
}

NodeSets define_node_sets(const Mesh& mesh, const std::array<Rect, 3>& rectangles) {
    NodeSets out;
    for (int s = 0; s < 3; ++s) {
        const Rect& r = rectangles[s];
        const char name = set_name(static_cast<SetId>(s));
        if (r.x1 < r.x0 || r.y1 < r.y0)
            throw ConfigError(std::string("node set ") + name + ": rectangle corners inverted");
        if (!mesh.contains(r.x0, r.y0) || !mesh.contains(r.x1, r.y1))
            throw ConfigError(std::string("node set ") + name +
                              ": rectangle extends beyond the mesh footprint");
        for (int n = 0; n < mesh.node_count(); ++n)
            if (r.contains(mesh.node_xy(n))) out.sets[s].push_back(n);
        if (out.sets[s].empty())
            throw ConfigError(std::string("node set ") + name + " selects no nodes");
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            std::vector<int> common;
            std::set_intersection(out.sets[a].begin(), out.sets[a].end(), out.sets[b].begin(),
                                  out.sets[b].end(), std::back_inserter(common));
            if (!common.empty())
                throw ConfigError(std::string("node sets ") + set_name(static_cast<SetId>(a)) +
                                  " and " + set_name(static_cast<SetId>(b)) + " overlap (" +
                                  std::to_string(common.size()) + " shared nodes)");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

DofMask parse_dofs(const std::vector<std::string>& names) {
    DofMask mask = 0;
    for (const auto& n : names) {
        if (n == "all") mask |= kAllDofs;
        else if (n == "u") mask |= dof_bit(U);
        else if (n == "v") mask |= dof_bit(V);
        else if (n == "w") mask |= dof_bit(W);
        else if (n == "rx") mask |= dof_bit(RX);
        else if (n == "ry") mask |= dof_bit(RY);
        else throw ConfigError("unknown DOF name '" + n + "' (expected u, v, w, rx, ry, all)");
    }
    return mask;
}

std::vector<std::string> dof_names(DofMask mask) {
    static const char* names[kDofsPerNode] = {"u", "v", "w", "rx", "ry"};
    std::vector<std::string> out;
    for (int d = 0; d < kDofsPerNode; ++d)
        if (mask & (1u << d)) out.emplace_back(names[d]);
    return out;
}

SymmetryEdge parse_symmetry_edge(const std::string& s) {
    if (s.empty() || s == "none") return SymmetryEdge::None;
    if (s == "x_min") return SymmetryEdge::XMin;
    if (s == "x_max") return SymmetryEdge::XMax;
    if (s == "y_min") return SymmetryEdge::YMin;
    if (s == "y_max") return SymmetryEdge::YMax;
    throw ConfigError("unknown symmetry edge '" + s + "'");
}

std::string to_string(SymmetryEdge e) {
    switch (e) {
    case SymmetryEdge::None: return "none";
    case SymmetryEdge::XMin: return "x_min";
    case SymmetryEdge::XMax: return "x_max";
    case SymmetryEdge::YMin: return "y_min";
    case SymmetryEdge::YMax: return "y_max";
    }
    return "none";
}

std::vector<DofMask> constrained_dofs(const Mesh& mesh, const BoundaryConditions& bc) {
    std::vector<DofMask> mask(static_cast<std::size_t>(mesh.node_count()), 0);
    for (const auto& c : bc.constraints)
        for (int n = 0; n < mesh.node_count(); ++n)
            if (c.rect.contains(mesh.node_xy(n))) mask[n] |= c.dofs;

    const DofMask x_normal = dof_bit(U) | dof_bit(RY);
    const DofMask y_normal = dof_bit(V) | dof_bit(RX);
    for (int n = 0; n < mesh.node_count(); ++n) {
        const auto [i, j] = mesh.node_ij(n);
        switch (bc.symmetry) {
        case SymmetryEdge::XMin: if (i == 0) mask[n] |= x_normal; break;
        case SymmetryEdge::XMax: if (i == mesh.nodes_x() - 1) mask[n] |= x_normal; break;
        case SymmetryEdge::YMin: if (j == 0) mask[n] |= y_normal; break;
        case SymmetryEdge::YMax: if (j == mesh.nodes_y() - 1) mask[n] |= y_normal; break;
        case SymmetryEdge::None: break;
        }
    }
    return mask;
}

} // namespace plateopt
