#include "plateopt/target_compare.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "plateopt/error.hpp"
#include "plateopt/strain_field.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

void ScalarField::validate() const {
    if (!(spacing > 0) || !std::isfinite(spacing)) throw ConfigError("field spacing must be positive");
    if (nx < 1 || ny < 1) throw ConfigError("field dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
        throw ConfigError("field has " + std::to_string(values.size()) + " values, dims give " +
                          std::to_string(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)));
    if (!mask.empty() && mask.size() != values.size()) throw ConfigError("field mask size mismatch");
    for (std::size_t n = 0; n < values.size(); ++n)
        if (!masked(n) && !std::isfinite(values[n]))
            throw ConfigError("field value " + std::to_string(n) + " is not finite");
}

std::optional<double> ScalarField::sample(double x, double y) const {
    const double u = (x - x0) / spacing, v = (y - y0) / spacing;
    const double tol = 1e-9;
    if (u < -tol || v < -tol || u > nx - 1 + tol || v > ny - 1 + tol) return std::nullopt;
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, std::max(0, nx - 2));
    const int j = std::clamp(static_cast<int>(std::floor(v)), 0, std::max(0, ny - 2));
    const double s = nx > 1 ? std::clamp(u - i, 0.0, 1.0) : 0.0;
    const double t = ny > 1 ? std::clamp(v - j, 0.0, 1.0) : 0.0;
    double sum = 0;
    const int di = nx > 1 ? 1 : 0, dj = ny > 1 ? 1 : 0;
    const struct { int i, j; double w; } corners[4] = {
        {i, j, (1 - s) * (1 - t)}, {i + di, j, s * (1 - t)}, {i + di, j + dj, s * t}, {i, j + dj, (1 - s) * t}};
    for (const auto& c : corners) {
        if (c.w == 0.0) continue;
        const std::size_t n = index(c.i, c.j);
        if (masked(n)) return std::nullopt;
        sum += c.w * values[n];
    }
    return sum;
}

ScalarField field_from_nodes(const Mesh& mesh, std::span<const double> node_values) {
    if (node_values.size() != static_cast<std::size_t>(mesh.node_count()))
        throw ConfigError("node value count does not match the mesh");
    ScalarField f;
    f.spacing = mesh.element_size();
    f.nx = mesh.nodes_x();
    f.ny = mesh.nodes_y();
    f.values.assign(node_values.begin(), node_values.end());
    return f;
}

ScalarField w_field(const Mesh& mesh, const DisplacementField& disp) {
    std::vector<double> w(static_cast<std::size_t>(mesh.node_count()));
    for (int n = 0; n < mesh.node_count(); ++n) w[static_cast<std::size_t>(n)] = disp.w(n);
    return field_from_nodes(mesh, w);
}

void save_field(const ScalarField& f, std::ostream& os) {
    f.validate();
    os << "# gridded-field 1\n";
    os << "origin," << format_double(f.x0) << ',' << format_double(f.y0) << '\n';
    os << "spacing," << format_double(f.spacing) << '\n';
    os << "dims," << f.nx << ',' << f.ny << '\n';
    for (int j = 0; j < f.ny; ++j) {
        for (int i = 0; i < f.nx; ++i) {
            const std::size_t n = f.index(i, j);
            if (i) os << ',';
            if (f.masked(n)) os << "NA";
            else os << format_double(f.values[n]);
        }
        os << '\n';
    }
}

void save_field(const ScalarField& f, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    save_field(f, os);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> header(std::istream& is, const char* key, std::size_t count) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(std::string("field file: missing '") + key + "' line");
    auto cells = split(line);
    if (cells.size() != count + 1 || cells[0] != key)
        throw ConfigError(std::string("field file: malformed '") + key + "' line");
    cells.erase(cells.begin());
    return cells;
}

} // namespace

ScalarField load_field(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# gridded-field", 0) != 0)
        throw ConfigError("field file: missing '# gridded-field' header");
    if (line != "# gridded-field 1" && line != "# gridded-field 1\r")
        throw ConfigError("field file: unsupported version");
    ScalarField f;
    const auto origin = header(is, "origin", 2);
    f.x0 = parse_double(origin[0]);
    f.y0 = parse_double(origin[1]);
    f.spacing = parse_double(header(is, "spacing", 1)[0]);
    const auto dims = header(is, "dims", 2);
    f.nx = static_cast<int>(parse_long(dims[0]));
    f.ny = static_cast<int>(parse_long(dims[1]));
    if (f.nx < 1 || f.ny < 1) throw ConfigError("field file: dimensions must be positive");

    bool any_mask = false;
    std::vector<char> mask;
    int row = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (static_cast<int>(cells.size()) != f.nx)
            throw ConfigError("field file: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                              " values, expected " + std::to_string(f.nx));
        for (const auto& c : cells) {
            if (c == "NA") {
                f.values.push_back(0.0);
                mask.push_back(1);
                any_mask = true;
            } else {
                const double v = parse_double(c);
                if (!std::isfinite(v)) throw ConfigError("field file: non-finite value in row " + std::to_string(row));
                f.values.push_back(v);
                mask.push_back(0);
            }
        }
        ++row;
    }
    if (row != f.ny)
        throw ConfigError("field file: " + std::to_string(row) + " rows, expected " + std::to_string(f.ny));
    if (any_mask) f.mask = std::move(mask);
    f.validate();
    return f;
}

ScalarField load_field(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path.string() + "'");
    return load_field(is);
}

Resampled resample_to_mesh(const ScalarField& field, const Mesh& mesh, std::span<const int> nodes,
                           const FieldTransform& tr, bool allow_outside) {
    field.validate();
    if (!(tr.scale > 0)) throw ConfigError("field transform scale must be positive");
    Resampled out;
    for (int n : nodes) {
        const Point2 p = mesh.node_xy(n);
        const double x = tr.tx + tr.scale * p.x, y = tr.ty + tr.scale * p.y;
        const auto v = field.sample(x, y);
        if (v) {
            out.nodes.push_back(n);
            out.values.push_back(*v);
            continue;
        }
        const double u = (x - field.x0) / field.spacing, w = (y - field.y0) / field.spacing;
        const bool outside = u < -1e-9 || w < -1e-9 || u > field.nx - 1 + 1e-9 || w > field.ny - 1 + 1e-9;
        if (outside && !allow_outside)
            throw ConfigError("mesh node " + std::to_string(n) + " maps outside the target field");
        out.dropped.push_back(n);
    }
    if (out.nodes.empty()) throw ModelError("target field does not overlap the mesh");
    return out;
}

ScalarField normalize_at(const ScalarField& field, Point2 p0, double epsilon) {
    const auto ref = field.sample(p0.x, p0.y);
    if (!ref) throw ModelError("normalization point lies outside the field or on a masked cell");
    if (!(std::abs(*ref) > epsilon))
        throw ModelError("field value at the normalization point is " + format_double(*ref) +
                         ", too close to zero");
    ScalarField out = field;
    for (std::size_t n = 0; n < out.values.size(); ++n)
        if (!out.masked(n)) out.values[n] = field.values[n] / *ref;
    return out;
}

namespace {

struct Accum {
    double sum_sq = 0, max_abs = 0;
    void add(double d) {
        sum_sq += d * d;
        max_abs = std::max(max_abs, std::abs(d));
    }
    DeviationStats stats(std::size_t n, double scale) const {
        DeviationStats s;
        s.rms = std::sqrt(sum_sq / static_cast<double>(n));
        s.max_abs = max_abs;
        s.rms_relative = scale > 0 ? s.rms / scale : 0.0;
        s.max_relative = scale > 0 ? s.max_abs / scale : 0.0;
        return s;
    }
};

} // namespace

ComparisonReport compare(const ScalarField& a, const ScalarField& b, std::optional<Point2> p0,
                         std::span<const Probe> probes) {
    a.validate();
    b.validate();
    std::vector<double> av, bv;
    for (int j = 0; j < a.ny; ++j)
        for (int i = 0; i < a.nx; ++i) {
            const std::size_t n = a.index(i, j);
            if (a.masked(n)) continue;
            const auto v = b.sample(a.x(i), a.y(j));
            if (!v) continue;
            av.push_back(a.values[n]);
            bv.push_back(*v);
        }
    if (av.empty()) throw ModelError("compared fields do not overlap");

    ComparisonReport r;
    r.overlap = av.size();
    double ab = 0, bb = 0, scale = 0;
    for (std::size_t n = 0; n < av.size(); ++n) {
        ab += av[n] * bv[n];
        bb += bv[n] * bv[n];
        scale = std::max(scale, std::abs(av[n]));
    }
    if (bb == 0.0) throw ModelError("second field is zero on the overlap; scale factor undefined");
    r.k = ab / bb;

    Accum raw, fitted;
    for (std::size_t n = 0; n < av.size(); ++n) {
        raw.add(av[n] - bv[n]);
        fitted.add(av[n] - r.k * bv[n]);
    }
    r.raw = raw.stats(av.size(), scale);
    r.fitted = fitted.stats(av.size(), scale);

    if (p0) {
        r.p0 = p0;
        r.a_p0 = a.sample(p0->x, p0->y);
        r.b_p0 = b.sample(p0->x, p0->y);
        if (!r.a_p0 || !r.b_p0) throw ModelError("normalization point lies outside a compared field");
        if (*r.a_p0 == 0.0 || *r.b_p0 == 0.0) throw ModelError("field value at the normalization point is zero");
        Accum norm;
        for (std::size_t n = 0; n < av.size(); ++n) norm.add(av[n] / *r.a_p0 - bv[n] / *r.b_p0);
        r.normalized = norm.stats(av.size(), 1.0);
    }

    for (const auto& p : probes) {
        ProbeResult pr{p.name, p.point, a.sample(p.point.x, p.point.y), b.sample(p.point.x, p.point.y), {}};
        if (pr.a && pr.b && *pr.a != 0.0) pr.relative_deviation = (*pr.b - *pr.a) / *pr.a;
        r.probes.push_back(pr);
    }
    return r;
}

nlohmann::json report_json(const ComparisonReport& r) {
    using nlohmann::json;
    const auto stats = [](const DeviationStats& s) {
        return json{{"rms", s.rms}, {"max_abs", s.max_abs}, {"rms_relative", s.rms_relative},
                    {"max_relative", s.max_relative}};
    };
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j{{"overlap_nodes", r.overlap}, {"k", r.k}, {"raw", stats(r.raw)}, {"fitted", stats(r.fitted)}};
    if (r.p0) {
        j["p0"] = {{"x", r.p0->x}, {"y", r.p0->y}, {"a", opt(r.a_p0)}, {"b", opt(r.b_p0)}};
        j["normalized"] = stats(*r.normalized);
    }
    json probes = json::array();
    for (const auto& p : r.probes)
        probes.push_back({{"name", p.name}, {"x", p.point.x}, {"y", p.point.y}, {"a", opt(p.a)},
                          {"b", opt(p.b)}, {"relative_deviation", opt(p.relative_deviation)}});
    j["probes"] = probes;
    return j;
}

double min_strain_audit(const StrainField& strains, double threshold) {
    const int nx = strains.grid.nodes_x, ny = strains.grid.nodes_y;
    if (strains.values.size() != static_cast<std::size_t>(nx * ny) || nx < 2 || ny < 2)
        throw ConfigError("strain field does not match its grid");
    double below = 0, total = 0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double wx = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
            const double wy = (j == 0 || j == ny - 1) ? 0.5 : 1.0;
            const double area = wx * wy;
            const auto p = principal(strains.values[static_cast<std::size_t>(j * nx + i)]);
            total += area;
            if (std::max(std::abs(p.eps1), std::abs(p.eps2)) < threshold) below += area;
        }
    return below / total;
}

} // namespace plateopt
