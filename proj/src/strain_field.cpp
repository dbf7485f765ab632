#include "plateopt/strain_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "plateopt/error.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;

struct Mohr {
    double a, b, c, R;
};

Mohr mohr(const StrainTensor2D& t) {
    const double a = 0.5 * (t.xx + t.yy);
    const double b = 0.5 * (t.xx - t.yy);
    return {a, b, t.xy, std::hypot(b, t.xy)};
}

} // namespace

double canonical_angle(double deg) {
    double r = std::fmod(deg, 180.0);
    if (r < 0) r += 180.0;
    if (r >= 180.0) r -= 180.0;
    return r + 0.0;
}

PrincipalStrains principal(const StrainTensor2D& t) {
    const Mohr m = mohr(t);
    PrincipalStrains p;
    p.eps1 = m.a + m.R;
    p.eps2 = m.a - m.R;
    if (m.R == 0.0) {
        p.isotropic = true;
        p.alpha1 = 0.0;
        p.alpha2 = 90.0;
        return p;
    }
    p.alpha1 = canonical_angle(0.5 * std::atan2(m.c, m.b) * kDeg);
    p.alpha2 = canonical_angle(p.alpha1 + 90.0);
    return p;
}

std::optional<std::array<double, 2>> zero_strain(const StrainTensor2D& t) {
    const Mohr m = mohr(t);
    if (m.R == 0.0 || m.R < std::abs(m.a)) return std::nullopt;
    const double phi = std::atan2(m.c, m.b);
    const double delta = std::acos(std::clamp(-m.a / m.R, -1.0, 1.0));
    double b1 = canonical_angle(0.5 * (phi + delta) * kDeg);
    double b2 = canonical_angle(0.5 * (phi - delta) * kDeg);
    if (b2 < b1) std::swap(b1, b2);
    return std::array<double, 2>{b1, b2};
}

double normal_strain(const StrainTensor2D& t, double deg) {
    const Mohr m = mohr(t);
    const double th = 2.0 * deg * kRad;
    return m.a + m.b * std::cos(th) + m.c * std::sin(th);
}

double shear_strain(const StrainTensor2D& t, double deg) {
    const Mohr m = mohr(t);
    const double th = 2.0 * deg * kRad;
    return -m.b * std::sin(th) + m.c * std::cos(th);
}

std::string to_string(DirectionMode m) {
    switch (m) {
    case DirectionMode::PrincipalMajor: return "principal-major";
    case DirectionMode::PrincipalMinor: return "principal-minor";
    case DirectionMode::ZeroA: return "zero-A";
    case DirectionMode::ZeroB: return "zero-B";
    case DirectionMode::None: return "none";
    }
    return "none";
}

FieldKind parse_field_kind(const std::string& s) {
    if (s == "zero-strain-with-minor-fallback") return FieldKind::ZeroWithMinorFallback;
    if (s == "zero-strain") return FieldKind::ZeroOnly;
    if (s == "principal-major") return FieldKind::PrincipalMajor;
    if (s == "principal-minor") return FieldKind::PrincipalMinor;
    throw ConfigError("unknown direction field kind '" + s +
                      "' (zero-strain-with-minor-fallback, zero-strain, principal-major, principal-minor)");
}

std::string to_string(FieldKind k) {
    switch (k) {
    case FieldKind::ZeroWithMinorFallback: return "zero-strain-with-minor-fallback";
    case FieldKind::ZeroOnly: return "zero-strain";
    case FieldKind::PrincipalMajor: return "principal-major";
    case FieldKind::PrincipalMinor: return "principal-minor";
    }
    return "";
}

std::string to_string(Termination t) {
    switch (t) {
    case Termination::Boundary: return "boundary";
    case Termination::MaxSteps: return "max-steps";
    case Termination::ExcludedRegion: return "excluded-region";
    case Termination::ModeIsland: return "mode-island";
    }
    return "";
}

bool DirectionField::inside(double x, double y) const {
    const double tol = 1e-9 * grid.spacing;
    return x >= -tol && x <= width() + tol && y >= -tol && y <= height() + tol;
}

bool DirectionField::is_excluded(double x, double y) const {
    return std::any_of(excluded.begin(), excluded.end(), [&](const Rect& r) { return r.contains(x, y); });
}

StrainTensor2D DirectionField::tensor_at(double x, double y) const {
    const double h = grid.spacing;
    const int i = std::clamp(static_cast<int>(std::floor(x / h)), 0, grid.nodes_x - 2);
    const int j = std::clamp(static_cast<int>(std::floor(y / h)), 0, grid.nodes_y - 2);
    const double s = x / h - i, t = y / h - j;
    const auto at = [&](int ii, int jj) -> const StrainTensor2D& {
        return strains->values[static_cast<std::size_t>(jj * grid.nodes_x + ii)];
    };
    const double w00 = (1 - s) * (1 - t), w10 = s * (1 - t), w11 = s * t, w01 = (1 - s) * t;
    const auto& a = at(i, j);
    const auto& b = at(i + 1, j);
    const auto& c = at(i + 1, j + 1);
    const auto& d = at(i, j + 1);
    return {w00 * a.xx + w10 * b.xx + w11 * c.xx + w01 * d.xx,
            w00 * a.yy + w10 * b.yy + w11 * c.yy + w01 * d.yy,
            w00 * a.xy + w10 * b.xy + w11 * c.xy + w01 * d.xy};
}

namespace {

struct Candidate {
    DirectionMode mode;
    double angle;
};

// Directions available at a tensor for the field kind (at most two).
int candidates(const StrainTensor2D& t, FieldKind kind, Candidate out[2]) {
    switch (kind) {
    case FieldKind::PrincipalMajor:
        out[0] = {DirectionMode::PrincipalMajor, principal(t).alpha1};
        return 1;
    case FieldKind::PrincipalMinor:
        out[0] = {DirectionMode::PrincipalMinor, principal(t).alpha2};
        return 1;
    case FieldKind::ZeroOnly:
    case FieldKind::ZeroWithMinorFallback:
        if (const auto z = zero_strain(t)) {
            out[0] = {DirectionMode::ZeroA, (*z)[0]};
            out[1] = {DirectionMode::ZeroB, (*z)[1]};
            return 2;
        }
        if (kind == FieldKind::ZeroOnly) return 0;
        out[0] = {DirectionMode::PrincipalMinor, principal(t).alpha2};
        return 1;
    }
    return 0;
}

} // namespace

double quantize_angle(double deg) {
    return canonical_angle(std::round(deg / kAngleResolution) * kAngleResolution);
}

DirectionField direction_field(const StrainField& strains, FieldKind kind, Branch branch,
                               std::vector<Rect> excluded) {
    if (strains.values.empty() || strains.grid.nodes_x < 2 || strains.grid.nodes_y < 2)
        throw ConfigError("direction field needs a strain field on at least a 2x2 grid");
    if (strains.values.size() != static_cast<std::size_t>(strains.grid.nodes_x * strains.grid.nodes_y))
        throw ConfigError("strain field size does not match its grid");

    DirectionField f;
    f.kind = kind;
    f.branch = branch;
    f.grid = strains.grid;
    f.strains = std::make_shared<const StrainField>(strains);
    f.excluded = std::move(excluded);
    f.entries.resize(strains.values.size());
    for (int j = 0; j < f.grid.nodes_y; ++j) {
        for (int i = 0; i < f.grid.nodes_x; ++i) {
            const std::size_t n = static_cast<std::size_t>(j * f.grid.nodes_x + i);
            DirectionEntry& e = f.entries[n];
            if (f.is_excluded(i * f.grid.spacing, j * f.grid.spacing)) {
                e.masked = true;
                continue;
            }
            Candidate c[2];
            const int k = candidates(strains.values[n], kind, c);
            if (k == 0) continue;
            const Candidate& pick = (k == 2 && branch == Branch::B) ? c[1] : c[0];
            e.mode = pick.mode;
            e.angle = quantize_angle(pick.angle);
        }
    }
    return f;
}

namespace {

struct Heading {
    DirectionMode mode = DirectionMode::None;
    double angle = 0;
    double dx = 0, dy = 0;
};

// Direction at a tensor closest to the previous heading, signed along it.
std::optional<Heading> follow(const StrainTensor2D& t, FieldKind kind, double pdx, double pdy) {
    Candidate c[2];
    const int k = candidates(t, kind, c);
    if (k == 0) return std::nullopt;
    Heading best;
    double best_dot = -1;
    for (int i = 0; i < k; ++i) {
        const double dx = std::cos(c[i].angle * kRad), dy = std::sin(c[i].angle * kRad);
        const double dot = dx * pdx + dy * pdy;
        if (std::abs(dot) > best_dot) {
            best_dot = std::abs(dot);
            const double s = dot < 0 ? -1.0 : 1.0;
            best = {c[i].mode, c[i].angle, s * dx, s * dy};
        }
    }
    return best;
}

} // namespace

Trajectory trace(const DirectionField& field, double x, double y, Branch branch, const TraceParams& params) {
    if (!field.inside(x, y))
        throw ConfigError("seed (" + format_double(x) + ", " + format_double(y) + ") lies outside the field");
    if (field.is_excluded(x, y))
        throw ConfigError("seed (" + format_double(x) + ", " + format_double(y) + ") lies in an excluded region");
    const double h = params.step > 0 ? params.step : 0.25 * field.grid.spacing;
    if (params.max_steps < 0) throw ConfigError("max_steps must be non-negative");

    Trajectory tr;
    tr.seed_x = x;
    tr.seed_y = y;
    tr.branch = branch;

    Candidate c[2];
    const int k = candidates(field.tensor_at(x, y), field.kind, c);
    if (k == 0) {
        tr.reason = Termination::ModeIsland;
        return tr;
    }
    const Candidate& first = (k == 2 && branch == Branch::B) ? c[1] : c[0];
    const double sign = params.reverse ? -1.0 : 1.0;
    Heading cur{first.mode, first.angle, sign * std::cos(first.angle * kRad), sign * std::sin(first.angle * kRad)};
    tr.vertices.push_back({x, y, cur.mode, cur.angle});

    for (int step = 0; step < params.max_steps; ++step) {
        const double mx = x + 0.5 * h * cur.dx, my = y + 0.5 * h * cur.dy;
        if (!field.inside(mx, my)) {
            tr.reason = Termination::Boundary;
            return tr;
        }
        const auto mid = follow(field.tensor_at(mx, my), field.kind, cur.dx, cur.dy);
        if (!mid) {
            tr.reason = Termination::ModeIsland;
            return tr;
        }
        const double nx = x + h * mid->dx, ny = y + h * mid->dy;
        if (!field.inside(nx, ny)) {
            tr.reason = Termination::Boundary;
            return tr;
        }
        if (field.is_excluded(nx, ny)) {
            tr.reason = Termination::ExcludedRegion;
            return tr;
        }
        const auto next = follow(field.tensor_at(nx, ny), field.kind, mid->dx, mid->dy);
        if (!next) {
            tr.reason = Termination::ModeIsland;
            return tr;
        }
        x = nx;
        y = ny;
        cur = *next;
        tr.vertices.push_back({x, y, cur.mode, cur.angle});
    }
    tr.reason = Termination::MaxSteps;
    return tr;
}

void write_trajectory_csv(const Trajectory& t, std::ostream& os) {
    os << "# seed " << format_double(t.seed_x) << ' ' << format_double(t.seed_y) << " branch "
       << (t.branch == Branch::A ? 'A' : 'B') << " termination " << to_string(t.reason) << '\n';
    os << "x,y,mode,angle\n";
    for (const auto& v : t.vertices)
        os << format_double(v.x) << ',' << format_double(v.y) << ',' << to_string(v.mode) << ','
           << format_double(v.angle) << '\n';
}

void write_direction_field_csv(const DirectionField& f, std::ostream& os) {
    os << "# direction-field kind " << to_string(f.kind) << " branch " << (f.branch == Branch::A ? 'A' : 'B')
       << " nodes_x " << f.grid.nodes_x << " nodes_y " << f.grid.nodes_y << " spacing "
       << format_double(f.grid.spacing) << '\n';
    os << "node,x,y,mode,angle,masked\n";
    for (std::size_t n = 0; n < f.entries.size(); ++n) {
        const int i = static_cast<int>(n) % f.grid.nodes_x, j = static_cast<int>(n) / f.grid.nodes_x;
        const auto& e = f.entries[n];
        os << n << ',' << format_double(i * f.grid.spacing) << ',' << format_double(j * f.grid.spacing) << ','
           << to_string(e.mode) << ',' << format_double(e.angle) << ',' << (e.masked ? 1 : 0) << '\n';
    }
}

std::vector<std::vector<int>> fallback_islands(const DirectionField& f) {
    const int nx = f.grid.nodes_x, ny = f.grid.nodes_y;
    const auto is_fallback = [&](int n) {
        const auto& e = f.entries[static_cast<std::size_t>(n)];
        return f.kind == FieldKind::ZeroWithMinorFallback && !e.masked && e.mode == DirectionMode::PrincipalMinor;
    };
    std::vector<char> seen(f.entries.size(), 0);
    std::vector<std::vector<int>> islands;
    for (int start = 0; start < nx * ny; ++start) {
        if (seen[start] || !is_fallback(start)) continue;
        std::vector<int> island, stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            const int n = stack.back();
            stack.pop_back();
            island.push_back(n);
            const int i = n % nx, j = n / nx;
            const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[0] >= nx || q[1] < 0 || q[1] >= ny) continue;
                const int m = q[1] * nx + q[0];
                if (!seen[m] && is_fallback(m)) {
                    seen[m] = 1;
                    stack.push_back(m);
                }
            }
        }
        std::sort(island.begin(), island.end());
        islands.push_back(std::move(island));
    }
    return islands;
}

} // namespace plateopt
