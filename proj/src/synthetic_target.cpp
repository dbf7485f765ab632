#include "plateopt/synthetic_target.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "plateopt/error.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

void add_noise(ScalarField& field, const NoiseSpec& noise) {
    if (!(noise.sigma >= 0) || !std::isfinite(noise.sigma)) throw ConfigError("noise sigma must be >= 0");
    if (noise.sigma == 0) return;
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> g(0.0, noise.sigma);
    for (std::size_t n = 0; n < field.values.size(); ++n)
        if (!field.masked(n)) field.values[n] += g(rng);
}

void NavierPlate::validate() const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string("plate ") + name + " must be positive");
    };
    positive(a, "a");
    positive(b, "b");
    positive(thickness, "thickness");
    positive(E, "E");
    positive(spacing, "spacing");
    if (!std::isfinite(pressure)) throw ConfigError("plate pressure must be finite");
    if (!(std::abs(nu) < 0.5)) throw ConfigError("plate nu must lie in (-0.5, 0.5)");
    if (thickness > 0.1 * std::min(a, b))
        throw ConfigError("plate thickness exceeds a tenth of the smaller span; thin-plate solution not valid");
    if (terms < 1) throw ConfigError("plate series needs at least one term");
    for (double len : {a, b}) {
        const double r = len / spacing;
        if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
            throw ConfigError("plate spans must be integer multiples of the grid spacing");
    }
}

double NavierPlate::deflection(double x, double y) const {
    constexpr double pi = std::numbers::pi;
    double sum = 0;
    for (int m = terms - (terms % 2 == 0 ? 1 : 0); m >= 1; m -= 2)
        for (int n = terms - (terms % 2 == 0 ? 1 : 0); n >= 1; n -= 2) {
            const double s = m * m / (a * a) + n * n / (b * b);
            sum += std::sin(m * pi * x / a) * std::sin(n * pi * y / b) / (m * n * s * s);
        }
    return 16.0 * pressure / (std::pow(pi, 6) * rigidity()) * sum;
}

ScalarField navier_field(const NavierPlate& plate) {
    plate.validate();
    constexpr double pi = std::numbers::pi;
    ScalarField f;
    f.spacing = plate.spacing;
    f.nx = static_cast<int>(std::lround(plate.a / plate.spacing)) + 1;
    f.ny = static_cast<int>(std::lround(plate.b / plate.spacing)) + 1;
    const int top = plate.terms - (plate.terms % 2 == 0 ? 1 : 0);
    const int harmonics = (top + 1) / 2;

    // sin tables per harmonic and grid line; edges are exactly zero.
    const auto table = [&](int count, double len) {
        std::vector<double> t(static_cast<std::size_t>(harmonics) * count, 0.0);
        for (int h = 0; h < harmonics; ++h)
            for (int i = 1; i + 1 < count; ++i)
                t[static_cast<std::size_t>(h) * count + i] = std::sin((2 * h + 1) * pi * (i * plate.spacing) / len);
        return t;
    };
    const auto sx = table(f.nx, plate.a), sy = table(f.ny, plate.b);

    // inner[m][j] = sum_n c_mn sin(n pi y_j / b), summed from the highest harmonic down.
    std::vector<double> inner(static_cast<std::size_t>(harmonics) * f.ny, 0.0);
    for (int hm = 0; hm < harmonics; ++hm) {
        const int m = 2 * hm + 1;
        for (int hn = harmonics - 1; hn >= 0; --hn) {
            const int n = 2 * hn + 1;
            const double s = m * m / (plate.a * plate.a) + n * n / (plate.b * plate.b);
            const double c = 1.0 / (static_cast<double>(m) * n * s * s);
            for (int j = 0; j < f.ny; ++j)
                inner[static_cast<std::size_t>(hm) * f.ny + j] += c * sy[static_cast<std::size_t>(hn) * f.ny + j];
        }
    }
    const double scale = 16.0 * plate.pressure / (std::pow(pi, 6) * plate.rigidity());
    f.values.assign(static_cast<std::size_t>(f.nx) * f.ny, 0.0);
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) {
            double sum = 0;
            for (int hm = harmonics - 1; hm >= 0; --hm)
                sum += sx[static_cast<std::size_t>(hm) * f.nx + i] * inner[static_cast<std::size_t>(hm) * f.ny + j];
            f.values[f.index(i, j)] = -scale * sum;
        }
    return f;
}

namespace {

LoadDirection parse_direction(const std::string& s) {
    if (s == "-z") return LoadDirection::MinusZ;
    if (s == "+z") return LoadDirection::PlusZ;
    throw ConfigError("direction must be '-z' or '+z', got '" + s + "'");
}

std::string direction_name(LoadDirection d) { return d == LoadDirection::MinusZ ? "-z" : "+z"; }

double number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) throw ConfigError(std::string("recipe needs numeric '") + key + "'");
    return j.at(key).get<double>();
}

} // namespace

TargetRecipe parse_recipe(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("target recipe must be an object");
    TargetRecipe r;
    const std::string variant = j.value("variant", std::string());
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        r.noise.sigma = number(n, "sigma");
        if (n.contains("seed")) r.noise.seed = n.at("seed").get<std::uint64_t>();
        if (!(r.noise.sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
    }
    if (variant == "forward-solve") {
        r.variant = TargetVariant::ForwardSolve;
        r.direction = parse_direction(j.value("direction", std::string("-z")));
        if (!j.contains("loads") || !j.at("loads").is_array() || j.at("loads").empty())
            throw ConfigError("forward-solve recipe needs a non-empty 'loads' list");
        for (const auto& l : j.at("loads")) {
            PlantedLoad p{number(l, "x"), number(l, "y"), number(l, "F")};
            if (!(p.F >= 0)) throw ConfigError("planted load amplitudes must be >= 0");
            r.loads.push_back(p);
        }
    } else if (variant == "analytic") {
        r.variant = TargetVariant::Analytic;
        const std::string bench = j.value("benchmark", std::string());
        if (bench != "navier-simply-supported-uniform")
            throw ConfigError("unknown analytic benchmark '" + bench + "'");
        auto& p = r.plate;
        p.a = number(j, "a");
        p.b = number(j, "b");
        p.thickness = number(j, "thickness");
        p.E = number(j, "E");
        p.nu = number(j, "nu");
        p.pressure = number(j, "pressure");
        p.spacing = number(j, "spacing");
        if (j.contains("terms")) p.terms = j.at("terms").get<int>();
        p.validate();
    } else if (variant == "file") {
        r.variant = TargetVariant::File;
        if (!j.contains("path") || !j.at("path").is_string()) throw ConfigError("file recipe needs 'path'");
        r.path = j.at("path").get<std::string>();
        if (r.path.is_relative() && !base_dir.empty()) r.path = base_dir / r.path;
    } else {
        throw ConfigError("unknown target variant '" + variant + "'");
    }
    return r;
}

GeneratedTarget generate(const TargetRecipe& recipe, const PlateModel* model, const SystemMatrix* sys) {
    using nlohmann::json;
    GeneratedTarget out;
    json noise{{"sigma", recipe.noise.sigma}, {"seed", recipe.noise.seed}};
    switch (recipe.variant) {
    case TargetVariant::ForwardSolve: {
        if (!model) throw ConfigError("forward-solve target needs a model");
        LoadCase lc;
        lc.description = "planted loads";
        json loads = json::array();
        for (const auto& p : recipe.loads) {
            const auto node = model->mesh.node_at(p.x, p.y);
            if (!node)
                throw ConfigError("planted load at (" + format_double(p.x) + ", " + format_double(p.y) +
                                  ") does not coincide with a mesh node");
            loads.push_back({{"node", *node}, {"x", p.x}, {"y", p.y}, {"F", p.F}});
            if (p.F != 0.0) lc.add(*node, p.F, recipe.direction);
        }
        std::optional<SystemMatrix> local;
        if (!sys) {
            local = assemble(*model);
            sys = &*local;
        }
        out.field = w_field(model->mesh, solve(*sys, lc));
        out.loads = lc;
        out.record = {{"variant", "forward-solve"}, {"direction", direction_name(recipe.direction)}, {"loads", loads}};
        break;
    }
    case TargetVariant::Analytic: {
        const auto& p = recipe.plate;
        out.field = navier_field(p);
        out.record = {{"variant", "analytic"},
                      {"benchmark", "navier-simply-supported-uniform"},
                      {"a", p.a}, {"b", p.b}, {"thickness", p.thickness}, {"E", p.E}, {"nu", p.nu},
                      {"pressure", p.pressure}, {"spacing", p.spacing}, {"terms", p.terms}};
        break;
    }
    case TargetVariant::File:
        out.field = load_field(recipe.path);
        out.record = {{"variant", "file"}, {"path", recipe.path.generic_string()}};
        break;
    }
    add_noise(out.field, recipe.noise);
    out.record["noise"] = noise;
    return out;
}

std::vector<NoiseSweepRow> noise_sweep(const ComplianceMatrix& m, const Eigen::VectorXd& clean_target,
                                       const std::array<int, 3>& true_nodes, const Amplitudes& true_F,
                                       std::span<const double> sigmas, int trials, std::uint64_t seed,
                                       const Bounds& bounds, const SearchOptions& opt) {
    if (trials < 1) throw ConfigError("noise sweep needs at least one trial");
    std::vector<Eigen::VectorXd> z;
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t));
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd v(clean_target.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
        z.push_back(std::move(v));
    }
    const double norm_true = std::sqrt(true_F[0] * true_F[0] + true_F[1] * true_F[1] + true_F[2] * true_F[2]);
    if (norm_true == 0) throw ConfigError("noise sweep needs non-zero planted amplitudes");

    std::vector<NoiseSweepRow> rows;
    for (double sigma : sigmas) {
        if (!(sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
        NoiseSweepRow row;
        row.sigma = sigma;
        row.trials = trials;
        for (int t = 0; t < trials; ++t) {
            const Eigen::VectorXd target = clean_target + sigma * z[static_cast<std::size_t>(t)];
            const auto r = outer_search(m, target, bounds, opt);
            if (r.nodes == true_nodes) ++row.nodes_recovered;
            bool loaded = true;
            for (int k = 0; k < 3; ++k)
                if (true_F[k] >= bounds.zero_threshold() && r.nodes[k] != true_nodes[k]) loaded = false;
            if (loaded) ++row.loaded_nodes_recovered;
            double d2 = 0;
            for (int k = 0; k < 3; ++k) d2 += (r.F[k] - true_F[k]) * (r.F[k] - true_F[k]);
            const double err = std::sqrt(d2) / norm_true;
            row.mean_amplitude_error += err / trials;
            row.max_amplitude_error = std::max(row.max_amplitude_error, err);
        }
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json sweep_json(std::span<const NoiseSweepRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"sigma", r.sigma}, {"trials", r.trials}, {"nodes_recovered", r.nodes_recovered},
                       {"loaded_nodes_recovered", r.loaded_nodes_recovered},
                       {"mean_amplitude_error", r.mean_amplitude_error},
                       {"max_amplitude_error", r.max_amplitude_error}});
    return out;
}

} // namespace plateopt
