#include "cli_driver.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "plateopt/compliance.hpp"
#include "plateopt/error.hpp"
#include "plateopt/fe_solver.hpp"
#include "plateopt/load_optimizer.hpp"
#include "plateopt/model_config.hpp"
#include "plateopt/strain_field.hpp"
#include "plateopt/synthetic_target.hpp"
#include "plateopt/target_compare.hpp"
#include "plateopt/util.hpp"

namespace plateopt::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json input_entry(const std::string& path) { return {{"path", path}, {"digest", digest(read_file(path))}}; }

std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, sep)) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> numbers(const std::string& s, std::size_t count, const std::string& what) {
    const auto cells = split(s);
    if (cells.size() != count)
        throw ConfigError(what + ": expected " + std::to_string(count) + " comma-separated values, got '" + s + "'");
    std::vector<double> v;
    for (const auto& c : cells) v.push_back(parse_double(c));
    return v;
}

Point2 parse_point(const std::string& s, const std::string& what) {
    const auto v = numbers(s, 2, what);
    return {v[0], v[1]};
}

Probe parse_probe(const std::string& s) {
    const auto cells = split(s);
    if (cells.size() != 3 || cells[0].empty()) throw ConfigError("--probe: expected name,x,y, got '" + s + "'");
    return {cells[0], {parse_double(cells[1]), parse_double(cells[2])}};
}

LoadDirection parse_direction(const std::string& s) {
    if (s == "-z") return LoadDirection::MinusZ;
    if (s == "+z") return LoadDirection::PlusZ;
    throw ConfigError("--direction must be -z or +z");
}

// Output directory that records the digest of every file written to it.
class OutputDir {
public:
    explicit OutputDir(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory '" + dir + "'");
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os || !(os << content)) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
        outputs_.push_back({{"file", name}, {"digest", digest(content)}});
    }

    const fs::path& path() const { return dir_; }

    void manifest(const std::string& command, const json& parameters, const std::string& model_hash,
                  const json& inputs, const json& extra = json::object()) {
        json m{{"tool", "plateopt"},
               {"versions",
                {{"plateopt", kVersion},
                 {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION)},
                 {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                       std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
               {"command", command},
               {"parameters", parameters},
               {"model_hash", model_hash},
               {"inputs", inputs},
               {"outputs", outputs_}};
        m["config_hash"] =
            digest(json{{"command", command}, {"parameters", parameters}, {"model_hash", model_hash}}.dump());
        for (const auto& [k, v] : extra.items()) m[k] = v;
        const std::string text = m.dump(2) + "\n";
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        if (!os || !(os << text)) throw ConfigError("cannot write manifest");
    }

private:
    fs::path dir_;
    json outputs_ = json::array();
};

struct Model {
    ModelDefinition def;
    PlateModel plate;
};

Model load_model(const std::string& path) {
    Model m;
    m.def = parse_model(read_json_file(path));
    m.plate = m.def.build_plate();
    return m;
}

// Outer surface of the thinnest laminate in use.
double default_surface_z(const PlateModel& model) {
    double t = std::numeric_limits<double>::infinity();
    for (int e = 0; e < model.mesh.element_count(); ++e) t = std::min(t, model.element_stiffness(e).thickness);
    return t / 2;
}

struct LoadOptions {
    std::vector<std::string> loads;
    std::string result;
    std::string direction = "-z";
};

void add_load_options(CLI::App* app, LoadOptions& o) {
    app->add_option("--load", o.loads, "Concentrated load x,y,F [mm, mm, N] (repeatable)");
    app->add_option("--result", o.result, "Take the loads from an optimize result file");
    app->add_option("--direction", o.direction, "Load direction (-z or +z)")->capture_default_str();
}

LoadCase build_loads(const Mesh& mesh, const LoadOptions& o) {
    const LoadDirection dir = parse_direction(o.direction);
    LoadCase lc;
    for (const auto& s : o.loads) {
        const auto v = numbers(s, 3, "--load");
        const auto node = mesh.node_at(v[0], v[1]);
        if (!node) throw ConfigError("--load at (" + s + ") does not coincide with a mesh node");
        if (!(v[2] >= 0)) throw ConfigError("--load amplitudes must be >= 0");
        lc.add(*node, v[2], dir);
    }
    if (!o.result.empty()) {
        const json r = read_json_file(o.result);
        if (!r.contains("loads") || !r.at("loads").is_array()) throw ConfigError("result file has no 'loads'");
        for (const auto& l : r.at("loads")) {
            const int node = l.at("node").get<int>();
            const double F = l.at("F").get<double>();
            if (node < 0 || node >= mesh.node_count()) throw ConfigError("result file node out of range");
            if (F > 0 && !l.value("zero", false)) lc.add(node, F, dir);
        }
    }
    if (lc.loads.empty()) throw ConfigError("no loads given (use --load or --result)");
    return lc;
}

json loads_json(const LoadOptions& o) { return {{"load", o.loads}, {"result", o.result}, {"direction", o.direction}}; }

std::string displacement_csv(const Mesh& mesh, const DisplacementField& d) {
    std::ostringstream os;
    os << "node,x,y,u,v,w,rx,ry\n";
    for (int n = 0; n < mesh.node_count(); ++n) {
        const auto p = mesh.node_xy(n);
        os << n << ',' << format_double(p.x) << ',' << format_double(p.y);
        for (double v : d.values[static_cast<std::size_t>(n)]) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

std::string strain_csv(const Mesh& mesh, const StrainField& s) {
    std::ostringstream os;
    os << "# surface-strain z " << format_double(s.z) << "\nnode,x,y,exx,eyy,exy\n";
    for (int n = 0; n < mesh.node_count(); ++n) {
        const auto p = mesh.node_xy(n);
        const auto& t = s.values[static_cast<std::size_t>(n)];
        os << n << ',' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(t.xx) << ','
           << format_double(t.yy) << ',' << format_double(t.xy) << '\n';
    }
    return os.str();
}

std::string field_text(const ScalarField& f) {
    std::ostringstream os;
    save_field(f, os);
    return os.str();
}

ComplianceMatrix restrict_rows(const ComplianceMatrix& m, const std::vector<int>& nodes) {
    if (nodes == m.eval_nodes) return m;
    ComplianceMatrix r = m;
    r.eval_nodes = nodes;
    r.zeta.resize(static_cast<Eigen::Index>(nodes.size()), m.zeta.cols());
    std::size_t i = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        while (i < m.eval_nodes.size() && m.eval_nodes[i] != nodes[k]) ++i;
        if (i == m.eval_nodes.size()) throw ConfigError("target node is not an evaluation node of the matrix");
        r.zeta.row(static_cast<Eigen::Index>(k)) = m.zeta.row(static_cast<Eigen::Index>(i));
    }
    return r;
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
    std::string config, out;
    LoadOptions loads;
    std::optional<double> z;
};

void cmd_solve(const SolveArgs& a, std::ostream& log) {
    const Model m = load_model(a.config);
    const LoadCase lc = build_loads(m.plate.mesh, a.loads);
    const SystemMatrix sys = assemble(m.plate);
    const DisplacementField disp = solve(sys, lc);
    const double z = a.z.value_or(default_surface_z(m.plate));
    const StrainField top = surface_strain(disp, m.plate, z);

    OutputDir out(a.out);
    out.write("displacement.csv", displacement_csv(m.plate.mesh, disp));
    out.write("w_field.csv", field_text(w_field(m.plate.mesh, disp)));
    out.write("strain.csv", strain_csv(m.plate.mesh, top));
    json inputs = json::array({input_entry(a.config)});
    if (!a.loads.result.empty()) inputs.push_back(input_entry(a.loads.result));
    out.manifest("solve", {{"config", a.config}, {"loads", loads_json(a.loads)}, {"z", z}}, m.def.model_hash, inputs);
    log << "solved " << sys.equation_count() << " equations, " << lc.loads.size() << " loads\n";
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
    std::string config, out;
    int workers = 1;
    double unit = 1.0;
    std::string direction = "-z";
    bool resume = false;
};

void cmd_sweep(const SweepArgs& a, std::ostream& log) {
    if (a.workers < 1) throw ConfigError("--workers must be >= 1");
    const Model m = load_model(a.config);
    const NodeSets sets = m.def.node_sets(m.plate.mesh);
    const LoadDirection dir = parse_direction(a.direction);
    OutputDir out(a.out);
    const fs::path file = out.path() / "compliance.txt";

    std::optional<ComplianceMatrix> matrix;
    if (a.resume && fs::exists(file)) {
        try {
            auto cached = load_matrix(file, m.def.model_hash, m.plate.mesh.node_count());
            if (cached.candidates == candidate_list(sets) && cached.unit == a.unit && cached.direction == dir)
                matrix = std::move(cached);
        } catch (const ConfigError& e) {
            log << "existing matrix not reusable: " << e.what() << '\n';
        }
    }
    const bool reused = matrix.has_value();
    if (!reused) {
        const SystemMatrix sys = assemble(m.plate);
        const auto eval = default_eval_nodes(sys);
        matrix = sweep(sys, sets, eval, SweepOptions{a.unit, dir, a.workers, m.def.model_hash});
    }
    std::ostringstream text;
    save_matrix(*matrix, text);
    out.write("compliance.txt", text.str());
    out.manifest("sweep", {{"config", a.config}, {"workers", a.workers}, {"unit", a.unit}, {"direction", a.direction}},
                 m.def.model_hash, json::array({input_entry(a.config)}),
                 {{"reused", reused}, {"solves", reused ? 0 : matrix->cols() - static_cast<int>(matrix->flagged.size())}});
    log << (reused ? "reused existing compliance matrix" : "computed compliance matrix") << ": " << matrix->rows()
        << " x " << matrix->cols() << '\n';
}

// ---- optimize --------------------------------------------------------------

struct OptimizeArgs {
    std::string config, out, target, matrix, reference;
    int workers = 1;
    std::string strategy = "exhaustive", solver = "exact", transform, direction = "-z";
    double lower = 0, upper = 5000;
    bool allow_outside = false;
};

void cmd_optimize(const OptimizeArgs& a, std::ostream& log) {
    if (a.workers < 1) throw ConfigError("--workers must be >= 1");
    const Bounds bounds{a.lower, a.upper};
    bounds.validate();
    SearchOptions so;
    so.strategy = parse_strategy(a.strategy);
    so.solver = parse_inner_solver(a.solver);
    so.workers = a.workers;
    FieldTransform tr;
    if (!a.transform.empty()) {
        const auto v = numbers(a.transform, 3, "--transform");
        tr = {v[0], v[1], v[2]};
    }
    const LoadDirection dir = parse_direction(a.direction);

    const Model m = load_model(a.config);
    const NodeSets sets = m.def.node_sets(m.plate.mesh);
    std::optional<SystemMatrix> sys;
    ComplianceMatrix zeta;
    if (!a.matrix.empty()) {
        zeta = load_matrix(a.matrix, m.def.model_hash, m.plate.mesh.node_count());
        if (zeta.candidates != candidate_list(sets)) throw ConfigError("compliance matrix candidates do not match the node sets");
        if (zeta.direction != dir) throw ConfigError("compliance matrix load direction does not match --direction");
    } else {
        sys = assemble(m.plate);
        zeta = sweep(*sys, sets, default_eval_nodes(*sys), SweepOptions{1.0, dir, a.workers, m.def.model_hash});
    }

    const ScalarField field = load_field(a.target);
    const Resampled rs = resample_to_mesh(field, m.plate.mesh, zeta.eval_nodes, tr, a.allow_outside);
    const ComplianceMatrix used = restrict_rows(zeta, rs.nodes);
    const Eigen::VectorXd target =
        Eigen::Map<const Eigen::VectorXd>(rs.values.data(), static_cast<Eigen::Index>(rs.values.size()));
    const OptimizationResult r = outer_search(used, target, bounds, so);

    json result = result_json(r, m.plate.mesh, bounds);
    result["model_hash"] = m.def.model_hash;
    result["direction"] = a.direction;
    result["target"] = {{"evaluation_nodes", rs.nodes.size()}, {"dropped_nodes", rs.dropped.size()}};

    json inputs = json::array({input_entry(a.config), input_entry(a.target)});
    if (!a.matrix.empty()) inputs.push_back(input_entry(a.matrix));
    if (!a.reference.empty()) {
        inputs.push_back(input_entry(a.reference));
        const json ref = read_json_file(a.reference);
        const double ro = ref.at("objective").get<double>();
        const double gap = (r.objective - ro) / std::max(std::abs(ro), std::numeric_limits<double>::min());
        result["reference_objective"] = ro;
        result["optimality_gap"] = gap;
        log << "optimality gap vs reference: " << format_double(gap) << '\n';
    }

    bool has_allowable = false;
    for (const auto& [name, mat] : m.def.materials) has_allowable = has_allowable || mat.allowable_stress.has_value();
    if (has_allowable && !r.degenerate) {
        if (!sys) sys = assemble(m.plate);
        const ScaledResult s = scale_to_allowable(r, m.plate, solve(*sys, load_case(r, dir)));
        result["scaled"] = {{"lambda", s.lambda},       {"F", s.F},         {"max_stress", s.max_stress},
                            {"allowable", s.allowable}, {"element", s.element}, {"layer", s.layer}};
    }

    std::ostringstream table;
    table << "set,node,x,y,F\n";
    static constexpr const char* names[] = {"J", "K", "L"};
    for (int k = 0; k < 3; ++k) {
        const auto p = m.plate.mesh.node_xy(r.nodes[k]);
        table << names[k] << ',' << r.nodes[k] << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
              << format_double(r.F[k]) << '\n';
    }
    table << "# sse " << format_double(r.sse) << "\n# objective " << format_double(r.objective) << '\n';

    OutputDir out(a.out);
    out.write("result.json", result.dump(2) + "\n");
    out.write("result.csv", table.str());
    out.manifest("optimize",
                 {{"config", a.config}, {"target", a.target}, {"matrix", a.matrix}, {"reference", a.reference},
                  {"strategy", a.strategy}, {"solver", a.solver}, {"workers", a.workers}, {"lower", a.lower},
                  {"upper", a.upper}, {"transform", a.transform}, {"allow_outside", a.allow_outside},
                  {"direction", a.direction}},
                 m.def.model_hash, inputs);
    log << "best triple (" << r.nodes[0] << ", " << r.nodes[1] << ", " << r.nodes[2] << ") F = ("
        << format_double(r.F[0]) << ", " << format_double(r.F[1]) << ", " << format_double(r.F[2])
        << ") objective " << format_double(r.objective) << '\n';
}

// ---- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
    std::string config, out, seeds, kind = "zero-strain-with-minor-fallback", branch = "A", target, p0;
    std::vector<std::string> probes;
    LoadOptions loads;
    std::optional<double> z;
    double step = 0;
    int max_steps = 100000;
    bool reverse = false;
};

Branch parse_branch(const std::string& s) {
    if (s == "A") return Branch::A;
    if (s == "B") return Branch::B;
    throw ConfigError("branch must be A or B, got '" + s + "'");
}

struct Seed {
    double x = 0, y = 0;
    std::optional<Branch> branch;
};

std::vector<Seed> read_seeds(const std::string& path) {
    std::istringstream is(read_file(path));
    std::vector<Seed> seeds;
    std::string line;
    int number = 0;
    while (std::getline(is, line)) {
        ++number;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto cells = split(line);
        if (cells.size() < 2 || cells.size() > 3)
            throw ConfigError("seeds file line " + std::to_string(number) + ": expected x,y[,branch]");
        Seed s{parse_double(cells[0]), parse_double(cells[1]), {}};
        if (cells.size() == 3) s.branch = parse_branch(cells[2]);
        seeds.push_back(s);
    }
    return seeds;
}

json islands_json(const DirectionField& f) {
    json out = json::array();
    const int nx = f.grid.nodes_x, ny = f.grid.nodes_y;
    for (const auto& island : fallback_islands(f)) {
        double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
        bool adjacent = false;
        for (int n : island) {
            const int i = n % nx, j = n / nx;
            const double x = i * f.grid.spacing, y = j * f.grid.spacing;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
            const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
            for (int d = 0; d < 4; ++d) {
                const int a = i + di[d], b = j + dj[d];
                if (a >= 0 && a < nx && b >= 0 && b < ny && f.entries[static_cast<std::size_t>(b * nx + a)].masked)
                    adjacent = true;
            }
        }
        out.push_back({{"nodes", island.size()}, {"bbox", {x0, y0, x1, y1}}, {"adjacent_to_excluded", adjacent}});
    }
    return out;
}

void cmd_analyze(const AnalyzeArgs& a, std::ostream& log) {
    const Model m = load_model(a.config);
    const FieldKind kind = parse_field_kind(a.kind);
    const Branch branch = parse_branch(a.branch);
    const LoadCase lc = build_loads(m.plate.mesh, a.loads);
    const std::vector<Seed> seeds = a.seeds.empty() ? std::vector<Seed>{} : read_seeds(a.seeds);
    if (!a.p0.empty() && a.target.empty()) throw ConfigError("--p0 requires --target");
    std::vector<Probe> probes;
    for (const auto& p : a.probes) probes.push_back(parse_probe(p));

    const SystemMatrix sys = assemble(m.plate);
    const DisplacementField disp = solve(sys, lc);
    const double z = a.z.value_or(default_surface_z(m.plate));
    const StrainField strains = surface_strain(disp, m.plate, z);
    const DirectionField field = direction_field(strains, kind, branch, m.def.excluded_regions);

    OutputDir out(a.out);
    json inputs = json::array({input_entry(a.config)});
    if (!a.loads.result.empty()) inputs.push_back(input_entry(a.loads.result));
    if (!a.seeds.empty()) inputs.push_back(input_entry(a.seeds));

    std::ostringstream fcsv;
    write_direction_field_csv(field, fcsv);
    out.write("direction_field.csv", fcsv.str());
    out.write("strain.csv", strain_csv(m.plate.mesh, strains));

    json report{{"kind", to_string(kind)}, {"branch", a.branch}, {"z", z}, {"islands", islands_json(field)}};
    json seed_entries = json::array();
    TraceParams tp;
    tp.step = a.step;
    tp.max_steps = a.max_steps;
    tp.reverse = a.reverse;
    int failures = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const Seed& seed = seeds[s];
        json e{{"index", s + 1}, {"x", seed.x}, {"y", seed.y}};
        try {
            const Branch b = seed.branch.value_or(branch);
            const Trajectory t = trace(field, seed.x, seed.y, b, tp);
            std::ostringstream tcsv;
            write_trajectory_csv(t, tcsv);
            const std::string name = "trajectory_" + std::to_string(s + 1) + ".csv";
            out.write(name, tcsv.str());
            e["status"] = "ok";
            e["file"] = name;
            e["vertices"] = t.vertices.size();
            e["termination"] = to_string(t.reason);
        } catch (const ConfigError& ex) {
            ++failures;
            e["status"] = "error";
            e["message"] = ex.what();
        }
        seed_entries.push_back(e);
    }
    report["seeds"] = seed_entries;

    if (!a.target.empty()) {
        inputs.push_back(input_entry(a.target));
        const ScalarField target = load_field(a.target);
        std::optional<Point2> p0;
        if (!a.p0.empty()) p0 = parse_point(a.p0, "--p0");
        const ComparisonReport cr = compare(target, w_field(m.plate.mesh, disp), p0, probes);
        out.write("comparison.json", report_json(cr).dump(2) + "\n");
        report["comparison"] = "comparison.json";
    }
    out.write("analyze.json", report.dump(2) + "\n");
    out.manifest("analyze",
                 {{"config", a.config}, {"loads", loads_json(a.loads)}, {"seeds", a.seeds}, {"kind", a.kind},
                  {"branch", a.branch}, {"z", z}, {"step", a.step}, {"max_steps", a.max_steps},
                  {"reverse", a.reverse}, {"target", a.target}, {"p0", a.p0}, {"probes", a.probes}},
                 m.def.model_hash, inputs);
    log << "traced " << seeds.size() - failures << " of " << seeds.size() << " seeds, "
        << report["islands"].size() << " fallback islands\n";
}

// ---- compare ---------------------------------------------------------------

struct CompareArgs {
    std::string out, target, field, p0;
    std::vector<std::string> probes;
};

void cmd_compare(const CompareArgs& a, std::ostream& log) {
    const ScalarField target = load_field(a.target);
    const ScalarField field = load_field(a.field);
    std::optional<Point2> p0;
    if (!a.p0.empty()) p0 = parse_point(a.p0, "--p0");
    std::vector<Probe> probes;
    for (const auto& p : a.probes) probes.push_back(parse_probe(p));
    const ComparisonReport r = compare(target, field, p0, probes);
    OutputDir out(a.out);
    out.write("comparison.json", report_json(r).dump(2) + "\n");
    out.manifest("compare", {{"target", a.target}, {"field", a.field}, {"p0", a.p0}, {"probes", a.probes}}, "-",
                 json::array({input_entry(a.target), input_entry(a.field)}));
    log << "k = " << format_double(r.k) << ", fitted rms " << format_double(r.fitted.rms) << '\n';
}

// ---- generate-target -------------------------------------------------------

struct GenerateArgs {
    std::string config, out, recipe;
    std::optional<std::uint64_t> seed;
};

void cmd_generate(const GenerateArgs& a, std::ostream& log) {
    const json rj = read_json_file(a.recipe);
    TargetRecipe recipe = parse_recipe(rj, fs::path(a.recipe).parent_path());
    if (a.seed) recipe.noise.seed = *a.seed;
    json inputs = json::array({input_entry(a.recipe)});
    std::optional<Model> m;
    if (!a.config.empty()) {
        m = load_model(a.config);
        inputs.push_back(input_entry(a.config));
    }
    if (recipe.variant == TargetVariant::ForwardSolve && !m)
        throw ConfigError("forward-solve targets need --config");
    if (recipe.variant == TargetVariant::File) inputs.push_back(input_entry(recipe.path.string()));
    const GeneratedTarget g = generate(recipe, m ? &m->plate : nullptr);
    OutputDir out(a.out);
    out.write("target.csv", field_text(g.field));
    out.write("target_record.json", g.record.dump(2) + "\n");
    out.manifest("generate-target", {{"config", a.config}, {"recipe", a.recipe}, {"seed", recipe.noise.seed}},
                 m ? m->def.model_hash : "-", inputs);
    log << "generated " << g.field.nx << " x " << g.field.ny << " target field\n";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concentrated-load optimisation and strain-direction analysis for layered plates", "plateopt"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SolveArgs solve_a;
    auto* solve_cmd = app.add_subcommand("solve", "Solve the plate under concentrated loads");
    solve_cmd->add_option("--config", solve_a.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--out", solve_a.out, "Output directory")->required();
    add_load_options(solve_cmd, solve_a.loads);
    solve_cmd->add_option("--z", solve_a.z, "Surface offset for strains [mm] (default: outer surface)");

    SweepArgs sweep_a;
    auto* sweep_cmd = app.add_subcommand("sweep", "Compute the compliance matrix of the candidate nodes");
    sweep_cmd->add_option("--config", sweep_a.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", sweep_a.out, "Output directory")->required();
    sweep_cmd->add_option("--workers", sweep_a.workers, "Worker threads")->capture_default_str();
    sweep_cmd->add_option("--unit", sweep_a.unit, "Unit load magnitude [N]")->capture_default_str();
    sweep_cmd->add_option("--direction", sweep_a.direction, "Load direction (-z or +z)")->capture_default_str();
    sweep_cmd->add_flag("--resume", sweep_a.resume, "Reuse a matching compliance.txt in the output directory");

    OptimizeArgs opt_a;
    auto* opt_cmd = app.add_subcommand("optimize", "Find the load triple that best reproduces a target field");
    opt_cmd->add_option("--config", opt_a.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    opt_cmd->add_option("--target", opt_a.target, "Target w field (gridded CSV)")->required()->check(CLI::ExistingFile);
    opt_cmd->add_option("--out", opt_a.out, "Output directory")->required();
    opt_cmd->add_option("--matrix", opt_a.matrix, "Precomputed compliance matrix")->check(CLI::ExistingFile);
    opt_cmd->add_option("--reference", opt_a.reference, "Earlier result.json to report the optimality gap against")
        ->check(CLI::ExistingFile);
    opt_cmd->add_option("--workers", opt_a.workers, "Worker threads")->capture_default_str();
    opt_cmd->add_option("--strategy", opt_a.strategy, "exhaustive or coordinate-descent")->capture_default_str();
    opt_cmd->add_option("--solver", opt_a.solver, "exact or simplex")->capture_default_str();
    opt_cmd->add_option("--lower", opt_a.lower, "Lower amplitude bound [N]")->capture_default_str();
    opt_cmd->add_option("--upper", opt_a.upper, "Upper amplitude bound [N]")->capture_default_str();
    opt_cmd->add_option("--transform", opt_a.transform, "Mesh-to-field transform tx,ty,scale");
    opt_cmd->add_flag("--allow-outside", opt_a.allow_outside, "Drop mesh nodes outside the target field");
    opt_cmd->add_option("--direction", opt_a.direction, "Load direction (-z or +z)")->capture_default_str();

    AnalyzeArgs an_a;
    auto* an_cmd = app.add_subcommand("analyze", "Strain directions, trajectories and target comparison");
    an_cmd->add_option("--config", an_a.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
    an_cmd->add_option("--out", an_a.out, "Output directory")->required();
    add_load_options(an_cmd, an_a.loads);
    an_cmd->add_option("--seeds", an_a.seeds, "Seed points file (x,y[,branch] per line)")->check(CLI::ExistingFile);
    an_cmd->add_option("--kind", an_a.kind, "Direction field kind")->capture_default_str();
    an_cmd->add_option("--branch", an_a.branch, "Zero-strain branch (A or B)")->capture_default_str();
    an_cmd->add_option("--z", an_a.z, "Surface offset for strains [mm] (default: outer surface)");
    an_cmd->add_option("--step", an_a.step, "Trace step [mm] (default: quarter element)");
    an_cmd->add_option("--max-steps", an_a.max_steps, "Trace step limit")->capture_default_str();
    an_cmd->add_flag("--reverse", an_a.reverse, "Start traces against the default heading");
    an_cmd->add_option("--target", an_a.target, "Target w field to compare against")->check(CLI::ExistingFile);
    an_cmd->add_option("--p0", an_a.p0, "Normalisation point x,y");
    an_cmd->add_option("--probe", an_a.probes, "Probe name,x,y (repeatable)");

    CompareArgs cmp_a;
    auto* cmp_cmd = app.add_subcommand("compare", "Compare two gridded w fields");
    cmp_cmd->add_option("--target", cmp_a.target, "Reference field")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--field", cmp_a.field, "Field to compare")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--out", cmp_a.out, "Output directory")->required();
    cmp_cmd->add_option("--p0", cmp_a.p0, "Normalisation point x,y");
    cmp_cmd->add_option("--probe", cmp_a.probes, "Probe name,x,y (repeatable)");

    GenerateArgs gen_a;
    auto* gen_cmd = app.add_subcommand("generate-target", "Generate a synthetic target field");
    gen_cmd->add_option("--recipe", gen_a.recipe, "Target recipe (JSON)")->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--config", gen_a.config, "Model config (forward-solve recipes)")->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen_a.out, "Output directory")->required();
    gen_cmd->add_option("--seed", gen_a.seed, "Noise seed (overrides the recipe)");

    std::vector<std::string> argv_store = args;
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*solve_cmd) cmd_solve(solve_a, out);
        else if (*sweep_cmd) cmd_sweep(sweep_a, out);
        else if (*opt_cmd) cmd_optimize(opt_a, out);
        else if (*an_cmd) cmd_analyze(an_a, out);
        else if (*cmp_cmd) cmd_compare(cmp_a, out);
        else if (*gen_cmd) cmd_generate(gen_a, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace plateopt::cli
