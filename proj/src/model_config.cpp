#include "plateopt/model_config.hpp"

#include <fstream>

#include "plateopt/error.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(where + ": missing required key '" + key + "'");
    return j.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

double number_at(const json& j, const char* key, const std::string& where) {
    return number(require(j, key, where), where + "." + key);
}

MaterialSpec parse_material(const std::string& id, const json& j) {
    const std::string where = "materials." + id;
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::optional<double> allowable;
    if (j.contains("allowable_stress")) allowable = number(j.at("allowable_stress"), where + ".allowable_stress");

    MaterialSpec m;
    if (j.contains("E")) {
        m = MaterialSpec::isotropic(id, number_at(j, "E", where), number_at(j, "nu", where), allowable);
    } else {
        m.id = id;
        m.E1 = number_at(j, "E1", where);
        m.E2 = number_at(j, "E2", where);
        m.E3 = number_at(j, "E3", where);
        m.nu12 = number_at(j, "nu12", where);
        m.nu13 = number_at(j, "nu13", where);
        m.nu23 = number_at(j, "nu23", where);
        m.G12 = number_at(j, "G12", where);
        m.G13 = number_at(j, "G13", where);
        m.G23 = number_at(j, "G23", where);
        m.allowable_stress = allowable;
    }
    m.validate();
    return m;
}

LaminateSpec parse_laminate(const std::string& id, const json& j) {
    const std::string where = "laminates." + id;
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty layer list");
    LaminateSpec lam{id, {}};
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string lw = where + "[" + std::to_string(k) + "]";
        const json& l = j[k];
        const json& mat = require(l, "material", lw);
        if (!mat.is_string()) throw ConfigError(lw + ".material: expected a string");
        lam.layers.push_back({mat.get<std::string>(), number_at(l, "thickness", lw),
                              l.contains("angle") ? number(l.at("angle"), lw + ".angle") : 0.0});
    }
    return lam;
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected a list of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(where + ": expected a list of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

} // namespace

Rect parse_rect(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError(where + ": expected [x0, y0, x1, y1]");
    Rect r{number(j[0], where), number(j[1], where), number(j[2], where), number(j[3], where)};
    if (r.x1 < r.x0 || r.y1 < r.y0) throw ConfigError(where + ": rectangle corners inverted");
    return r;
}

json rect_json(const Rect& r) { return json::array({r.x0, r.y0, r.x1, r.y1}); }

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

ModelDefinition parse_model(const json& config) {
    if (!config.is_object()) throw ConfigError("config: expected a JSON object");
    const json& version = require(config, "schema_version", "config");
    if (!version.is_number_integer() || version.get<int>() != kConfigSchemaVersion)
        throw ConfigError("config: unsupported schema_version (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");

    ModelDefinition def;
    const json& geo = require(config, "geometry", "config");
    def.width = number_at(geo, "width", "geometry");
    def.height = number_at(geo, "height", "geometry");
    def.element_size = number_at(geo, "element_size", "geometry");
    def.half_model = geo.value("half_model", false);

    const json& mats = require(config, "materials", "config");
    if (!mats.is_object() || mats.empty()) throw ConfigError("materials: expected a non-empty object");
    for (const auto& [id, m] : mats.items()) def.materials[id] = parse_material(id, m);

    const json& lams = require(config, "laminates", "config");
    if (!lams.is_object() || lams.empty()) throw ConfigError("laminates: expected a non-empty object");
    for (const auto& [id, l] : lams.items()) def.laminates[id] = parse_laminate(id, l);

    const json& dl = require(config, "default_laminate", "config");
    if (!dl.is_string()) throw ConfigError("default_laminate: expected a string");
    def.default_laminate = dl.get<std::string>();
    if (!def.laminates.count(def.default_laminate))
        throw ConfigError("default_laminate '" + def.default_laminate + "' is not defined");

    if (config.contains("regions")) {
        const json& regions = config.at("regions");
        if (!regions.is_array()) throw ConfigError("regions: expected a list");
        for (std::size_t k = 0; k < regions.size(); ++k) {
            const std::string where = "regions[" + std::to_string(k) + "]";
            const json& r = regions[k];
            Region reg;
            reg.name = r.value("name", "region" + std::to_string(k));
            const json& lam = require(r, "laminate", where);
            if (!lam.is_string()) throw ConfigError(where + ".laminate: expected a string");
            reg.laminate = lam.get<std::string>();
            if (!def.laminates.count(reg.laminate))
                throw ConfigError(where + ": laminate '" + reg.laminate + "' is not defined");
            reg.rect = parse_rect(require(r, "rect", where), where + ".rect");
            def.regions.push_back(reg);
        }
    }

    if (config.contains("boundary_conditions")) {
        const json& bc = config.at("boundary_conditions");
        if (bc.contains("symmetry_edge")) {
            if (!bc.at("symmetry_edge").is_string())
                throw ConfigError("boundary_conditions.symmetry_edge: expected a string");
            def.bc.symmetry = parse_symmetry_edge(bc.at("symmetry_edge").get<std::string>());
        }
        if (bc.contains("constraints")) {
            const json& cs = bc.at("constraints");
            if (!cs.is_array()) throw ConfigError("boundary_conditions.constraints: expected a list");
            for (std::size_t k = 0; k < cs.size(); ++k) {
                const std::string where = "boundary_conditions.constraints[" + std::to_string(k) + "]";
                Constraint c;
                c.name = cs[k].value("name", "constraint" + std::to_string(k));
                c.rect = parse_rect(require(cs[k], "rect", where), where + ".rect");
                c.dofs = parse_dofs(string_list(require(cs[k], "dofs", where), where + ".dofs"));
                def.bc.constraints.push_back(c);
            }
        }
    }

    if (config.contains("node_sets")) {
        const json& ns = config.at("node_sets");
        const char* names[3] = {"J", "K", "L"};
        for (int s = 0; s < 3; ++s)
            def.node_set_rects[s] = parse_rect(require(ns, names[s], "node_sets"),
                                               std::string("node_sets.") + names[s]);
        def.has_node_sets = true;
    }

    if (config.contains("shear_correction"))
        def.shear_correction = number(config.at("shear_correction"), "shear_correction");

    if (config.contains("excluded_regions")) {
        const json& ex = config.at("excluded_regions");
        if (!ex.is_array()) throw ConfigError("excluded_regions: expected a list of rectangles");
        for (std::size_t k = 0; k < ex.size(); ++k)
            def.excluded_regions.push_back(parse_rect(ex[k], "excluded_regions[" + std::to_string(k) + "]"));
    } else {
        for (const auto& r : def.regions)
            if (r.laminate != def.default_laminate)
                def.excluded_regions.push_back(r.rect.expanded(def.element_size));
    }

    // Everything that affects the stiffness system goes into the model digest.
    json canonical = {
        {"geometry", {{"width", def.width}, {"height", def.height},
                      {"element_size", def.element_size}, {"half_model", def.half_model}}},
        {"materials", config.at("materials")},
        {"laminates", config.at("laminates")},
        {"default_laminate", def.default_laminate},
        {"regions", config.value("regions", json::array())},
        {"boundary_conditions", config.value("boundary_conditions", json::object())},
        {"shear_correction", def.shear_correction},
    };
    def.model_hash = digest(canonical.dump());

    // Fail early on a geometry that cannot be meshed.
    (void)build_grid_mesh(def.width, def.height, def.element_size, def.half_model);
    return def;
}

PlateModel ModelDefinition::build_plate() const {
    PlateModel model;
    model.mesh = build_grid_mesh(width, height, element_size, half_model);
    assign_laminates(model.mesh, default_laminate, regions);
    for (const auto& id : model.mesh.laminate_ids())
        model.stiffness.push_back(laminate_stiffness(laminates.at(id), materials, shear_correction));
    model.bc = bc;
    return model;
}

NodeSets ModelDefinition::node_sets(const Mesh& mesh) const {
    if (!has_node_sets) throw ConfigError("config: node_sets are not defined");
    return define_node_sets(mesh, node_set_rects);
}

} // namespace plateopt
