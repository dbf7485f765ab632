#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateopt/fe_solver.hpp"
#include "plateopt/mesh_model.hpp"

namespace plateopt {

inline constexpr int kConfigSchemaVersion = 1;

// Plate model description read from the "model" part of a run config.
//
//   {
//     "schema_version": 1,
//     "geometry": {"width": 500, "height": 480, "element_size": 20, "half_model": true},
//     "materials": {"al": {"E": 70000, "nu": 0.33, "allowable_stress": 130},
//                   "core": {"E1": 1, "E2": 1, "E3": 630, "nu12": 0, ..., "G23": 140}},
//     "laminates": {"sandwich": [{"material": "al", "thickness": 1, "angle": 0}, ...]},
//     "default_laminate": "sandwich",
//     "regions": [{"name": "chb", "laminate": "stiffened", "rect": [0, 0, 40, 40]}],
//     "boundary_conditions": {"symmetry_edge": "x_min",
//                             "constraints": [{"name": "chb", "rect": [...], "dofs": ["all"]}]},
//     "node_sets": {"J": [x0, y0, x1, y1], "K": [...], "L": [...]},
//     "excluded_regions": [[x0, y0, x1, y1], ...]          (optional)
//   }
struct ModelDefinition {
    double width = 0, height = 0, element_size = 0;
    bool half_model = false;
    MaterialTable materials;
    std::map<std::string, LaminateSpec> laminates;
    std::string default_laminate;
    std::vector<Region> regions;
    BoundaryConditions bc;
    std::array<Rect, 3> node_set_rects{};
    bool has_node_sets = false;
    // Regions left out of strain-direction analysis. Defaults to the footprints
    // of all non-default laminate regions grown by one element.
    std::vector<Rect> excluded_regions;
    double shear_correction = 5.0 / 6.0;

    // Digest of everything that changes the stiffness system.
    std::string model_hash;

    PlateModel build_plate() const;
    NodeSets node_sets(const Mesh& mesh) const;
};

// Throws ConfigError with a path-like location on any schema violation.
ModelDefinition parse_model(const nlohmann::json& config);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Rect from [x0, y0, x1, y1].
Rect parse_rect(const nlohmann::json& j, const std::string& where);
nlohmann::json rect_json(const Rect& r);

} // namespace plateopt
