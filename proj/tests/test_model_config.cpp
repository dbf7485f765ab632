#include <doctest.h>

#include "plateopt/error.hpp"
#include "plateopt/model_config.hpp"

using namespace plateopt;
using nlohmann::json;

namespace {

json demonstrator() { return read_json_file(PLATEOPT_SOURCE_DIR "/configs/demonstrator.json"); }

} // namespace

TEST_CASE("demonstrator config builds a non-singular half model") {
    const ModelDefinition def = parse_model(demonstrator());
    const PlateModel model = def.build_plate();
    CHECK(model.mesh.node_count() == 26 * 25);
    CHECK(model.mesh.laminate_ids().size() == 2);
    const SystemMatrix sys = assemble(model);
    CHECK(sys.equation_count() > 0);

    const NodeSets sets = def.node_sets(model.mesh);
    const auto in = [&](const std::vector<int>& s, double x, double y) {
        const int n = *model.mesh.node_at(x, y);
        return std::binary_search(s.begin(), s.end(), n);
    };
    CHECK(in(sets.J(), 480, 120));
    CHECK(in(sets.K(), 440, 360));
    CHECK(in(sets.L(), 0, 120));
}

TEST_CASE("excluded regions default to grown stiffened footprints") {
    const ModelDefinition def = parse_model(demonstrator());
    REQUIRE(def.excluded_regions.size() == 2);
    CHECK(def.excluded_regions[0].x0 == -20);
    CHECK(def.excluded_regions[0].x1 == 60);
    CHECK(def.excluded_regions[1].y1 == 40);
}

TEST_CASE("model hash tracks stiffness inputs only") {
    json a = demonstrator();
    const std::string h0 = parse_model(a).model_hash;
    CHECK(h0.size() == 16);
    a["node_sets"]["J"] = json::array({400, 60, 500, 220});
    CHECK(parse_model(a).model_hash == h0);
    a["materials"]["aluminium"]["E"] = 71000;
    CHECK(parse_model(a).model_hash != h0);
}

TEST_CASE("schema violations are config errors") {
    json a = demonstrator();
    a.erase("schema_version");
    CHECK_THROWS_AS(parse_model(a), ConfigError);

    a = demonstrator();
    a["schema_version"] = 2;
    CHECK_THROWS_AS(parse_model(a), ConfigError);

    a = demonstrator();
    a["default_laminate"] = "missing";
    CHECK_THROWS_AS(parse_model(a), ConfigError);

    a = demonstrator();
    a["geometry"]["element_size"] = 30;
    CHECK_THROWS_AS(parse_model(a), ConfigError);

    a = demonstrator();
    a["regions"][0]["rect"] = json::array({0, 0, 40});
    CHECK_THROWS_WITH_AS(parse_model(a), doctest::Contains("regions[0].rect"), ConfigError);

    a = demonstrator();
    a["boundary_conditions"]["constraints"][0]["dofs"] = json::array({"q"});
    CHECK_THROWS_AS(parse_model(a), ConfigError);
}

TEST_CASE("unknown material in a laminate fails at build time") {
    json a = demonstrator();
    a["laminates"]["sandwich"][1]["material"] = "nothing";
    const ModelDefinition def = parse_model(a);
    CHECK_THROWS_AS(def.build_plate(), ConfigError);
}

TEST_CASE("bundled toy and composite configs build and solve") {
    const ModelDefinition toy = parse_model(read_json_file(PLATEOPT_SOURCE_DIR "/configs/toy.json"));
    const PlateModel tm = toy.build_plate();
    const NodeSets sets = toy.node_sets(tm.mesh);
    for (const auto& s : sets.sets) CHECK(s.size() == 3);
    CHECK(toy.excluded_regions.size() == 1);
    CHECK_NOTHROW(assemble(tm));

    const ModelDefinition comp =
        parse_model(read_json_file(PLATEOPT_SOURCE_DIR "/configs/demonstrator_composite.json"));
    const ModelDefinition alu = parse_model(demonstrator());
    CHECK(comp.model_hash != alu.model_hash);
    const PlateModel cm = comp.build_plate();
    CHECK(cm.mesh.node_count() == 26 * 25);
    CHECK_NOTHROW(assemble(cm));
    CHECK(comp.node_sets(cm.mesh).total() == alu.node_sets(alu.build_plate().mesh).total());
}
