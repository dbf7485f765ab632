#include <doctest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cli_driver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSource = PLATEOPT_SOURCE_DIR;
const std::string kToy = kSource + "/configs/toy.json";
const std::string kDemo = kSource + "/configs/demonstrator.json";

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "plateopt");
    std::ostringstream out, err;
    const int code = plateopt::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "plateopt_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> contents(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
    return files;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
}

json toy_with(const std::function<void(json&)>& edit) {
    json j = json::parse(slurp(kToy));
    edit(j);
    return j;
}

} // namespace

TEST_CASE("solve writes fields and a manifest, reruns are bit-identical") {
    const auto d = scratch("solve");
    const auto a = cli({"solve", "--config", kToy, "--load", "200,140,100", "--out", (d / "a").string()});
    REQUIRE_MESSAGE(a.code == 0, a.err);
    for (const char* f : {"displacement.csv", "w_field.csv", "strain.csv", "manifest.json"})
        CHECK(fs::exists(d / "a" / f));
    REQUIRE(cli({"solve", "--config", kToy, "--load", "200,140,100", "--out", (d / "b").string()}).code == 0);
    CHECK(contents(d / "a") == contents(d / "b"));

    const json m = json::parse(slurp(d / "a" / "manifest.json"));
    CHECK(m.at("command") == "solve");
    CHECK(m.at("outputs").size() == 3);
    CHECK(m.at("inputs")[0].at("path") == kToy);
    CHECK(m.at("config_hash").get<std::string>().size() == 16);
}

TEST_CASE("exit codes") {
    const auto d = scratch("codes");
    CHECK(cli({"compare", "--field", kToy, "--out", d.string()}).code == 2);  // missing --target
    CHECK(cli({}).code == 2);                                                  // no subcommand
    CHECK(cli({"solve", "--config", kToy, "--out", d.string()}).code == 2);    // no loads
    CHECK(cli({"solve", "--config", kToy, "--load", "1,2", "--out", d.string()}).code == 2);
    CHECK(cli({"solve", "--config", kToy, "--load", "201,140,100", "--out", d.string()}).code == 2);
    CHECK(cli({"solve", "--config", (d / "missing.json").string(), "--load", "200,140,1", "--out", d.string()}).code == 2);
    CHECK(cli({"--help"}).code == 0);

    write_text(d / "broken.json", "{ not json");
    CHECK(cli({"solve", "--config", (d / "broken.json").string(), "--load", "200,140,1", "--out", d.string()}).code == 2);

    // No supports at all: singular stiffness is a model failure.
    write_text(d / "free.json", toy_with([](json& j) {
                                    j["boundary_conditions"]["constraints"] = json::array();
                                    j["boundary_conditions"].erase("symmetry_edge");
                                    j["geometry"]["half_model"] = false;
                                }).dump());
    const auto r = cli({"solve", "--config", (d / "free.json").string(), "--load", "200,140,1", "--out", d.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("sweep: tiny config, worker independence and resume") {
    const auto d = scratch("sweep");
    REQUIRE(cli({"sweep", "--config", kToy, "--workers", "1", "--out", (d / "w1").string()}).code == 0);
    REQUIRE(cli({"sweep", "--config", kToy, "--workers", "8", "--out", (d / "w8").string()}).code == 0);
    const std::string m1 = slurp(d / "w1" / "compliance.txt");
    CHECK(m1 == slurp(d / "w8" / "compliance.txt"));
    CHECK(m1.find("candidates 9\n") != std::string::npos);
    CHECK(json::parse(slurp(d / "w1" / "manifest.json")).at("reused") == false);

    const auto r = cli({"sweep", "--config", kToy, "--resume", "--out", (d / "w1").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("reused") != std::string::npos);
    const json m = json::parse(slurp(d / "w1" / "manifest.json"));
    CHECK(m.at("reused") == true);
    CHECK(m.at("solves") == 0);
    CHECK(slurp(d / "w1" / "compliance.txt") == m1);

    // A stale matrix (different model) is recomputed.
    write_text(d / "stiffer.json", toy_with([](json& j) { j["materials"]["aluminium"]["E"] = 80000; }).dump());
    const auto s = cli({"sweep", "--config", (d / "stiffer.json").string(), "--resume", "--out", (d / "w1").string()});
    REQUIRE(s.code == 0);
    CHECK(json::parse(slurp(d / "w1" / "manifest.json")).at("reused") == false);
    CHECK(slurp(d / "w1" / "compliance.txt") != m1);
}

TEST_CASE("generate, optimize and analyze on the toy model") {
    const auto d = scratch("pipeline");
    write_text(d / "recipe.json",
               R"({"variant":"forward-solve","loads":[{"x":180,"y":60,"F":300},{"x":200,"y":140,"F":150},{"x":20,"y":100,"F":0}]})");
    REQUIRE(cli({"generate-target", "--recipe", (d / "recipe.json").string(), "--config", kToy, "--out",
                 (d / "target").string()})
                .code == 0);
    const std::string target = (d / "target" / "target.csv").string();
    REQUIRE(cli({"sweep", "--config", kToy, "--out", (d / "sweep").string()}).code == 0);
    const std::string matrix = (d / "sweep" / "compliance.txt").string();

    const auto ex = cli({"optimize", "--config", kToy, "--target", target, "--matrix", matrix, "--out",
                         (d / "ex").string()});
    REQUIRE_MESSAGE(ex.code == 0, ex.err);
    const json r = json::parse(slurp(d / "ex" / "result.json"));
    CHECK(r.at("loads")[0].at("x") == 180.0);
    CHECK(r.at("loads")[1].at("y") == 140.0);
    CHECK(r.at("loads")[0].at("F").get<double>() == doctest::Approx(300).epsilon(1e-6));
    CHECK(r.at("loads")[1].at("F").get<double>() == doctest::Approx(150).epsilon(1e-6));
    CHECK(r.at("loads")[2].at("zero") == true);
    CHECK(r.contains("scaled"));
    CHECK(r.at("strategy") == "exhaustive");

    // Without a cached matrix the optimizer sweeps internally: same result.
    REQUIRE(cli({"optimize", "--config", kToy, "--target", target, "--out", (d / "ex2").string()}).code == 0);
    CHECK(slurp(d / "ex2" / "result.json") == slurp(d / "ex" / "result.json"));

    const auto cd = cli({"optimize", "--config", kToy, "--target", target, "--matrix", matrix, "--strategy",
                         "coordinate-descent", "--solver", "simplex", "--reference", (d / "ex" / "result.json").string(),
                         "--out", (d / "cd").string()});
    REQUIRE_MESSAGE(cd.code == 0, cd.err);
    CHECK(cd.out.find("optimality gap") != std::string::npos);
    const json c = json::parse(slurp(d / "cd" / "result.json"));
    CHECK(c.contains("optimality_gap"));
    CHECK(c.at("strategy") == "coordinate-descent");
    CHECK(c.at("solver") == "simplex");

    CHECK(cli({"optimize", "--config", kToy, "--target", target, "--strategy", "random", "--out", (d / "x").string()})
              .code == 2);

    write_text(d / "seeds.csv", "# seeds\n100,60\n120,120,B\n10,10\n");
    const auto an = cli({"analyze", "--config", kToy, "--result", (d / "ex" / "result.json").string(), "--seeds",
                         (d / "seeds.csv").string(), "--target", target, "--p0", "200,160", "--probe", "P1,180,60",
                         "--out", (d / "an").string()});
    REQUIRE_MESSAGE(an.code == 0, an.err);
    CHECK(fs::exists(d / "an" / "trajectory_1.csv"));
    CHECK(fs::exists(d / "an" / "trajectory_2.csv"));
    CHECK_FALSE(fs::exists(d / "an" / "trajectory_3.csv"));
    const json a = json::parse(slurp(d / "an" / "analyze.json"));
    CHECK(a.at("seeds")[2].at("status") == "error");
    const json cmp = json::parse(slurp(d / "an" / "comparison.json"));
    CHECK(cmp.at("k").get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cmp.at("normalized").at("max_abs").get<double>() <= 1e-6);

    // Three good seeds give three trajectory files.
    write_text(d / "seeds3.csv", "100,60\n120,120\n160,140\n");
    REQUIRE(cli({"analyze", "--config", kToy, "--load", "180,60,300", "--seeds", (d / "seeds3.csv").string(), "--out",
                 (d / "an3").string()})
                .code == 0);
    for (int i = 1; i <= 3; ++i) CHECK(fs::exists(d / "an3" / ("trajectory_" + std::to_string(i) + ".csv")));
}

TEST_CASE("optimize rejects an empty node set") {
    const auto d = scratch("emptyset");
    write_text(d / "empty.json", toy_with([](json& j) { j["node_sets"]["L"] = {5, 5, 10, 10}; }).dump());
    write_text(d / "recipe.json", R"({"variant":"forward-solve","loads":[{"x":180,"y":60,"F":300}]})");
    REQUIRE(cli({"generate-target", "--recipe", (d / "recipe.json").string(), "--config", kToy, "--out",
                 (d / "t").string()})
                .code == 0);
    const auto r = cli({"optimize", "--config", (d / "empty.json").string(), "--target",
                        (d / "t" / "target.csv").string(), "--out", (d / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("node set L") != std::string::npos);
}

TEST_CASE("compare and generate-target are deterministic") {
    const auto d = scratch("compare");
    write_text(d / "recipe.json",
               R"({"variant":"analytic","benchmark":"navier-simply-supported-uniform","a":200,"b":160,"thickness":3,)"
               R"("E":70000,"nu":0.33,"pressure":0.001,"spacing":20,"terms":201,"noise":{"sigma":0.001,"seed":4}})");
    for (const char* run : {"g1", "g2"})
        REQUIRE(cli({"generate-target", "--recipe", (d / "recipe.json").string(), "--out", (d / run).string()}).code == 0);
    CHECK(contents(d / "g1") == contents(d / "g2"));
    REQUIRE(cli({"generate-target", "--recipe", (d / "recipe.json").string(), "--seed", "5", "--out",
                 (d / "g3").string()})
                .code == 0);
    CHECK(slurp(d / "g3" / "target.csv") != slurp(d / "g1" / "target.csv"));

    for (const char* run : {"c1", "c2"})
        REQUIRE(cli({"compare", "--target", (d / "g1" / "target.csv").string(), "--field",
                     (d / "g3" / "target.csv").string(), "--p0", "100,80", "--probe", "mid,100,80", "--out",
                     (d / run).string()})
                    .code == 0);
    CHECK(contents(d / "c1") == contents(d / "c2"));
    const json c = json::parse(slurp(d / "c1" / "comparison.json"));
    CHECK(c.at("k").get<double>() == doctest::Approx(1.0).epsilon(0.05));

    // Forward-solve recipes need a model.
    write_text(d / "fs.json", R"({"variant":"forward-solve","loads":[{"x":180,"y":60,"F":300}]})");
    CHECK(cli({"generate-target", "--recipe", (d / "fs.json").string(), "--out", (d / "g4").string()}).code == 2);
}
