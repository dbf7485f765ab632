#include <doctest.h>

#include <chrono>
#include <random>

#include "plateopt/error.hpp"
#include "plateopt/load_optimizer.hpp"
#include "plateopt/model_config.hpp"
#include "test_support.hpp"

using namespace plateopt;

namespace {

// Brute-force oracle: full grid over the box with step 0.5, then repeated
// local refinement (window of +-2 steps, step / 10) down to step 5e-5.
struct GridOracle {
    double sse = 0;
    Eigen::Vector3d F;
};

GridOracle grid_oracle(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w, double upper) {
    const Eigen::Matrix3d G = Z.transpose() * Z;
    const Eigen::Vector3d g = Z.transpose() * w;
    const double c = w.squaredNorm();
    const auto sse = [&](const Eigen::Vector3d& F) { return F.dot(G * F) - 2 * g.dot(F) + c; };

    GridOracle best{std::numeric_limits<double>::infinity(), Eigen::Vector3d::Zero()};
    double step = 0.5;
    const int n = static_cast<int>(std::lround(upper / step));
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b)
            for (int d = 0; d <= n; ++d) {
                const Eigen::Vector3d F(a * step, b * step, d * step);
                const double s = sse(F);
                if (s < best.sse) best = {s, F};
            }
    while (step > 1e-4) {
        const Eigen::Vector3d center = best.F;
        const double fine = step / 10;
        for (int a = -20; a <= 20; ++a)
            for (int b = -20; b <= 20; ++b)
                for (int d = -20; d <= 20; ++d) {
                    Eigen::Vector3d F = center + fine * Eigen::Vector3d(a, b, d);
                    F = F.cwiseMax(0.0).cwiseMin(upper);
                    const double s = sse(F);
                    if (s < best.sse) best = {s, F};
                }
        step = fine;
    }
    best.sse = (Z * best.F - w).squaredNorm();
    return best;
}

struct Instance {
    Eigen::MatrixXd Z;
    Eigen::VectorXd w;
};

Instance random_instance(std::mt19937_64& rng, double upper) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-0.3 * upper, 1.3 * upper);
    Instance in{Eigen::MatrixXd(50, 3), Eigen::VectorXd(50)};
    for (Eigen::Index i = 0; i < in.Z.size(); ++i) in.Z.data()[i] = g(rng);
    const Eigen::Vector3d F(u(rng), u(rng), u(rng));
    in.w = in.Z * F;
    for (Eigen::Index i = 0; i < 50; ++i) in.w[i] += g(rng);
    return in;
}

double rel(double a, double b) { return testing::rel_diff(a, b); }

// KKT conditions of min ||Z F - w||^2 on the box.
void check_kkt(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w, const Amplitudes& F, const Bounds& b) {
    const Eigen::Vector3d Fv(F[0], F[1], F[2]);
    const Eigen::Vector3d grad = 2 * Z.transpose() * (Z * Fv - w);
    const double scale = 2 * (Z.transpose() * w).cwiseAbs().maxCoeff() + 1.0;
    for (int i = 0; i < 3; ++i) {
        if (F[i] <= b.lower) CHECK(grad[i] >= -1e-9 * scale);
        else if (F[i] >= b.upper) CHECK(grad[i] <= 1e-9 * scale);
        else CHECK(std::abs(grad[i]) <= 1e-9 * scale);
    }
}

} // namespace

TEST_CASE("bounds validation") {
    CHECK_NOTHROW(Bounds{}.validate());
    CHECK_THROWS_AS((Bounds{-1, 10}).validate(), ConfigError);
    CHECK_THROWS_AS((Bounds{5, 5}).validate(), ConfigError);
    CHECK_THROWS_AS((Bounds{0, std::numeric_limits<double>::infinity()}).validate(), ConfigError);
}

TEST_CASE("inner solve: exact representation with orthonormal columns") {
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(5, 3);
    Z(0, 0) = Z(1, 1) = Z(2, 2) = 1;
    const Eigen::VectorXd w = 2 * Z.col(0);
    const InnerResult r = inner_solve(Z, w, Bounds{});
    CHECK(r.F[0] == doctest::Approx(2).epsilon(1e-14));
    CHECK(r.F[1] == 0);
    CHECK(r.F[2] == 0);
    CHECK(r.sse == doctest::Approx(0).epsilon(1e-24));
    CHECK(r.unique);
}

TEST_CASE("inner solve: unreachable target leaves all amplitudes at zero") {
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(5, 3);
    Z(0, 0) = Z(1, 1) = Z(2, 2) = 1;
    const Eigen::VectorXd w = -Z.col(0);
    const InnerResult r = inner_solve(Z, w, Bounds{});
    CHECK(r.F == Amplitudes{0, 0, 0});
    CHECK(r.sse == w.squaredNorm());

    const InnerResult s = inner_solve_simplex(Z, w, Bounds{});
    for (double f : s.F) CHECK(std::abs(f) <= 1e-3);
    CHECK(s.converged);
}

TEST_CASE("inner solve: dependent columns are flagged and still optimal") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd Z(20, 3);
    for (int i = 0; i < 20; ++i) Z(i, 0) = g(rng), Z(i, 1) = g(rng);
    Z.col(2) = Z.col(0);
    const Eigen::VectorXd w = Z.col(0) * 3 + Z.col(1) * 2;
    const InnerResult r = inner_solve(Z, w, Bounds{});
    CHECK_FALSE(r.unique);
    CHECK(r.F[0] + r.F[2] == doctest::Approx(3));
    CHECK(r.F[1] == doctest::Approx(2));
    CHECK(r.sse <= 1e-20);
}

TEST_CASE("inner solve: bound-active solutions satisfy KKT") {
    std::mt19937_64 rng(11);
    const Bounds b{0, 10};
    for (int t = 0; t < 200; ++t) {
        const Instance in = random_instance(rng, 10);
        const InnerResult r = inner_solve(in.Z, in.w, b);
        for (double f : r.F) CHECK((f >= b.lower && f <= b.upper));
        check_kkt(in.Z, in.w, r.F, b);
    }
}

TEST_CASE("inner solve matches the brute-force grid oracle on 1000 instances") {
    std::mt19937_64 rng(20240611);
    const Bounds b{0, 10};
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const Instance in = random_instance(rng, b.upper);
        const InnerResult r = inner_solve(in.Z, in.w, b);
        const GridOracle o = grid_oracle(in.Z, in.w, b.upper);
        // The exact solver is never beaten by the grid and the grid gets within tolerance.
        CHECK(r.sse <= o.sse * (1 + 1e-12));
        worst = std::max(worst, (o.sse - r.sse) / r.sse);
    }
    MESSAGE("worst relative SSE gap to grid oracle " << worst);
    CHECK(worst <= 1e-6);
}

TEST_CASE("simplex agrees with the exact solver") {
    std::mt19937_64 rng(99);
    const Bounds b{0, 5000};
    double worst = 0;
    for (int t = 0; t < 300; ++t) {
        const Instance in = random_instance(rng, b.upper);
        const InnerResult e = inner_solve(in.Z, in.w, b);
        const InnerResult s = inner_solve_simplex(in.Z, in.w, b);
        const double oe = (e.F[0] + e.F[1] + e.F[2]) * e.sse;
        const double os = (s.F[0] + s.F[1] + s.F[2]) * s.sse;
        worst = std::max(worst, rel(oe, os));
        CHECK(s.converged);
        const bool interior = std::all_of(e.F.begin(), e.F.end(), [&](double f) { return f > 1 && f < b.upper - 1; });
        if (interior)
            for (int i = 0; i < 3; ++i) CHECK(std::abs(e.F[i] - s.F[i]) <= 1e-3);
    }
    MESSAGE("worst simplex objective disagreement " << worst);
    CHECK(worst <= 1e-6);
}

TEST_CASE("simplex converges to the same objective from different starts") {
    std::mt19937_64 rng(5);
    const Bounds b{0, 5000};
    for (int t = 0; t < 50; ++t) {
        const Instance in = random_instance(rng, b.upper);
        SimplexOptions o1, o2;
        o1.start = Amplitudes{100, 4000, 2500};
        o2.start = Amplitudes{4900, 10, 300};
        const InnerResult a = inner_solve_simplex(in.Z, in.w, b, o1);
        const InnerResult c = inner_solve_simplex(in.Z, in.w, b, o2);
        CHECK(rel(a.sse, c.sse) <= 1e-8);
    }
}

TEST_CASE("simplex reports an exhausted evaluation budget") {
    std::mt19937_64 rng(1);
    const Instance in = random_instance(rng, 5000);
    SimplexOptions o;
    o.max_evaluations = 20;
    CHECK_FALSE(inner_solve_simplex(in.Z, in.w, Bounds{}, o).converged);
}

TEST_CASE("inner optimum is stable under 1 N perturbations") {
    std::mt19937_64 rng(17);
    const Bounds b{0, 5000};
    for (int t = 0; t < 100; ++t) {
        const Instance in = random_instance(rng, b.upper);
        const InnerResult r = inner_solve(in.Z, in.w, b);
        for (int i = 0; i < 3; ++i) {
            if (r.F[i] <= b.lower + 1 || r.F[i] >= b.upper - 1) continue;
            for (double d : {-1.0, 1.0}) {
                Eigen::Vector3d F(r.F[0], r.F[1], r.F[2]);
                F[i] += d;
                CHECK((in.Z * F - in.w).squaredNorm() >= r.sse);
            }
        }
    }
}

TEST_CASE("target scaling scales interior amplitudes") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g;
    Eigen::MatrixXd Z(30, 3);
    for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = g(rng);
    const Eigen::VectorXd w = Z * Eigen::Vector3d(100, 200, 300) + Eigen::VectorXd::NullaryExpr(30, [&] { return g(rng); });
    const InnerResult a = inner_solve(Z, w, Bounds{});
    const InnerResult b = inner_solve(Z, 3.0 * w, Bounds{});
    for (int i = 0; i < 3; ++i) CHECK(b.F[i] == doctest::Approx(3.0 * a.F[i]).epsilon(1e-12));
}

namespace {

ComplianceMatrix toy_matrix(std::mt19937_64& rng, int per_set, int rows) {
    std::uniform_real_distribution<double> u(-1.0, 0.0);
    ComplianceMatrix m;
    m.zeta.resize(rows, 3 * per_set);
    for (Eigen::Index i = 0; i < m.zeta.size(); ++i) m.zeta.data()[i] = u(rng);
    for (int s = 0; s < 3; ++s)
        for (int c = 0; c < per_set; ++c) m.candidates.push_back({100 * s + c, static_cast<SetId>(s)});
    for (int i = 0; i < rows; ++i) m.eval_nodes.push_back(i);
    m.node_count = 400;
    return m;
}

} // namespace

TEST_CASE("exhaustive search equals brute force over all 27 triples") {
    std::mt19937_64 rng(77);
    const Bounds b{0, 10};
    for (int t = 0; t < 5; ++t) {
        const ComplianceMatrix m = toy_matrix(rng, 3, 40);
        std::uniform_real_distribution<double> u(0.0, 12.0);
        std::normal_distribution<double> noise(0.0, 0.05);
        Eigen::VectorXd w = m.zeta.col(0) * u(rng) + m.zeta.col(4) * u(rng) + m.zeta.col(8) * u(rng);
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += noise(rng);

        const OptimizationResult r = outer_search(m, w, b);
        double best = std::numeric_limits<double>::infinity();
        std::array<int, 3> arg{};
        for (int j = 0; j < 3; ++j)
            for (int k = 3; k < 6; ++k)
                for (int l = 6; l < 9; ++l) {
                    Eigen::MatrixXd Z(40, 3);
                    Z << m.zeta.col(j), m.zeta.col(k), m.zeta.col(l);
                    const GridOracle o = grid_oracle(Z, w, b.upper);
                    const double obj = o.F.sum() * o.sse;
                    if (obj < best) best = obj, arg = {j, k, l};
                }
        CHECK(r.columns == arg);
        CHECK(rel(r.objective, best) <= 1e-6);
        CHECK(r.evaluated == 27);
    }
}

TEST_CASE("outer search: objective is stored as sum(F) * SSE") {
    std::mt19937_64 rng(8);
    const ComplianceMatrix m = toy_matrix(rng, 4, 30);
    const Eigen::VectorXd w = m.zeta.col(1) * 1000 + m.zeta.col(6) * 2000;
    const OptimizationResult r = outer_search(m, w, Bounds{});
    CHECK(r.objective == (r.F[0] + r.F[1] + r.F[2]) * r.sse);
    for (int a = 0; a < 3; ++a) CHECK(m.candidates[r.columns[a]].set == static_cast<SetId>(a));
}

TEST_CASE("outer search: zero target is flagged degenerate") {
    std::mt19937_64 rng(9);
    const ComplianceMatrix m = toy_matrix(rng, 3, 20);
    const OptimizationResult r = outer_search(m, Eigen::VectorXd::Zero(20), Bounds{});
    CHECK(r.degenerate);
    CHECK(r.F == Amplitudes{0, 0, 0});
    CHECK(r.sse == 0);
    CHECK(r.nodes == std::array<int, 3>{0, 100, 200});
}

TEST_CASE("outer search: unreachable target is flagged degenerate") {
    std::mt19937_64 rng(10);
    const ComplianceMatrix m = toy_matrix(rng, 3, 20);
    const Eigen::VectorXd w = -m.zeta.col(0);
    const OptimizationResult r = outer_search(m, w, Bounds{});
    CHECK(r.degenerate);
    CHECK(r.trivial == r.evaluated);
}

TEST_CASE("outer search: validation") {
    std::mt19937_64 rng(12);
    ComplianceMatrix m = toy_matrix(rng, 3, 20);
    CHECK_THROWS_AS(outer_search(m, Eigen::VectorXd::Ones(19), Bounds{}), ConfigError);
    m.candidates.resize(6);
    m.zeta.conservativeResize(20, 6);
    CHECK_THROWS_WITH_AS(outer_search(m, Eigen::VectorXd::Ones(20), Bounds{}), doctest::Contains("L"),
                         ConfigError);
}

TEST_CASE("outer search: worker count does not change the result") {
    std::mt19937_64 rng(13);
    const ComplianceMatrix m = toy_matrix(rng, 6, 30);
    const Eigen::VectorXd w = m.zeta.col(2) * 700 + m.zeta.col(9) * 1500 + m.zeta.col(15) * 10;
    SearchOptions o;
    const OptimizationResult a = outer_search(m, w, Bounds{}, o);
    for (int workers : {2, 5, 16}) {
        o.workers = workers;
        const OptimizationResult b = outer_search(m, w, Bounds{}, o);
        CHECK(b.columns == a.columns);
        CHECK(b.F == a.F);
        CHECK(b.objective == a.objective);
        REQUIRE(b.ranking.size() == a.ranking.size());
        for (std::size_t i = 0; i < a.ranking.size(); ++i) CHECK(b.ranking[i].columns == a.ranking[i].columns);
    }
}

TEST_CASE("coordinate descent reports its gap to the exhaustive optimum") {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 10; ++t) {
        const ComplianceMatrix m = toy_matrix(rng, 10, 40);
        std::uniform_int_distribution<int> pick(0, 9);
        const Eigen::VectorXd w = m.zeta.col(pick(rng)) * 900 + m.zeta.col(10 + pick(rng)) * 1300 +
                                  m.zeta.col(20 + pick(rng)) * 400;
        SearchOptions o;
        const OptimizationResult ex = outer_search(m, w, Bounds{}, o);
        o.strategy = Strategy::CoordinateDescent;
        const OptimizationResult cd = outer_search(m, w, Bounds{}, o);
        const double gap = optimality_gap(cd, ex);
        MESSAGE("coordinate descent gap " << gap << " after " << cd.evaluated << " of 1000 triples");
        CHECK(gap >= -1e-9);
        CHECK(cd.evaluated < 1000);
    }
}

TEST_CASE("outer search recovers planted loads on the demonstrator") {
    const ModelDefinition def = parse_model(read_json_file(PLATEOPT_SOURCE_DIR "/configs/demonstrator.json"));
    const PlateModel model = def.build_plate();
    const SystemMatrix sys = assemble(model);
    const NodeSets sets = def.node_sets(model.mesh);
    const auto eval = default_eval_nodes(sys);
    const ComplianceMatrix m = sweep(sys, sets, eval);

    const int j = *model.mesh.node_at(480, 120), k = *model.mesh.node_at(440, 360), l = *model.mesh.node_at(0, 120);
    LoadCase lc;
    lc.add(j, 1885);
    lc.add(k, 2705);
    lc.add(l, 0);
    const auto w = extract_w(solve(sys, lc), eval);
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));

    const auto t0 = std::chrono::steady_clock::now();
    const OptimizationResult r = outer_search(m, target, Bounds{});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("searched " << r.evaluated << " triples in " << secs << " s");
    CHECK(r.nodes[0] == j);
    CHECK(r.nodes[1] == k);
    CHECK(r.nodes[2] == l);
    CHECK(rel(r.F[0], 1885) <= 1e-3);
    CHECK(rel(r.F[1], 2705) <= 1e-3);
    CHECK(r.F[2] < Bounds{}.zero_threshold());
    CHECK_FALSE(r.degenerate);

    SUBCASE("stress-limited scaling is linear") {
        const DisplacementField disp = solve(sys, load_case(r));
        const ScaledResult s = scale_to_allowable(r, model, disp);
        CHECK(s.lambda > 0);
        CHECK(s.allowable == 130);
        // Stress recovery is linear in the displacement field.
        DisplacementField scaled_disp = disp;
        for (auto& v : scaled_disp.values)
            for (double& x : v) x *= s.lambda;
        OptimizationResult scaled = r;
        scaled.F = s.F;
        const ScaledResult exact = scale_to_allowable(scaled, model, scaled_disp);
        CHECK(exact.lambda == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(exact.max_stress == doctest::Approx(130).epsilon(1e-14));
        // Re-solving under lambda * F reproduces it up to solver round-off.
        const ScaledResult again = scale_to_allowable(scaled, model, solve(sys, load_case(scaled)));
        CHECK(again.lambda == doctest::Approx(1.0).epsilon(1e-10));
        OptimizationResult half = r;
        for (int a = 0; a < 3; ++a) half.F[a] = s.F[a] / 2;
        CHECK(scale_to_allowable(half, model, solve(sys, load_case(half))).lambda ==
              doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("scale_to_allowable without allowables is a config error") {
    using namespace plateopt::testing;
    BoundaryConditions bc;
    bc.constraints.push_back({"root", {0, 0, 0, 40}, kAllDofs});
    const PlateModel model = make_plate(80, 40, 20, isotropic_plate(70000, 0.3, 2), bc);
    const SystemMatrix sys = assemble(model);
    OptimizationResult r;
    r.nodes = {*model.mesh.node_at(80, 0), *model.mesh.node_at(80, 20), *model.mesh.node_at(80, 40)};
    r.F = {1, 1, 1};
    CHECK_THROWS_AS(scale_to_allowable(r, model, solve(sys, load_case(r))), ConfigError);
}
