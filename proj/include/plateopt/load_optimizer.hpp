#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plateopt/compliance.hpp"
#include "plateopt/fe_solver.hpp"

namespace plateopt {

struct Bounds {
    double lower = 0.0;
    double upper = 5000.0;

    // Throws ConfigError unless 0 <= lower < upper < inf.
    void validate() const;
    // Amplitudes below this are reported as zero.
    double zero_threshold() const { return 1e-6 * upper; }
};

using Amplitudes = std::array<double, 3>;

struct InnerResult {
    Amplitudes F{};
    double sse = 0;
    bool unique = true;     // false when the columns are linearly dependent
    bool converged = true;  // simplex mode only
    int evaluations = 0;
};

// Exact box-constrained least squares min ||Z F - w||^2 over three columns.
// Every face of the box (each amplitude free, at its lower or at its upper
// bound) is solved in closed form and the best feasible point kept.
InnerResult inner_solve(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& w,
                        const Bounds& bounds);

struct SimplexOptions {
    double tol_x = 1e-9;       // N, simplex diameter
    double tol_f = 1e-10;      // relative objective spread
    int max_evaluations = 20000;
    int max_restarts = 8;
    std::optional<Amplitudes> start; // default: box center
};

// Nelder-Mead on x = lb + (ub - lb) (sin z + 1) / 2, restarted from the best
// point until a restart no longer improves the objective.
InnerResult inner_solve_simplex(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                const Eigen::Ref<const Eigen::VectorXd>& w, const Bounds& bounds,
                                const SimplexOptions& opt = {});

// Same problem given through its Gram form G = Z'Z, g = Z'w, c = w'w.
struct Gram3 {
    Eigen::Matrix3d G;
    Eigen::Vector3d g;
    double c = 0;
    double sse(const Eigen::Vector3d& F) const { return F.dot(G * F) - 2.0 * g.dot(F) + c; }
};
InnerResult inner_solve(const Gram3& q, const Bounds& bounds);
InnerResult inner_solve_simplex(const Gram3& q, const Bounds& bounds, const SimplexOptions& opt = {});

enum class Strategy { Exhaustive, CoordinateDescent };
enum class InnerSolver { Exact, Simplex };
Strategy parse_strategy(const std::string& s);
InnerSolver parse_inner_solver(const std::string& s);
std::string to_string(Strategy s);
std::string to_string(InnerSolver s);

struct TripleScore {
    std::array<int, 3> columns{}; // into the compliance matrix
    Amplitudes F{};
    double sse = 0;
    double objective = 0;
};

struct OptimizationResult {
    std::array<int, 3> nodes{};   // j, k, l
    std::array<int, 3> columns{};
    Amplitudes F{};
    double sse = 0;
    double objective = 0; // (F_j + F_k + F_l) * sse
    bool unique = true;
    bool converged = true;
    // All triples gave F = 0 (e.g. a zero target); the result is the
    // lowest-id triple with zero amplitudes.
    bool degenerate = false;
    Strategy strategy = Strategy::Exhaustive;
    InnerSolver solver = InnerSolver::Exact;
    std::size_t evaluated = 0; // triples solved
    std::size_t trivial = 0;   // triples skipped because their optimum is F = 0
    std::vector<TripleScore> ranking; // best first
};

struct SearchOptions {
    Strategy strategy = Strategy::Exhaustive;
    InnerSolver solver = InnerSolver::Exact;
    int workers = 1;
    int keep = 10; // size of the ranking list
    int max_sweeps = 100; // coordinate descent
};

// Minimises sum(F) * SSE over j in J, k in K, l in L. Ties are resolved by
// lower SSE, then by the lowest (j, k, l) node tuple. SSE values below
// 1e-12 ||w||^2 are treated as exact fits.
OptimizationResult outer_search(const ComplianceMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& target,
                                const Bounds& bounds, const SearchOptions& opt = {});

// Relative objective gap of a result against a reference optimum.
double optimality_gap(const OptimizationResult& r, const OptimizationResult& reference);

struct ScaledResult {
    double lambda = 0;
    Amplitudes F{};          // lambda * result amplitudes
    double max_stress = 0;   // governing |principal stress| under the unscaled loads
    double allowable = 0;    // allowable of the governing layer
    int element = -1;
    int layer = -1;
};

LoadCase load_case(const OptimizationResult& r, LoadDirection dir = LoadDirection::MinusZ);

// Largest lambda such that every layer with an allowable stays within it under
// lambda * F. Stresses are evaluated at the element corners on the top and
// bottom face of each layer.
ScaledResult scale_to_allowable(const OptimizationResult& r, const PlateModel& model,
                                const DisplacementField& disp);

nlohmann::json result_json(const OptimizationResult& r, const Mesh& mesh, const Bounds& bounds);

} // namespace plateopt
