#include "plateopt/load_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "plateopt/error.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

void Bounds::validate() const {
    if (!(lower >= 0.0) || !(upper > lower) || !std::isfinite(upper))
        throw ConfigError("load bounds must satisfy 0 <= lower < upper < inf");
}

namespace {

Gram3 gram_of(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& w) {
    if (Z.cols() != 3) throw ConfigError("inner solve needs exactly three columns");
    if (Z.rows() != w.size()) throw ConfigError("columns and target differ in length");
    if (Z.rows() < 3) throw ConfigError("inner solve needs at least three evaluation points");
    Gram3 q;
    q.G = Z.transpose() * Z;
    q.g = Z.transpose() * w;
    q.c = w.squaredNorm();
    return q;
}

bool full_rank(const Eigen::Matrix3d& G) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    return top > 0 && es.eigenvalues().minCoeff() > 1e-12 * top;
}

// Minimum-norm solution of the symmetric system A x = b (size 1..3).
template <int N>
Eigen::Matrix<double, N, 1> solve_sym(const Eigen::Matrix<double, N, N>& A, const Eigen::Matrix<double, N, 1>& b) {
    const double scale = A.diagonal().cwiseAbs().maxCoeff();
    if (scale == 0.0) return Eigen::Matrix<double, N, 1>::Zero();
    Eigen::LDLT<Eigen::Matrix<double, N, N>> ldlt(A);
    const auto d = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-13 * scale) return ldlt.solve(b);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(A);
    Eigen::Matrix<double, N, 1> inv = es.eigenvalues();
    const double top = inv.cwiseAbs().maxCoeff();
    for (int i = 0; i < N; ++i) inv[i] = std::abs(inv[i]) > 1e-13 * top ? 1.0 / inv[i] : 0.0;
    const Eigen::Matrix<double, N, 1> proj = es.eigenvectors().transpose() * b;
    return es.eigenvectors() * inv.cwiseProduct(proj).eval();
}

Eigen::Vector3d to_vec(const Amplitudes& a) { return {a[0], a[1], a[2]}; }
Amplitudes to_amp(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

double sum(const Amplitudes& F) { return F[0] + F[1] + F[2]; }

} // namespace

InnerResult inner_solve(const Gram3& q, const Bounds& bounds) {
    const double lb = bounds.lower, ub = bounds.upper;
    const double tol = 1e-9 * (ub - lb);

    InnerResult best;
    best.sse = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    // state: 0 free, 1 at lower, 2 at upper
    for (int code = 0; code < 27; ++code) {
        int state[3] = {code % 3, (code / 3) % 3, code / 9};
        Eigen::Vector3d F;
        int free_idx[3], nf = 0;
        for (int i = 0; i < 3; ++i) {
            if (state[i] == 0) free_idx[nf++] = i;
            else F[i] = state[i] == 1 ? lb : ub;
        }
        if (nf > 0) {
            // G_SS x = g_S - G_SF F_F
            Eigen::Vector3d rhs = q.g;
            for (int i = 0; i < 3; ++i)
                if (state[i] != 0)
                    for (int r = 0; r < 3; ++r) rhs[r] -= q.G(r, i) * F[i];
            bool feasible = true;
            auto take = [&](auto x) {
                for (int a = 0; a < nf; ++a) {
                    double v = x[a];
                    if (v < lb - tol || v > ub + tol) feasible = false;
                    F[free_idx[a]] = std::clamp(v, lb, ub);
                }
            };
            if (nf == 1) {
                const int i = free_idx[0];
                Eigen::Matrix<double, 1, 1> A{q.G(i, i)}, b{rhs[i]};
                take(solve_sym<1>(A, b));
            } else if (nf == 2) {
                const int i = free_idx[0], j = free_idx[1];
                Eigen::Matrix2d A;
                A << q.G(i, i), q.G(i, j), q.G(j, i), q.G(j, j);
                take(solve_sym<2>(A, Eigen::Vector2d(rhs[i], rhs[j])));
            } else {
                take(solve_sym<3>(q.G, rhs));
            }
            ++evaluations;
            if (!feasible) continue;
        }
        const double sse = std::max(0.0, q.sse(F));
        if (sse < best.sse) {
            best.sse = sse;
            best.F = to_amp(F);
        }
        // An interior unconstrained optimum is the global one.
        if (code == 0 && nf == 3) break;
    }
    best.unique = full_rank(q.G);
    best.evaluations = evaluations;
    return best;
}

InnerResult inner_solve(const Eigen::Ref<const Eigen::MatrixXd>& Z, const Eigen::Ref<const Eigen::VectorXd>& w,
                        const Bounds& bounds) {
    bounds.validate();
    const Gram3 q = gram_of(Z, w);
    InnerResult r = inner_solve(q, bounds);
    r.sse = (Z * to_vec(r.F) - w).squaredNorm();
    return r;
}

InnerResult inner_solve_simplex(const Gram3& q, const Bounds& bounds, const SimplexOptions& opt) {
    const double lb = bounds.lower, span = bounds.upper - bounds.lower;
    const auto to_x = [&](const Eigen::Vector3d& z) {
        Eigen::Vector3d x;
        for (int i = 0; i < 3; ++i) x[i] = std::clamp(lb + span * (std::sin(z[i]) + 1.0) / 2.0, lb, bounds.upper);
        return x;
    };
    const auto to_z = [&](const Amplitudes& F) {
        Eigen::Vector3d z;
        for (int i = 0; i < 3; ++i) z[i] = std::asin(std::clamp(2.0 * (F[i] - lb) / span - 1.0, -1.0, 1.0));
        return z;
    };
    // SSE = base + (F - F_ls)' G (F - F_ls); the simplex works on the excess,
    // evaluated in extended precision.
    using Real = long double;
    const Eigen::Vector3d f_ls = q.G.completeOrthogonalDecomposition().solve(q.g);
    const double base = std::max(0.0, q.sse(f_ls));
    const auto excess = [&](const Eigen::Vector3d& x) {
        Real d[3], e = 0;
        for (int a = 0; a < 3; ++a) d[a] = static_cast<Real>(x[a]) - f_ls[a];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) e += d[a] * q.G(a, b) * d[b];
        return std::max(Real(0), e);
    };
    int evaluations = 0;
    const auto f = [&](const Eigen::Vector3d& z) {
        ++evaluations;
        return excess(to_x(z));
    };
    const double floor = 1e-14 * std::max(q.c, 1e-300);
    const auto tolerance = [&](Real e) { return opt.tol_f * (base + e) + floor; };

    Amplitudes start = opt.start.value_or(Amplitudes{lb + span / 2, lb + span / 2, lb + span / 2});
    Eigen::Vector3d best_z = to_z(start);
    Real best_f = f(best_z);
    bool converged = false;

    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        std::array<Eigen::Vector3d, 4> v;
        std::array<Real, 4> fv;
        v[0] = best_z;
        fv[0] = best_f;
        for (int i = 0; i < 3; ++i) {
            v[i + 1] = best_z;
            v[i + 1][i] += 0.5;
            fv[i + 1] = f(v[i + 1]);
        }
        bool run_converged = false;
        while (evaluations < opt.max_evaluations) {
            std::array<int, 4> order{0, 1, 2, 3};
            std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
            std::array<Eigen::Vector3d, 4> sv;
            std::array<Real, 4> sf;
            for (int i = 0; i < 4; ++i) {
                sv[i] = v[order[i]];
                sf[i] = fv[order[i]];
            }
            v = sv;
            fv = sf;

            const Eigen::Vector3d x0 = to_x(v[0]);
            double diameter = 0;
            for (int i = 1; i < 4; ++i) diameter = std::max(diameter, (to_x(v[i]) - x0).cwiseAbs().maxCoeff());
            if (diameter <= opt.tol_x && fv[3] - fv[0] <= tolerance(fv[0])) {
                run_converged = true;
                break;
            }

            const Eigen::Vector3d centroid = (v[0] + v[1] + v[2]) / 3.0;
            const Eigen::Vector3d xr = centroid + (centroid - v[3]);
            const Real fr = f(xr);
            if (fr < fv[0]) {
                const Eigen::Vector3d xe = centroid + 2.0 * (centroid - v[3]);
                const Real fe = f(xe);
                if (fe < fr) { v[3] = xe; fv[3] = fe; }
                else { v[3] = xr; fv[3] = fr; }
            } else if (fr < fv[2]) {
                v[3] = xr;
                fv[3] = fr;
            } else {
                const bool outside = fr < fv[3];
                const Eigen::Vector3d xc = outside ? Eigen::Vector3d(centroid + 0.5 * (xr - centroid))
                                                   : Eigen::Vector3d(centroid + 0.5 * (v[3] - centroid));
                const Real fc = f(xc);
                if (fc < (outside ? fr : fv[3])) {
                    v[3] = xc;
                    fv[3] = fc;
                } else {
                    for (int i = 1; i < 4; ++i) {
                        v[i] = v[0] + 0.5 * (v[i] - v[0]);
                        fv[i] = f(v[i]);
                    }
                }
            }
        }
        int b = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
        const Real previous = best_f;
        const Eigen::Vector3d previous_x = to_x(best_z);
        if (fv[b] <= best_f) {
            best_f = fv[b];
            best_z = v[b];
        }
        if (!run_converged) break;
        const double moved = (to_x(best_z) - previous_x).cwiseAbs().maxCoeff();
        if (restart > 0 && previous - best_f <= tolerance(best_f) && moved <= opt.tol_x) {
            converged = true;
            break;
        }
    }

    // Amplitudes within tol_x of a bound are moved onto it when that does not
    // cost more than the objective tolerance.
    Eigen::Vector3d x = to_x(best_z);
    Eigen::Vector3d snapped = x;
    for (int i = 0; i < 3; ++i) {
        if (x[i] - lb <= opt.tol_x) snapped[i] = lb;
        else if (bounds.upper - x[i] <= opt.tol_x) snapped[i] = bounds.upper;
    }
    const Real snapped_f = excess(snapped);
    if (snapped_f <= best_f + tolerance(best_f)) {
        x = snapped;
        best_f = snapped_f;
    }

    InnerResult r;
    r.F = to_amp(x);
    r.sse = static_cast<double>(base + best_f);
    r.converged = converged;
    r.unique = full_rank(q.G);
    r.evaluations = evaluations;
    return r;
}

InnerResult inner_solve_simplex(const Eigen::Ref<const Eigen::MatrixXd>& Z,
                                const Eigen::Ref<const Eigen::VectorXd>& w, const Bounds& bounds,
                                const SimplexOptions& opt) {
    bounds.validate();
    const Gram3 q = gram_of(Z, w);
    InnerResult r = inner_solve_simplex(q, bounds, opt);
    r.sse = (Z * to_vec(r.F) - w).squaredNorm();
    return r;
}

Strategy parse_strategy(const std::string& s) {
    if (s == "exhaustive") return Strategy::Exhaustive;
    if (s == "coordinate-descent") return Strategy::CoordinateDescent;
    throw ConfigError("unknown strategy '" + s + "' (exhaustive, coordinate-descent)");
}

InnerSolver parse_inner_solver(const std::string& s) {
    if (s == "exact") return InnerSolver::Exact;
    if (s == "simplex") return InnerSolver::Simplex;
    throw ConfigError("unknown solver '" + s + "' (exact, simplex)");
}

std::string to_string(Strategy s) {
    return s == Strategy::Exhaustive ? "exhaustive" : "coordinate-descent";
}

std::string to_string(InnerSolver s) { return s == InnerSolver::Exact ? "exact" : "simplex"; }

namespace {

struct Scored {
    TripleScore score;
    std::array<int, 3> nodes{};
    bool trivial = false;
    bool unique = true;
    bool converged = true;
};

// Strict weak order: non-trivial first, then objective, SSE, node tuple.
bool better(const Scored& a, const Scored& b) {
    if (a.trivial != b.trivial) return !a.trivial;
    if (a.score.objective != b.score.objective) return a.score.objective < b.score.objective;
    if (a.score.sse != b.score.sse) return a.score.sse < b.score.sse;
    return a.nodes < b.nodes;
}

class Evaluator {
public:
    Evaluator(const ComplianceMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& w, const Bounds& bounds,
              InnerSolver solver)
        : m_(m), bounds_(bounds), solver_(solver) {
        G_ = m.zeta.transpose() * m.zeta;
        g_ = m.zeta.transpose() * w;
        c_ = w.squaredNorm();
        sse_floor_ = 1e-12 * c_;
    }

    Scored operator()(int cj, int ck, int cl) const {
        const int col[3] = {cj, ck, cl};
        Gram3 q;
        for (int a = 0; a < 3; ++a) {
            q.g[a] = g_[col[a]];
            for (int b = 0; b < 3; ++b) q.G(a, b) = G_(col[a], col[b]);
        }
        q.c = c_;
        const InnerResult r = solver_ == InnerSolver::Exact ? inner_solve(q, bounds_)
                                                            : inner_solve_simplex(q, bounds_);
        Scored s;
        s.score.columns = {cj, ck, cl};
        s.score.F = r.F;
        s.score.sse = r.sse <= sse_floor_ ? 0.0 : r.sse;
        s.score.objective = sum(r.F) * s.score.sse;
        s.nodes = {m_.candidates[cj].node, m_.candidates[ck].node, m_.candidates[cl].node};
        const double zero = bounds_.zero_threshold();
        s.trivial = c_ > 0 && r.F[0] < zero && r.F[1] < zero && r.F[2] < zero;
        s.unique = r.unique;
        s.converged = r.converged;
        return s;
    }

private:
    const ComplianceMatrix& m_;
    Bounds bounds_;
    InnerSolver solver_;
    Eigen::MatrixXd G_;
    Eigen::VectorXd g_;
    double c_ = 0, sse_floor_ = 0;
};

struct Best {
    std::vector<Scored> top; // sorted, at most keep entries
    std::size_t evaluated = 0, trivial = 0;

    void offer(const Scored& s, std::size_t keep) {
        ++evaluated;
        if (s.trivial) ++trivial;
        if (top.size() == keep && !better(s, top.back())) return;
        top.insert(std::upper_bound(top.begin(), top.end(), s, better), s);
        if (top.size() > keep) top.pop_back();
    }
};

} // namespace

OptimizationResult outer_search(const ComplianceMatrix& m, const Eigen::Ref<const Eigen::VectorXd>& target,
                                const Bounds& bounds, const SearchOptions& opt) {
    bounds.validate();
    if (target.size() != m.rows())
        throw ConfigError("target has " + std::to_string(target.size()) + " values, compliance matrix has " +
                          std::to_string(m.rows()) + " evaluation nodes");
    if (!target.allFinite()) throw ConfigError("target contains non-finite values");
    std::array<std::array<int, 2>, 3> range;
    for (int s = 0; s < 3; ++s) {
        range[s] = m.set_columns(static_cast<SetId>(s));
        if (range[s][0] == range[s][1])
            throw ConfigError(std::string("node set ") + set_name(static_cast<SetId>(s)) + " is empty");
    }
    const std::size_t keep = static_cast<std::size_t>(std::max(1, opt.keep));
    const Evaluator eval(m, target, bounds, opt.solver);
    const int nj = range[0][1] - range[0][0], nk = range[1][1] - range[1][0];

    Best best;
    if (opt.strategy == Strategy::Exhaustive) {
        const std::size_t pairs = static_cast<std::size_t>(nj) * static_cast<std::size_t>(nk);
        const int chunks = std::max(1, opt.workers);
        std::vector<Best> partial(static_cast<std::size_t>(chunks));
        parallel_chunks(static_cast<std::size_t>(chunks), chunks, [&](std::size_t cb, std::size_t ce) {
            for (std::size_t c = cb; c < ce; ++c) {
                Best& local = partial[c];
                const std::size_t begin = pairs * c / static_cast<std::size_t>(chunks);
                const std::size_t end = pairs * (c + 1) / static_cast<std::size_t>(chunks);
                for (std::size_t p = begin; p < end; ++p) {
                    const int cj = range[0][0] + static_cast<int>(p / static_cast<std::size_t>(nk));
                    const int ck = range[1][0] + static_cast<int>(p % static_cast<std::size_t>(nk));
                    for (int cl = range[2][0]; cl < range[2][1]; ++cl) local.offer(eval(cj, ck, cl), keep);
                }
            }
        });
        for (const auto& p : partial) {
            best.evaluated += p.evaluated;
            best.trivial += p.trivial;
            for (const auto& s : p.top) {
                if (best.top.size() == keep && !better(s, best.top.back())) continue;
                best.top.insert(std::upper_bound(best.top.begin(), best.top.end(), s, better), s);
                if (best.top.size() > keep) best.top.pop_back();
            }
        }
    } else {
        std::array<int, 3> cur{range[0][0], range[1][0], range[2][0]};
        Scored current = eval(cur[0], cur[1], cur[2]);
        best.offer(current, keep);
        for (int sweep_no = 0; sweep_no < opt.max_sweeps; ++sweep_no) {
            bool changed = false;
            for (int s = 0; s < 3; ++s) {
                for (int c = range[s][0]; c < range[s][1]; ++c) {
                    if (c == cur[s]) continue;
                    std::array<int, 3> trial = cur;
                    trial[s] = c;
                    const Scored sc = eval(trial[0], trial[1], trial[2]);
                    best.offer(sc, keep);
                    if (better(sc, current)) {
                        current = sc;
                        cur = trial;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
    }

    const Scored& win = best.top.front();
    OptimizationResult r;
    r.columns = win.score.columns;
    r.nodes = win.nodes;
    r.F = win.score.F;
    r.unique = win.unique;
    r.converged = win.converged;
    r.degenerate = win.trivial || target.squaredNorm() == 0.0;
    r.strategy = opt.strategy;
    r.solver = opt.solver;
    r.evaluated = best.evaluated;
    r.trivial = best.trivial;
    if (r.degenerate && target.squaredNorm() == 0.0) r.F = {0.0, 0.0, 0.0};

    Eigen::VectorXd residual = -target;
    for (int a = 0; a < 3; ++a) residual += r.F[a] * m.zeta.col(r.columns[a]);
    r.sse = residual.squaredNorm();
    r.objective = sum(r.F) * r.sse;
    for (const auto& s : best.top) r.ranking.push_back(s.score);
    return r;
}

double optimality_gap(const OptimizationResult& r, const OptimizationResult& reference) {
    const double d = r.objective - reference.objective;
    const double scale = std::abs(reference.objective);
    return scale > 0 ? d / scale : d;
}

LoadCase load_case(const OptimizationResult& r, LoadDirection dir) {
    LoadCase lc;
    lc.description = "optimized loads";
    for (int a = 0; a < 3; ++a)
        if (r.F[a] != 0.0) lc.add(r.nodes[a], r.F[a], dir);
    return lc;
}

ScaledResult scale_to_allowable(const OptimizationResult& r, const PlateModel& model,
                                const DisplacementField& disp) {
    ScaledResult out;
    double worst = 0.0;
    bool any_allowable = false;
    for (int e = 0; e < model.mesh.element_count(); ++e) {
        const ShellStiffness& s = model.element_stiffness(e);
        const auto corners = element_section_strains(disp, model.mesh, e);
        for (std::size_t k = 0; k < s.layers.size(); ++k) {
            const LayerStiffness& layer = s.layers[k];
            if (!layer.allowable_stress) continue;
            any_allowable = true;
            for (double z : {layer.z_bottom, layer.z_top}) {
                for (const auto& c : corners) {
                    const Eigen::Vector3d eps = c.membrane + z * c.curvature;
                    const Eigen::Vector3d sig = layer.q_bar * eps;
                    const double mean = 0.5 * (sig[0] + sig[1]);
                    const double rad = std::hypot(0.5 * (sig[0] - sig[1]), sig[2]);
                    const double peak = std::abs(mean) + rad;
                    const double ratio = peak / *layer.allowable_stress;
                    if (ratio > worst) {
                        worst = ratio;
                        out.max_stress = peak;
                        out.allowable = *layer.allowable_stress;
                        out.element = e;
                        out.layer = static_cast<int>(k);
                    }
                }
            }
        }
    }
    if (!any_allowable) throw ConfigError("no allowable stress is configured for any layer in use");
    if (worst == 0.0) throw ModelError("load case produces no stress; scale factor is unbounded");
    out.lambda = 1.0 / worst;
    for (int a = 0; a < 3; ++a) out.F[a] = out.lambda * r.F[a];
    return out;
}

nlohmann::json result_json(const OptimizationResult& r, const Mesh& mesh, const Bounds& bounds) {
    using nlohmann::json;
    json loads = json::array();
    const char names[3] = {'J', 'K', 'L'};
    for (int a = 0; a < 3; ++a) {
        const Point2 p = mesh.node_xy(r.nodes[a]);
        loads.push_back({{"set", std::string(1, names[a])},
                         {"node", r.nodes[a]},
                         {"x", p.x},
                         {"y", p.y},
                         {"F", r.F[a]},
                         {"zero", r.F[a] < bounds.zero_threshold()}});
    }
    json ranking = json::array();
    for (const auto& s : r.ranking)
        ranking.push_back({{"columns", s.columns}, {"F", s.F}, {"sse", s.sse}, {"objective", s.objective}});
    return {{"loads", loads},
            {"sse", r.sse},
            {"objective", r.objective},
            {"sum_F", r.F[0] + r.F[1] + r.F[2]},
            {"unique", r.unique},
            {"converged", r.converged},
            {"degenerate", r.degenerate},
            {"strategy", to_string(r.strategy)},
            {"solver", to_string(r.solver)},
            {"bounds", {{"lower", bounds.lower}, {"upper", bounds.upper}}},
            {"triples_evaluated", r.evaluated},
            {"triples_trivial", r.trivial},
            {"ranking", ranking}};
}

} // namespace plateopt
