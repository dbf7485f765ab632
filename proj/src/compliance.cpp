#include "plateopt/compliance.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "plateopt/error.hpp"
#include "plateopt/util.hpp"

namespace plateopt {

std::array<int, 2> ComplianceMatrix::set_columns(SetId s) const {
    const auto first = std::find_if(candidates.begin(), candidates.end(),
                                    [&](const Candidate& c) { return c.set == s; });
    const auto last = std::find_if(first, candidates.end(),
                                   [&](const Candidate& c) { return c.set != s; });
    return {static_cast<int>(first - candidates.begin()), static_cast<int>(last - candidates.begin())};
}

bool ComplianceMatrix::is_flagged(int column) const {
    return std::binary_search(flagged.begin(), flagged.end(), column);
}

std::vector<int> default_eval_nodes(const SystemMatrix& sys) {
    std::vector<int> out;
    for (int n = 0; n < sys.node_count(); ++n)
        if (sys.dof_map()[static_cast<std::size_t>(n * kDofsPerNode + W)] >= 0) out.push_back(n);
    return out;
}

std::vector<Candidate> candidate_list(const NodeSets& sets) {
    std::vector<Candidate> out;
    for (int s = 0; s < 3; ++s)
        for (int n : sets.sets[s]) out.push_back({n, static_cast<SetId>(s)});
    return out;
}

ComplianceMatrix sweep(const SystemMatrix& sys, const NodeSets& sets,
                       std::span<const int> eval_nodes, const SweepOptions& opt) {
    if (eval_nodes.empty()) throw ConfigError("sweep: no evaluation nodes");
    if (!(opt.unit > 0) || !std::isfinite(opt.unit)) throw ConfigError("sweep: unit load must be positive");
    for (int n : eval_nodes)
        if (n < 0 || n >= sys.node_count())
            throw ConfigError("sweep: evaluation node " + std::to_string(n) + " is not in the mesh");

    ComplianceMatrix m;
    m.eval_nodes.assign(eval_nodes.begin(), eval_nodes.end());
    m.candidates = candidate_list(sets);
    m.unit = opt.unit;
    m.direction = opt.direction;
    m.model_hash = opt.model_hash;
    m.node_count = sys.node_count();
    for (const auto& c : m.candidates)
        if (c.node < 0 || c.node >= sys.node_count())
            throw ConfigError("sweep: candidate node " + std::to_string(c.node) + " is not in the mesh");

    const auto w_eq = [&](int node) {
        return sys.dof_map()[static_cast<std::size_t>(node * kDofsPerNode + W)];
    };
    for (int c = 0; c < static_cast<int>(m.candidates.size()); ++c)
        if (w_eq(m.candidates[c].node) < 0) m.flagged.push_back(c);

    const Eigen::Index n = static_cast<Eigen::Index>(m.eval_nodes.size());
    m.zeta = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(m.candidates.size()));
    const double fz = opt.direction == LoadDirection::MinusZ ? -opt.unit : opt.unit;

    parallel_for(m.candidates.size(), opt.workers, [&](std::size_t c) {
        const int eq = w_eq(m.candidates[c].node);
        if (eq < 0) return;
        Eigen::VectorXd f = Eigen::VectorXd::Zero(sys.equation_count());
        f[eq] = fz;
        const Eigen::VectorXd x = sys.solve_free(f);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int ei = w_eq(m.eval_nodes[static_cast<std::size_t>(i)]);
            m.zeta(i, static_cast<Eigen::Index>(c)) = ei >= 0 ? x[ei] / opt.unit : 0.0;
        }
    });
    return m;
}

// File layout:
//   compliance-matrix 1
//   model_hash <hex>
//   node_count <N>
//   unit <value>
//   direction -z|+z
//   eval_nodes <n>
//   <n node ids>
//   candidates <m>
//   <m lines "J|K|L node">
//   flagged <k>
//   <k column indices>
//   values
//   <m lines, one column of n values each>
//   end
void save_matrix(const ComplianceMatrix& m, std::ostream& os) {
    os << "compliance-matrix " << kComplianceFormatVersion << '\n';
    os << "model_hash " << (m.model_hash.empty() ? "-" : m.model_hash) << '\n';
    os << "node_count " << m.node_count << '\n';
    os << "unit " << format_double(m.unit) << '\n';
    os << "direction " << (m.direction == LoadDirection::MinusZ ? "-z" : "+z") << '\n';
    os << "eval_nodes " << m.eval_nodes.size() << '\n';
    for (std::size_t i = 0; i < m.eval_nodes.size(); ++i)
        os << (i ? " " : "") << m.eval_nodes[i];
    os << '\n';
    os << "candidates " << m.candidates.size() << '\n';
    for (const auto& c : m.candidates) os << set_name(c.set) << ' ' << c.node << '\n';
    os << "flagged " << m.flagged.size() << '\n';
    for (std::size_t i = 0; i < m.flagged.size(); ++i) os << (i ? " " : "") << m.flagged[i];
    os << '\n' << "values\n";
    for (Eigen::Index c = 0; c < m.zeta.cols(); ++c) {
        for (Eigen::Index i = 0; i < m.zeta.rows(); ++i)
            os << (i ? " " : "") << format_double(m.zeta(i, c));
        os << '\n';
    }
    os << "end\n";
}

void save_matrix(const ComplianceMatrix& m, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    save_matrix(m, os);
    if (!os) throw ConfigError("failed writing '" + path.string() + "'");
}

namespace {

class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    std::vector<std::string> line(const char* what) {
        std::string s;
        if (!std::getline(is_, s)) throw ConfigError(std::string("compliance file truncated before ") + what);
        ++line_no_;
        std::istringstream ss(s);
        std::vector<std::string> tokens;
        for (std::string t; ss >> t;) tokens.push_back(t);
        return tokens;
    }

    std::string keyed(const char* key) {
        auto t = line(key);
        if (t.size() != 2 || t[0] != key) fail(std::string("expected '") + key + " <value>'");
        return t[1];
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("corrupt compliance file (line " + std::to_string(line_no_) + "): " + msg);
    }

private:
    std::istream& is_;
    int line_no_ = 0;
};

std::size_t count(Reader& r, const char* key) {
    const long v = parse_long(r.keyed(key));
    if (v < 0) r.fail(std::string("negative ") + key);
    return static_cast<std::size_t>(v);
}

} // namespace

ComplianceMatrix load_matrix(std::istream& is, const std::optional<std::string>& expected_hash,
                             std::optional<int> expected_nodes) {
    Reader r(is);
    auto head = r.line("header");
    if (head.size() != 2 || head[0] != "compliance-matrix") r.fail("not a compliance matrix file");
    if (head[1] != std::to_string(kComplianceFormatVersion))
        throw ConfigError("unsupported compliance file version " + head[1]);

    ComplianceMatrix m;
    m.model_hash = r.keyed("model_hash");
    if (m.model_hash == "-") m.model_hash.clear();
    m.node_count = static_cast<int>(parse_long(r.keyed("node_count")));
    m.unit = parse_double(r.keyed("unit"));
    const std::string dir = r.keyed("direction");
    if (dir == "-z") m.direction = LoadDirection::MinusZ;
    else if (dir == "+z") m.direction = LoadDirection::PlusZ;
    else r.fail("bad direction '" + dir + "'");

    const std::size_t n = count(r, "eval_nodes");
    const auto ids = r.line("eval node list");
    if (ids.size() != n) r.fail("expected " + std::to_string(n) + " evaluation nodes");
    for (const auto& t : ids) m.eval_nodes.push_back(static_cast<int>(parse_long(t)));

    const std::size_t mc = count(r, "candidates");
    for (std::size_t c = 0; c < mc; ++c) {
        const auto t = r.line("candidate list");
        if (t.size() != 2 || t[0].size() != 1 || std::string("JKL").find(t[0][0]) == std::string::npos)
            r.fail("bad candidate entry");
        m.candidates.push_back({static_cast<int>(parse_long(t[1])),
                                static_cast<SetId>(std::string("JKL").find(t[0][0]))});
    }

    const std::size_t nf = count(r, "flagged");
    const auto fl = r.line("flagged list");
    if (fl.size() != nf) r.fail("expected " + std::to_string(nf) + " flagged columns");
    for (const auto& t : fl) m.flagged.push_back(static_cast<int>(parse_long(t)));

    if (r.line("values") != std::vector<std::string>{"values"}) r.fail("expected 'values'");
    m.zeta.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(mc));
    for (std::size_t c = 0; c < mc; ++c) {
        const auto t = r.line("end of values");
        if (t.size() != n) r.fail("column " + std::to_string(c) + " has " + std::to_string(t.size()) +
                                  " values, expected " + std::to_string(n));
        for (std::size_t i = 0; i < n; ++i)
            m.zeta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = parse_double(t[i]);
    }
    if (r.line("end marker") != std::vector<std::string>{"end"}) r.fail("missing end marker");

    if (expected_hash && *expected_hash != m.model_hash)
        throw ConfigError("compliance file was built for model " + m.model_hash + ", expected " +
                          *expected_hash);
    if (expected_nodes && *expected_nodes != m.node_count)
        throw ConfigError("compliance file was built for " + std::to_string(m.node_count) +
                          " nodes, mesh has " + std::to_string(*expected_nodes));
    for (int e : m.eval_nodes)
        if (e < 0 || e >= m.node_count) throw ConfigError("compliance file: evaluation node out of range");
    for (const auto& c : m.candidates)
        if (c.node < 0 || c.node >= m.node_count) throw ConfigError("compliance file: candidate out of range");
    return m;
}

ComplianceMatrix load_matrix(const std::filesystem::path& path,
                             const std::optional<std::string>& expected_hash,
                             std::optional<int> expected_nodes) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open '" + path.string() + "'");
    return load_matrix(is, expected_hash, expected_nodes);
}

} // namespace plateopt
