#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plateopt/fe_solver.hpp"
#include "plateopt/mesh_model.hpp"

namespace plateopt {

inline constexpr int kComplianceFormatVersion = 1;

struct Candidate {
    int node = 0;
    SetId set = SetId::J;
    friend bool operator==(const Candidate&, const Candidate&) = default;
};

// zeta(i, c): out-of-plane displacement of eval_nodes[i] per unit load at
// candidates[c] [mm/N]. Loads act along `direction`, so for a -z load the
// self-compliance of an evaluation node is negative.
struct ComplianceMatrix {
    Eigen::MatrixXd zeta;
    std::vector<int> eval_nodes;
    std::vector<Candidate> candidates; // J, then K, then L, ascending node index
    std::vector<int> flagged;          // columns of candidates constrained in w
    double unit = 1.0;
    LoadDirection direction = LoadDirection::MinusZ;
    std::string model_hash;
    int node_count = 0;

    int rows() const { return static_cast<int>(zeta.rows()); }
    int cols() const { return static_cast<int>(zeta.cols()); }
    // Column range [first, last) of a candidate set.
    std::array<int, 2> set_columns(SetId s) const;
    bool is_flagged(int column) const;
};

struct SweepOptions {
    double unit = 1.0;
    LoadDirection direction = LoadDirection::MinusZ;
    int workers = 1;
    std::string model_hash;
};

// Nodes whose w is not constrained, ascending.
std::vector<int> default_eval_nodes(const SystemMatrix& sys);

std::vector<Candidate> candidate_list(const NodeSets& sets);

ComplianceMatrix sweep(const SystemMatrix& sys, const NodeSets& sets,
                       std::span<const int> eval_nodes, const SweepOptions& opt = {});

void save_matrix(const ComplianceMatrix& m, std::ostream& os);
void save_matrix(const ComplianceMatrix& m, const std::filesystem::path& path);

// Throws ConfigError on a malformed or truncated file, a version mismatch, or
// when the stored model hash / node count differ from the expected ones.
ComplianceMatrix load_matrix(std::istream& is, const std::optional<std::string>& expected_hash = {},
                             std::optional<int> expected_nodes = {});
ComplianceMatrix load_matrix(const std::filesystem::path& path,
                             const std::optional<std::string>& expected_hash = {},
                             std::optional<int> expected_nodes = {});

} // namespace plateopt
