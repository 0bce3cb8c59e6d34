#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gridverify/grid.hpp"

namespace gridverify {

struct MlpNetwork;

// Load input domain: per-load box as fractions of nominal loading, with
// optional extra polytope rows A p_d <= b in MW. Latin hypercube sampling
// requires the pure box form.
struct InputDomain {
    Eigen::VectorXd lower_frac;
    Eigen::VectorXd upper_frac;
    Eigen::MatrixXd poly_a;  // 0 rows when absent
    Eigen::VectorXd poly_b;

    static InputDomain box(int n_loads, double lower = 0.6, double upper = 1.0);

    bool is_box() const { return poly_a.rows() == 0; }
    int n_loads() const { return int(lower_frac.size()); }

    // shrink both sides by delta: [lower+delta, upper-delta]
    InputDomain reduced(double delta) const;

    Eigen::VectorXd lower_mw(const GridCase& grid) const;
    Eigen::VectorXd upper_mw(const GridCase& grid) const;
    void validate(const GridCase& grid) const;
};

struct LabeledDataset {
    Eigen::MatrixXd inputs;   // N x n_loads, MW
    Eigen::MatrixXd targets;  // N x n_gens, optimal dispatch incl. slack, MW
    std::vector<int> train_idx, test_idx;

    // provenance
    std::string case_name;
    std::uint64_t seed = 0;
    InputDomain domain;
    int n_requested = 0;
    int n_infeasible = 0;

    int size() const { return int(inputs.rows()); }
};

// One sample per equal-width stratum and dimension, deterministic per seed.
Eigen::MatrixXd lhs_sample(const InputDomain& domain, const GridCase& grid, int n,
                           std::uint64_t seed);

// LHS inputs labeled with DC-OPF dispatch. Infeasible samples are dropped and
// counted (no re-draw, to keep the stratification semantics); more than 50%
// drops abort with a diagnostic. 80/20 split by seeded shuffle.
LabeledDataset generate_dataset(const GridCase& grid, const InputDomain& domain, int n,
                                std::uint64_t seed);

void save_dataset(const LabeledDataset& data, const std::string& dir);
LabeledDataset load_dataset(const std::string& dir);

// Pointwise worst cases over every dataset row (train + test): the empirical
// lower bounds the MILP guarantees are compared against.
struct EmpiricalWorstCase {
    double nu_g_mw = 0.0;
    double nu_line_mw = 0.0;
    double nu_dist_frac = 0.0;  // max |mismatch| / generator range
    double nu_opt_raw = 0.0;    // $/h against the stored target cost
    int row_nu_g = -1, row_nu_line = -1, row_nu_dist = -1, row_nu_opt = -1;
};

EmpiricalWorstCase empirical_worst_case(const LabeledDataset& data, const MlpNetwork& net,
                                        const GridCase& grid, const AdmittanceSet& adm);

}  // namespace gridverify
