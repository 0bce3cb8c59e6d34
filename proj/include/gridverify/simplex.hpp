#pragma once

#include <Eigen/Dense>

#include "gridverify/linmodel.hpp"

namespace gridverify {

struct SimplexOptions {
    double feas_tol = 1e-9;   // internal bound/row feasibility
    double dual_tol = 1e-9;   // reduced-cost optimality threshold
    double pivot_tol = 1e-9;  // smallest acceptable pivot magnitude
    long max_iterations = 200000;
    int refactor_every = 100;
    int stall_limit = 1000;  // degenerate pivots before Bland's rule kicks in
};

// Bounded-variable primal simplex over a dense column matrix with an
// explicitly maintained basis inverse. One instance per model; re-solvable
// with altered objectives/bounds and warm-started bases, which is what the
// branch-and-bound driver and the neuron bound tightener need.
class SimplexSolver {
public:
    // variable status: one slack per row appended after the structural vars
    enum VStat : signed char { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

    struct Basis {
        std::vector<int> basic;          // per row, variable index
        std::vector<signed char> vstat;  // per variable (structural + slack)
    };

    explicit SimplexSolver(const LinearModel& model, SimplexOptions opts = {});

    // Solve with optional overrides. `obj` and the bound vectors are in model
    // (user) convention and sized n_vars; pass nullptr to use the model's
    // data. Duals are shadow prices in the model's sense.
    SolveResult solve(const std::vector<double>* obj = nullptr,
                      const std::vector<double>* lower = nullptr,
                      const std::vector<double>* upper = nullptr, const Basis* warm = nullptr);

    const Basis& last_basis() const { return last_basis_; }
    int n_structural() const { return n_; }

private:
    const LinearModel& model_;
    SimplexOptions opts_;
    int n_ = 0;  // structural vars
    int m_ = 0;  // rows
    Eigen::MatrixXd cols_;   // m x n structural columns
    Eigen::VectorXd rhs_;

    // per-solve state
    Eigen::VectorXd c_;      // minimization objective over all vars
    Eigen::VectorXd lo_, up_;
    Eigen::MatrixXd binv_;
    std::vector<int> basic_;
    std::vector<int> factorized_basis_;  // basis binv_ was computed for
    std::vector<signed char> vstat_;
    Eigen::VectorXd x_;
    bool bland_ = false;
    long stall_count_ = 0;
    long pivots_since_refactor_ = 0;
    Basis last_basis_;

    void load_bounds(const std::vector<double>* lower, const std::vector<double>* upper);
    void install_basis(const Basis* warm);
    bool refactorize();          // rebuild binv_ from basic_; false if singular
    void set_nonbasic_values();  // nonbasic vars to their bound / zero
    void compute_basic_values();
    Eigen::VectorXd column(int j) const;
    double infeasibility() const;

    enum class StepResult { Optimal, Unbounded, Pivoted };
    StepResult iterate(bool phase1);
};

// Solves a model as an LP (integrality ignored; binaries keep their [0,1]
// bounds). Duals are shadow prices d(objective)/d(rhs).
SolveResult solve_lp(const LinearModel& model, SimplexOptions opts = {});

}  // namespace gridverify
