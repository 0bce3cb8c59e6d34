#pragma once

#include "gridverify/simplex.hpp"

namespace gridverify {

struct MilpParams {
    double gap_tol = 0.0;  // relative; solve to proven optimality by default
    double time_limit_sec = std::numeric_limits<double>::infinity();
    long max_nodes = std::numeric_limits<long>::max();
    double int_tol = 1e-6;
};

// Deterministic branch-and-bound over binary variables: most-fractional
// branching, best-bound node selection, ties broken by lowest index. Child
// LPs warm-start from the parent basis. Determinism holds for any fixed
// parameter set without a time limit.
SolveResult solve_milp(const LinearModel& model, const MilpParams& params = {});

}  // namespace gridverify
