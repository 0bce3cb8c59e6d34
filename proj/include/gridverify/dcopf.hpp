#pragma once

#include "gridverify/grid.hpp"
#include "gridverify/linmodel.hpp"

namespace gridverify {

// Optimal dispatch with the dual data needed to check the KKT system. All
// duals are paired with the per-unit formulation (see kkt_residuals) and are
// nonnegative for the inequality rows.
struct DcOpfSolution {
    Eigen::VectorXd p_g_mw;
    Eigen::VectorXd theta;  // per bus, slack entry 0
    double objective_cost = 0.0;  // $/h
    Eigen::VectorXd lambda;       // per bus
    Eigen::VectorXd mu_line_min, mu_line_max;
    Eigen::VectorXd mu_gen_min, mu_gen_max;
};

// Model plus variable/row maps so callers can read duals back out.
struct DcOpfModel {
    LinearModel model;
    int pg_offset = 0;     // n_gens vars, per-unit
    int theta_offset = 0;  // one var per non-slack bus
    std::vector<int> non_slack_buses;
    std::vector<int> balance_rows;  // per bus
    std::vector<int> line_max_rows, line_min_rows;
    std::vector<int> gen_max_rows, gen_min_rows;
};

// Variables are per-unit dispatch and non-slack angles; rows are nodal
// balance equalities plus split single-sided line and generator limits.
DcOpfModel build_dcopf(const GridCase& grid, const AdmittanceSet& adm,
                       const Eigen::VectorXd& load_mw);

DcOpfSolution solve_dcopf(const GridCase& grid, const AdmittanceSet& adm,
                          const Eigen::VectorXd& load_mw);

// Convenience overloads computing the admittance set internally.
DcOpfModel build_dcopf(const GridCase& grid, const Eigen::VectorXd& load_mw);
DcOpfSolution solve_dcopf(const GridCase& grid, const Eigen::VectorXd& load_mw);

struct KktResiduals {
    double stationarity = 0.0;       // gen and angle stationarity rows
    double complementarity = 0.0;    // mu * slack products
    double dual_feasibility = 0.0;   // negative part of any mu
    double primal_feasibility = 0.0; // balance residual and limit violations, p.u.
    double worst() const {
        return std::max(std::max(stationarity, complementarity),
                        std::max(dual_feasibility, primal_feasibility));
    }
};

// Evaluates the stationarity, complementary slackness, dual and primal
// feasibility residuals of a candidate solution in the per-unit system. A
// candidate is certified optimal when worst() <= 1e-6.
KktResiduals kkt_residuals(const GridCase& grid, const AdmittanceSet& adm,
                           const Eigen::VectorXd& load_mw, const DcOpfSolution& sol);

}  // namespace gridverify
