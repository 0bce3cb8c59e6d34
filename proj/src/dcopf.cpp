#include "gridverify/dcopf.hpp"

#include "gridverify/simplex.hpp"

namespace gridverify {

DcOpfModel build_dcopf(const GridCase& grid, const AdmittanceSet& adm,
                       const Eigen::VectorXd& load_mw) {
    if (load_mw.size() != grid.n_loads()) throw ContractError("load vector length mismatch");
    const double base = grid.base_mva;
    const int nb = grid.n_buses;
    const int ng = grid.n_gens();
    const int nl = grid.n_lines();

    DcOpfModel dm;
    dm.non_slack_buses = adm.non_slack_buses;
    LinearModel& lp = dm.model;
    lp.set_sense(Sense::Minimize);

    // dispatch in p.u.; generator limits become explicit rows so their duals
    // are available, hence free variable bounds here
    dm.pg_offset = lp.n_vars();
    for (int g = 0; g < ng; ++g)
        lp.add_var(-LinearModel::kInf, LinearModel::kInf, grid.gens[g].cost * base);
    dm.theta_offset = lp.n_vars();
    std::vector<int> theta_var(nb, -1);
    for (int b : dm.non_slack_buses) theta_var[b] = lp.add_var(-LinearModel::kInf, LinearModel::kInf);

    // nodal balance: sum_g@b p_g - (B_bus theta)_b = load_b
    Eigen::VectorXd bus_load_pu = Eigen::VectorXd::Zero(nb);
    for (int d = 0; d < grid.n_loads(); ++d) bus_load_pu[grid.loads[d].bus] += load_mw[d] / base;
    for (int b = 0; b < nb; ++b) {
        std::vector<std::pair<int, double>> terms;
        for (int g = 0; g < ng; ++g)
            if (grid.gens[g].bus == b) terms.emplace_back(dm.pg_offset + g, 1.0);
        for (int b2 : dm.non_slack_buses)
            if (adm.b_bus(b, b2) != 0.0) terms.emplace_back(theta_var[b2], -adm.b_bus(b, b2));
        dm.balance_rows.push_back(lp.add_row(std::move(terms), Relation::Equal, bus_load_pu[b]));
    }

    // line limits, split into two single-sided rows
    for (int l = 0; l < nl; ++l) {
        std::vector<std::pair<int, double>> terms;
        for (int b : dm.non_slack_buses)
            if (adm.b_line(l, b) != 0.0) terms.emplace_back(theta_var[b], adm.b_line(l, b));
        double lim = grid.lines[l].flow_limit_mw / base;
        dm.line_max_rows.push_back(lp.add_row(terms, Relation::LessEq, lim));
        dm.line_min_rows.push_back(lp.add_row(std::move(terms), Relation::GreaterEq, -lim));
    }

    // generator limits
    for (int g = 0; g < ng; ++g) {
        dm.gen_max_rows.push_back(lp.add_row({{dm.pg_offset + g, 1.0}}, Relation::LessEq,
                                             grid.gens[g].p_max_mw / base));
        dm.gen_min_rows.push_back(lp.add_row({{dm.pg_offset + g, 1.0}}, Relation::GreaterEq,
                                             grid.gens[g].p_min_mw / base));
    }
    return dm;
}

DcOpfModel build_dcopf(const GridCase& grid, const Eigen::VectorXd& load_mw) {
    return build_dcopf(grid, build_admittance(grid), load_mw);
}

DcOpfSolution solve_dcopf(const GridCase& grid, const AdmittanceSet& adm,
                          const Eigen::VectorXd& load_mw) {
    DcOpfModel dm = build_dcopf(grid, adm, load_mw);
    SolveResult res = solve_lp(dm.model);
    if (res.status == SolveStatus::Infeasible)
        throw InfeasibleError("DC-OPF infeasible at the given loading");
    if (res.status != SolveStatus::Optimal)
        throw SolverError(std::string("DC-OPF solve ended with status ") + to_string(res.status));

    const double base = grid.base_mva;
    DcOpfSolution sol;
    sol.p_g_mw.resize(grid.n_gens());
    for (int g = 0; g < grid.n_gens(); ++g) sol.p_g_mw[g] = res.x[dm.pg_offset + g] * base;
    sol.theta = Eigen::VectorXd::Zero(grid.n_buses);
    for (std::size_t i = 0; i < dm.non_slack_buses.size(); ++i)
        sol.theta[dm.non_slack_buses[i]] = res.x[dm.theta_offset + int(i)];
    sol.objective_cost = res.objective;

    // map shadow prices onto the KKT multipliers: lambda = -y_balance,
    // mu(>=) = +y, mu(<=) = -y
    sol.lambda.resize(grid.n_buses);
    for (int b = 0; b < grid.n_buses; ++b) sol.lambda[b] = -res.row_duals[dm.balance_rows[b]];
    sol.mu_line_max.resize(grid.n_lines());
    sol.mu_line_min.resize(grid.n_lines());
    for (int l = 0; l < grid.n_lines(); ++l) {
        sol.mu_line_max[l] = -res.row_duals[dm.line_max_rows[l]];
        sol.mu_line_min[l] = res.row_duals[dm.line_min_rows[l]];
    }
    sol.mu_gen_max.resize(grid.n_gens());
    sol.mu_gen_min.resize(grid.n_gens());
    for (int g = 0; g < grid.n_gens(); ++g) {
        sol.mu_gen_max[g] = -res.row_duals[dm.gen_max_rows[g]];
        sol.mu_gen_min[g] = res.row_duals[dm.gen_min_rows[g]];
    }
    return sol;
}

DcOpfSolution solve_dcopf(const GridCase& grid, const Eigen::VectorXd& load_mw) {
    return solve_dcopf(grid, build_admittance(grid), load_mw);
}

KktResiduals kkt_residuals(const GridCase& grid, const AdmittanceSet& adm,
                           const Eigen::VectorXd& load_mw, const DcOpfSolution& sol) {
    const double base = grid.base_mva;
    const int nb = grid.n_buses;
    const int ng = grid.n_gens();
    const int nl = grid.n_lines();
    KktResiduals r;

    Eigen::VectorXd pg_pu = sol.p_g_mw / base;
    Eigen::VectorXd flow_pu = adm.b_line * sol.theta;
    Eigen::VectorXd lim_pu(nl), gmax_pu(ng), gmin_pu(ng), cost_pu(ng);
    for (int l = 0; l < nl; ++l) lim_pu[l] = grid.lines[l].flow_limit_mw / base;
    for (int g = 0; g < ng; ++g) {
        gmax_pu[g] = grid.gens[g].p_max_mw / base;
        gmin_pu[g] = grid.gens[g].p_min_mw / base;
        cost_pu[g] = grid.gens[g].cost * base;
    }

    // stationarity wrt dispatch: c - mu_min + mu_max + Mg' lambda = 0
    for (int g = 0; g < ng; ++g) {
        double v = cost_pu[g] - sol.mu_gen_min[g] + sol.mu_gen_max[g] + sol.lambda[grid.gens[g].bus];
        r.stationarity = std::max(r.stationarity, std::abs(v));
    }
    // stationarity wrt angles: -Bline' mu_min + Bline' mu_max - Bbus lambda = 0
    Eigen::VectorXd stat_theta = adm.b_line.transpose() * (sol.mu_line_max - sol.mu_line_min) -
                                 adm.b_bus * sol.lambda;
    r.stationarity = std::max(r.stationarity, stat_theta.cwiseAbs().maxCoeff());

    // complementary slackness
    for (int l = 0; l < nl; ++l) {
        r.complementarity =
            std::max(r.complementarity, std::abs(sol.mu_line_min[l] * (-lim_pu[l] - flow_pu[l])));
        r.complementarity =
            std::max(r.complementarity, std::abs(sol.mu_line_max[l] * (flow_pu[l] - lim_pu[l])));
    }
    for (int g = 0; g < ng; ++g) {
        r.complementarity =
            std::max(r.complementarity, std::abs(sol.mu_gen_min[g] * (gmin_pu[g] - pg_pu[g])));
        r.complementarity =
            std::max(r.complementarity, std::abs(sol.mu_gen_max[g] * (pg_pu[g] - gmax_pu[g])));
    }

    // dual feasibility
    auto neg_part = [](const Eigen::VectorXd& v) { return v.size() ? std::max(0.0, -v.minCoeff()) : 0.0; };
    r.dual_feasibility = std::max(std::max(neg_part(sol.mu_line_min), neg_part(sol.mu_line_max)),
                                  std::max(neg_part(sol.mu_gen_min), neg_part(sol.mu_gen_max)));

    // primal feasibility: nodal balance and limits
    Eigen::VectorXd inj_pu = Eigen::VectorXd::Zero(nb);
    for (int g = 0; g < ng; ++g) inj_pu[grid.gens[g].bus] += pg_pu[g];
    for (int d = 0; d < grid.n_loads(); ++d) inj_pu[grid.loads[d].bus] -= load_mw[d] / base;
    Eigen::VectorXd balance = inj_pu - adm.b_bus * sol.theta;
    r.primal_feasibility = balance.size() ? balance.cwiseAbs().maxCoeff() : 0.0;
    for (int l = 0; l < nl; ++l) {
        r.primal_feasibility = std::max(r.primal_feasibility, flow_pu[l] - lim_pu[l]);
        r.primal_feasibility = std::max(r.primal_feasibility, -lim_pu[l] - flow_pu[l]);
    }
    for (int g = 0; g < ng; ++g) {
        r.primal_feasibility = std::max(r.primal_feasibility, pg_pu[g] - gmax_pu[g]);
        r.primal_feasibility = std::max(r.primal_feasibility, gmin_pu[g] - pg_pu[g]);
    }
    r.primal_feasibility = std::max(r.primal_feasibility, std::abs(sol.theta[grid.slack_bus]));
    return r;
}

}  // namespace gridverify
