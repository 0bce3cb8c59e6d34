#include "gridverify/branch_bound.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <queue>

namespace gridverify {

namespace {

struct Node {
    // (binary var, fixed value) along the path from the root
    std::vector<std::pair<int, signed char>> fixings;
    double bound_est;  // parent LP objective, min-sense
    long id;
    std::shared_ptr<SimplexSolver::Basis> warm;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound_est != b.bound_est) return a.bound_est > b.bound_est;  // min-heap on bound
        return a.id > b.id;
    }
};

}  // namespace

SolveResult solve_milp(const LinearModel& model, const MilpParams& params) {
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    const bool maximize = model.sense() == Sense::Maximize;
    const double sgn = maximize ? -1.0 : 1.0;  // user objective * sgn = min-sense value

    SimplexSolver solver(model);
    const auto& binaries = model.binary_vars();

    std::vector<double> lo0 = model.lower_bounds();
    std::vector<double> hi0 = model.upper_bounds();

    SolveResult out;
    out.status = SolveStatus::Infeasible;
    bool have_incumbent = false;
    double incumbent = std::numeric_limits<double>::infinity();  // min-sense
    std::vector<double> incumbent_x;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    open.push(Node{{}, -std::numeric_limits<double>::infinity(), next_id++, nullptr});

    long nodes_solved = 0;
    double global_lb = -std::numeric_limits<double>::infinity();

    auto finish = [&](SolveStatus st) {
        out.status = st;
        // the optimum can be no better than the best open node nor better
        // than the incumbent itself, whichever is stronger
        double proven = global_lb;
        if (have_incumbent) {
            out.x = incumbent_x;
            out.objective = sgn * incumbent;
            proven = std::min(proven, incumbent);
        }
        out.best_bound = sgn * proven;
        double denom = std::max(1.0, std::abs(sgn * incumbent));
        out.milp_gap = have_incumbent ? std::max(0.0, incumbent - proven) / denom
                                      : std::numeric_limits<double>::infinity();
        out.node_count = nodes_solved;
        out.wall_time_sec = elapsed();
        return out;
    };

    while (!open.empty()) {
        // proven bound = best over open nodes (their estimates are valid
        // bounds inherited from solved parents)
        global_lb = open.top().bound_est;
        if (have_incumbent) {
            double gap = std::max(0.0, incumbent - global_lb) / std::max(1.0, std::abs(incumbent));
            if (gap <= params.gap_tol) return finish(SolveStatus::Optimal);
        }
        if (nodes_solved >= params.max_nodes) return finish(SolveStatus::GapLimit);
        if (elapsed() > params.time_limit_sec) return finish(SolveStatus::TimeLimit);

        Node node = open.top();
        open.pop();
        if (have_incumbent && node.bound_est >= incumbent - 1e-12) continue;  // pruned

        std::vector<double> lo = lo0, hi = hi0;
        for (auto [v, val] : node.fixings) {
            lo[v] = val;
            hi[v] = val;
        }
        ++nodes_solved;
        SolveResult lp = solver.solve(nullptr, &lo, &hi, node.warm.get());
        if (lp.status == SolveStatus::Unbounded) {
            if (node.fixings.empty() && binaries.empty()) return finish(SolveStatus::Unbounded);
            // a relaxation with binaries can be unbounded only if the MILP is
            // unbounded or infeasible in this subtree; report unbounded
            return finish(SolveStatus::Unbounded);
        }
        if (lp.status != SolveStatus::Optimal) continue;  // infeasible subtree

        double lp_obj = sgn * lp.objective;
        if (have_incumbent && lp_obj >= incumbent - 1e-12) continue;

        // most fractional binary within the highest branching-priority class
        int branch_var = -1;
        double worst_frac = params.int_tol;
        int best_prio = std::numeric_limits<int>::min();
        for (int v : binaries) {
            double f = lp.x[v] - std::floor(lp.x[v]);
            double dist = std::min(f, 1.0 - f);
            if (dist <= params.int_tol) continue;
            int prio = model.branch_priority(v);
            if (prio > best_prio) {
                best_prio = prio;
                worst_frac = dist;
                branch_var = v;
            } else if (prio == best_prio && dist > worst_frac + 1e-15) {
                worst_frac = dist;
                branch_var = v;
            }
        }
        if (branch_var < 0) {
            // all binaries near-integral; re-solve with them pinned to the
            // rounded values so the incumbent satisfies the integrality side
            // constraints exactly (big-M rows amplify even tiny fractions)
            std::vector<double> flo = lo, fhi = hi;
            bool exact = true;
            for (int v : binaries) {
                double r = std::round(lp.x[v]);
                exact = exact && lp.x[v] == r;
                flo[v] = r;
                fhi[v] = r;
            }
            SolveResult fixed = lp;
            if (!exact) {
                SimplexSolver::Basis warm_basis = solver.last_basis();
                fixed = solver.solve(nullptr, &flo, &fhi, &warm_basis);
            }
            if (fixed.status == SolveStatus::Optimal) {
                double fixed_obj = sgn * fixed.objective;
                if (!have_incumbent || fixed_obj < incumbent) {
                    have_incumbent = true;
                    incumbent = fixed_obj;
                    incumbent_x = fixed.x;
                }
                continue;
            }
            // snapping cut the point off: keep the subtree by branching on
            // the least integral binary (any nonzero fraction qualifies)
            double fallback_frac = 0.0;
            for (int v : binaries) {
                double f = lp.x[v] - std::floor(lp.x[v]);
                double dist = std::min(f, 1.0 - f);
                if (dist > fallback_frac) {
                    fallback_frac = dist;
                    branch_var = v;
                }
            }
            // exactly integral points cannot be cut by snapping, so a
            // branch variable always exists here
            if (branch_var < 0) continue;
        }

        auto warm = std::make_shared<SimplexSolver::Basis>(solver.last_basis());
        for (signed char val : {static_cast<signed char>(0), static_cast<signed char>(1)}) {
            Node child;
            child.fixings = node.fixings;
            child.fixings.emplace_back(branch_var, val);
            child.bound_est = lp_obj;
            child.id = next_id++;
            child.warm = warm;
            open.push(child);
        }
    }

    global_lb = have_incumbent ? incumbent : std::numeric_limits<double>::infinity();
    if (!have_incumbent) return finish(SolveStatus::Infeasible);
    return finish(SolveStatus::Optimal);
}

}  // namespace gridverify
