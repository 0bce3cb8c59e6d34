#pragma once

// Test-only brute-force oracles, independent of the simplex implementation:
// vertex enumeration for LPs over boxed variables and full binary enumeration
// for MILPs.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "gridverify/linmodel.hpp"

namespace gridverify::testing {

// Enumerates all candidate vertices (intersections of n active conditions
// drawn from constraint equalities and variable bounds), keeps the feasible
// ones and returns the best objective. All variable bounds must be finite.
inline std::optional<double> vertex_enumeration_optimum(const LinearModel& m) {
    const int n = m.n_vars();
    struct Cond {
        Eigen::VectorXd row;
        double rhs;
    };
    std::vector<Cond> conds;
    for (int r = 0; r < m.n_rows(); ++r) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        for (auto [v, c] : m.row(r).terms) a[v] += c;
        conds.push_back({a, m.row(r).rhs});
    }
    for (int v = 0; v < n; ++v) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        a[v] = 1.0;
        conds.push_back({a, m.lower(v)});
        conds.push_back({a, m.upper(v)});
    }

    const double tol = 1e-7;
    auto feasible = [&](const Eigen::VectorXd& x) {
        for (int v = 0; v < n; ++v)
            if (x[v] < m.lower(v) - tol || x[v] > m.upper(v) + tol) return false;
        for (int r = 0; r < m.n_rows(); ++r) {
            double act = m.row_activity(r, std::vector<double>(x.data(), x.data() + n));
            switch (m.row(r).rel) {
                case Relation::LessEq:
                    if (act > m.row(r).rhs + tol) return false;
                    break;
                case Relation::GreaterEq:
                    if (act < m.row(r).rhs - tol) return false;
                    break;
                case Relation::Equal:
                    if (std::abs(act - m.row(r).rhs) > tol) return false;
                    break;
            }
        }
        return true;
    };

    std::optional<double> best;
    std::vector<int> pick(n);
    const int total = int(conds.size());
    // iterate over all n-subsets of conditions
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    auto advance = [&]() {
        int i = n - 1;
        while (i >= 0 && idx[i] == total - n + i) --i;
        if (i < 0) return false;
        ++idx[i];
        for (int j = i + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
        return true;
    };
    if (n == 0) return 0.0;
    do {
        Eigen::MatrixXd A(n, n);
        Eigen::VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            A.row(i) = conds[idx[i]].row.transpose();
            b[i] = conds[idx[i]].rhs;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd x = lu.solve(b);
        if (!feasible(x)) continue;
        double obj = 0.0;
        for (int v = 0; v < n; ++v) obj += m.objective()[v] * x[v];
        if (!best) {
            best = obj;
        } else if (m.sense() == Sense::Minimize) {
            best = std::min(*best, obj);
        } else {
            best = std::max(*best, obj);
        }
    } while (advance());
    return best;
}

// Brute force over every binary assignment; each assignment is substituted
// out and the continuous remainder resolved by vertex enumeration.
inline std::optional<double> milp_brute_force(const LinearModel& m) {
    const auto& bins = m.binary_vars();
    const int k = int(bins.size());
    std::vector<int> remap(m.n_vars(), -1);
    std::vector<int> cont;
    for (int v = 0; v < m.n_vars(); ++v)
        if (!m.is_binary(v)) {
            remap[v] = int(cont.size());
            cont.push_back(v);
        }

    std::optional<double> best;
    for (long mask = 0; mask < (1L << k); ++mask) {
        std::vector<double> binval(m.n_vars(), 0.0);
        for (int i = 0; i < k; ++i) binval[bins[i]] = (mask >> i) & 1 ? 1.0 : 0.0;

        LinearModel reduced;
        reduced.set_sense(m.sense());
        double const_obj = 0.0;
        for (int v : cont) reduced.add_var(m.lower(v), m.upper(v), m.objective()[v]);
        for (int v : bins) const_obj += m.objective()[v] * binval[v];
        bool ok = true;
        for (int r = 0; r < m.n_rows() && ok; ++r) {
            std::vector<std::pair<int, double>> terms;
            double rhs = m.row(r).rhs;
            for (auto [v, c] : m.row(r).terms) {
                if (remap[v] >= 0)
                    terms.emplace_back(remap[v], c);
                else
                    rhs -= c * binval[v];
            }
            if (terms.empty()) {
                switch (m.row(r).rel) {
                    case Relation::LessEq: ok = rhs >= -1e-9; break;
                    case Relation::GreaterEq: ok = rhs <= 1e-9; break;
                    case Relation::Equal: ok = std::abs(rhs) <= 1e-9; break;
                }
                continue;
            }
            reduced.add_row(std::move(terms), m.row(r).rel, rhs);
        }
        if (!ok) continue;
        auto obj = vertex_enumeration_optimum(reduced);
        if (!obj) continue;
        double total = *obj + const_obj;
        if (!best) {
            best = total;
        } else if (m.sense() == Sense::Minimize) {
            best = std::min(*best, total);
        } else {
            best = std::max(*best, total);
        }
    }
    return best;
}

}  // namespace gridverify::testing
