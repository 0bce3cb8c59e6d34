#pragma once

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gridverify/util.hpp"

namespace gridverify {

enum class Sense { Minimize, Maximize };
enum class Relation { LessEq, Equal, GreaterEq };

enum class SolveStatus { Optimal, Infeasible, Unbounded, GapLimit, TimeLimit };

const char* to_string(SolveStatus s);

struct ConstraintRow {
    std::vector<std::pair<int, double>> terms;
    Relation rel = Relation::LessEq;
    double rhs = 0.0;
    // nonzero when the row carries a big-M constant (post-solve audits check
    // that such rows are non-binding)
    double big_m = 0.0;
};

// Generic linear objective + linear constraints over continuous and binary
// variables. Immutable once handed to a solver.
class LinearModel {
public:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    int add_var(double lower, double upper, double obj_coef = 0.0) {
        lower_.push_back(lower);
        upper_.push_back(upper);
        objective_.push_back(obj_coef);
        is_binary_.push_back(0);
        return int(objective_.size()) - 1;
    }

    int add_binary(double obj_coef = 0.0) {
        int v = add_var(0.0, 1.0, obj_coef);
        is_binary_.back() = 1;
        binary_vars_.push_back(v);
        return v;
    }

    // binaries with a higher class branch first in the MILP search
    void set_branch_priority(int v, int priority) { branch_priority_[v] = priority; }
    int branch_priority(int v) const {
        auto it = branch_priority_.find(v);
        return it == branch_priority_.end() ? 0 : it->second;
    }

    int add_row(std::vector<std::pair<int, double>> terms, Relation rel, double rhs,
                double big_m = 0.0) {
        rows_.push_back(ConstraintRow{std::move(terms), rel, rhs, big_m});
        return int(rows_.size()) - 1;
    }

    void set_sense(Sense s) { sense_ = s; }
    void set_objective(std::vector<double> coefs) {
        if (int(coefs.size()) != n_vars()) throw ContractError("objective size mismatch");
        objective_ = std::move(coefs);
    }
    void set_objective_coef(int v, double coef) { objective_.at(v) = coef; }
    void clear_objective() { std::fill(objective_.begin(), objective_.end(), 0.0); }
    void set_var_bounds(int v, double lower, double upper) {
        lower_.at(v) = lower;
        upper_.at(v) = upper;
    }

    int n_vars() const { return int(objective_.size()); }
    int n_rows() const { return int(rows_.size()); }
    Sense sense() const { return sense_; }
    const std::vector<double>& objective() const { return objective_; }
    const std::vector<double>& lower_bounds() const { return lower_; }
    const std::vector<double>& upper_bounds() const { return upper_; }
    double lower(int v) const { return lower_.at(v); }
    double upper(int v) const { return upper_.at(v); }
    bool is_binary(int v) const { return is_binary_.at(v) != 0; }
    const std::vector<int>& binary_vars() const { return binary_vars_; }
    const std::vector<ConstraintRow>& rows() const { return rows_; }
    const ConstraintRow& row(int r) const { return rows_.at(r); }

    double row_activity(int r, const std::vector<double>& x) const {
        double a = 0.0;
        for (const auto& [v, coef] : rows_.at(r).terms) a += coef * x[v];
        return a;
    }

    // throws ContractError on invalid indices, NaN data or binary bounds
    // outside [0,1]
    void validate() const;

private:
    Sense sense_ = Sense::Minimize;
    std::vector<double> objective_;
    std::vector<double> lower_, upper_;
    std::vector<uint8_t> is_binary_;
    std::vector<int> binary_vars_;
    std::vector<ConstraintRow> rows_;
    std::map<int, int> branch_priority_;
};

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> x;
    // shadow prices d(objective)/d(rhs); populated by LP solves only
    std::vector<double> row_duals;
    bool has_duals = false;
    double objective = 0.0;
    double best_bound = 0.0;
    double milp_gap = 0.0;
    long node_count = 0;
    double wall_time_sec = 0.0;
};

// LP text export (CPLEX-style); variables named x{i}, rows c{i}, stable and
// reproducible byte-for-byte.
std::string export_lp_format(const LinearModel& model);

}  // namespace gridverify
