#include "gridverify/simplex.hpp"

#include <chrono>
#include <cmath>

namespace gridverify {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::Unbounded: return "Unbounded";
        case SolveStatus::GapLimit: return "GapLimit";
        case SolveStatus::TimeLimit: return "TimeLimit";
    }
    return "?";
}

void LinearModel::validate() const {
    auto bad = [](double v) { return std::isnan(v); };
    for (double v : objective_)
        if (bad(v)) throw ContractError("NaN objective coefficient");
    for (int v = 0; v < n_vars(); ++v) {
        if (bad(lower_[v]) || bad(upper_[v])) throw ContractError("NaN variable bound");
        if (lower_[v] > upper_[v])
            throw ContractError("variable " + std::to_string(v) + " has lower > upper");
        if (is_binary_[v] && (lower_[v] < 0.0 || upper_[v] > 1.0))
            throw ContractError("binary variable bounds outside [0,1]");
    }
    for (const auto& r : rows_) {
        if (bad(r.rhs)) throw ContractError("NaN rhs");
        for (const auto& [v, coef] : r.terms) {
            if (v < 0 || v >= n_vars()) throw ContractError("constraint references invalid variable");
            if (bad(coef)) throw ContractError("NaN constraint coefficient");
        }
    }
}

SimplexSolver::SimplexSolver(const LinearModel& model, SimplexOptions opts)
    : model_(model), opts_(opts) {
    model_.validate();
    n_ = model_.n_vars();
    m_ = model_.n_rows();
    cols_ = Eigen::MatrixXd::Zero(m_, n_);
    rhs_ = Eigen::VectorXd::Zero(m_);
    for (int r = 0; r < m_; ++r) {
        for (const auto& [v, coef] : model_.row(r).terms) cols_(r, v) += coef;
        rhs_[r] = model_.row(r).rhs;
    }
}

Eigen::VectorXd SimplexSolver::column(int j) const {
    if (j < n_) return cols_.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j - n_] = 1.0;
    return e;
}

void SimplexSolver::load_bounds(const std::vector<double>* lower, const std::vector<double>* upper) {
    lo_.resize(n_ + m_);
    up_.resize(n_ + m_);
    const std::vector<double>& lsrc = lower ? *lower : model_.lower_bounds();
    const std::vector<double>& usrc = upper ? *upper : model_.upper_bounds();
    for (int v = 0; v < n_; ++v) {
        lo_[v] = lsrc[v];
        up_[v] = usrc[v];
    }
    // slack bounds encode the row relation: ax + s = b
    for (int r = 0; r < m_; ++r) {
        switch (model_.row(r).rel) {
            case Relation::LessEq:
                lo_[n_ + r] = 0.0;
                up_[n_ + r] = kInf;
                break;
            case Relation::GreaterEq:
                lo_[n_ + r] = -kInf;
                up_[n_ + r] = 0.0;
                break;
            case Relation::Equal:
                lo_[n_ + r] = 0.0;
                up_[n_ + r] = 0.0;
                break;
        }
    }
}

void SimplexSolver::install_basis(const Basis* warm) {
    bool ok = warm && int(warm->basic.size()) == m_ && int(warm->vstat.size()) == n_ + m_;
    if (ok) {
        basic_ = warm->basic;
        vstat_ = warm->vstat;
    } else {
        basic_.resize(m_);
        vstat_.assign(n_ + m_, kAtLower);
        for (int r = 0; r < m_; ++r) {
            basic_[r] = n_ + r;
            vstat_[n_ + r] = kBasic;
        }
        for (int v = 0; v < n_; ++v) {
            if (std::isfinite(lo_[v]))
                vstat_[v] = kAtLower;
            else if (std::isfinite(up_[v]))
                vstat_[v] = kAtUpper;
            else
                vstat_[v] = kFreeZero;
        }
    }
    // bound overrides can leave a stale nonbasic status pointing at an
    // infinite bound; demote such vars
    for (int v = 0; v < n_ + m_; ++v) {
        if (vstat_[v] == kAtLower && !std::isfinite(lo_[v]))
            vstat_[v] = std::isfinite(up_[v]) ? kAtUpper : kFreeZero;
        else if (vstat_[v] == kAtUpper && !std::isfinite(up_[v]))
            vstat_[v] = std::isfinite(lo_[v]) ? kAtLower : kFreeZero;
    }
}

bool SimplexSolver::refactorize() {
    if (factorized_basis_ == basic_ && pivots_since_refactor_ == 0) return true;
    if (m_ == 0) {
        binv_.resize(0, 0);
        factorized_basis_ = basic_;
        return true;
    }
    Eigen::MatrixXd b(m_, m_);
    for (int r = 0; r < m_; ++r) b.col(r) = column(basic_[r]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    double diag_max = lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
    double diag_min = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(diag_max > 0.0) || diag_min < 1e-12 * std::max(1.0, diag_max)) {
        factorized_basis_.clear();
        return false;
    }
    binv_ = lu.inverse();
    factorized_basis_ = basic_;
    pivots_since_refactor_ = 0;
    return true;
}

void SimplexSolver::set_nonbasic_values() {
    x_.resize(n_ + m_);
    for (int v = 0; v < n_ + m_; ++v) {
        switch (vstat_[v]) {
            case kAtLower: x_[v] = lo_[v]; break;
            case kAtUpper: x_[v] = up_[v]; break;
            case kFreeZero: x_[v] = 0.0; break;
            default: x_[v] = 0.0; break;
        }
    }
}

void SimplexSolver::compute_basic_values() {
    Eigen::VectorXd r = rhs_;
    for (int v = 0; v < n_; ++v)
        if (vstat_[v] != kBasic && x_[v] != 0.0) r -= cols_.col(v) * x_[v];
    for (int s = 0; s < m_; ++s)
        if (vstat_[n_ + s] != kBasic && x_[n_ + s] != 0.0) r[s] -= x_[n_ + s];
    Eigen::VectorXd xb = binv_ * r;
    for (int i = 0; i < m_; ++i) x_[basic_[i]] = xb[i];
}

double SimplexSolver::infeasibility() const {
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
        int v = basic_[i];
        worst = std::max(worst, lo_[v] - x_[v]);
        worst = std::max(worst, x_[v] - up_[v]);
    }
    return worst;
}

SimplexSolver::StepResult SimplexSolver::iterate(bool phase1) {
    // gradient over basic variables
    Eigen::VectorXd g(m_);
    for (int i = 0; i < m_; ++i) {
        int v = basic_[i];
        if (phase1) {
            if (x_[v] < lo_[v] - opts_.feas_tol)
                g[i] = -1.0;
            else if (x_[v] > up_[v] + opts_.feas_tol)
                g[i] = 1.0;
            else
                g[i] = 0.0;
        } else {
            g[i] = c_[v];
        }
    }
    Eigen::VectorXd y = binv_.transpose() * g;
    Eigen::VectorXd d_struct = -(cols_.transpose() * y);
    if (!phase1)
        for (int v = 0; v < n_; ++v) d_struct[v] += c_[v];

    auto reduced = [&](int v) {
        if (v < n_) return d_struct[v];
        double d = -y[v - n_];
        if (!phase1) d += c_[v];
        return d;
    };

    // pricing
    int enter = -1;
    double best = 0.0;
    int dir = 0;
    for (int v = 0; v < n_ + m_; ++v) {
        signed char st = vstat_[v];
        if (st == kBasic) continue;
        if (up_[v] - lo_[v] <= 0.0) continue;  // fixed
        double d = reduced(v);
        int cand_dir = 0;
        if (st == kAtLower && d < -opts_.dual_tol)
            cand_dir = +1;
        else if (st == kAtUpper && d > opts_.dual_tol)
            cand_dir = -1;
        else if (st == kFreeZero && std::abs(d) > opts_.dual_tol)
            cand_dir = d < 0 ? +1 : -1;
        if (cand_dir == 0) continue;
        if (bland_) {
            enter = v;
            dir = cand_dir;
            break;
        }
        if (std::abs(d) > best + 1e-15) {
            best = std::abs(d);
            enter = v;
            dir = cand_dir;
        }
    }
    if (enter < 0) return StepResult::Optimal;

    Eigen::VectorXd w = (enter < n_) ? Eigen::VectorXd(binv_ * cols_.col(enter))
                                     : Eigen::VectorXd(binv_.col(enter - n_));

    // ratio test: entering moves by dir * step; basic i moves at rate -dir*w_i
    double step = kInf;
    int leave_pos = -1;
    double leave_to = 0.0;  // bound value the leaving variable lands on
    bool leave_at_upper = false;
    for (int i = 0; i < m_; ++i) {
        double rate = -dir * w[i];
        if (std::abs(rate) <= opts_.pivot_tol) continue;
        int v = basic_[i];
        double cand = kInf;
        double to = 0.0;
        bool at_up = false;
        bool below = phase1 && x_[v] < lo_[v] - opts_.feas_tol;
        bool above = phase1 && x_[v] > up_[v] + opts_.feas_tol;
        if (rate > 0) {
            // moving up: infeasible-below blocks at its lower bound,
            // everything else at its upper bound
            if (below) {
                cand = (lo_[v] - x_[v]) / rate;
                to = lo_[v];
            } else if (!above && std::isfinite(up_[v])) {
                cand = (up_[v] - x_[v]) / rate;
                to = up_[v];
                at_up = true;
            }
        } else {
            if (above) {
                cand = (up_[v] - x_[v]) / rate;
                to = up_[v];
                at_up = true;
            } else if (!below && std::isfinite(lo_[v])) {
                cand = (lo_[v] - x_[v]) / rate;
                to = lo_[v];
            }
        }
        if (cand == kInf) continue;
        if (cand < 0) cand = 0;  // degenerate
        bool tie = std::abs(cand - step) <= 1e-12;
        bool better;
        if (!tie) {
            better = cand < step;
        } else if (bland_) {
            better = leave_pos < 0 || basic_[i] < basic_[leave_pos];
        } else {
            better = leave_pos < 0 || std::abs(w[i]) > std::abs(w[leave_pos]);
        }
        if (better) {
            step = std::min(step, cand);
            leave_pos = i;
            leave_to = to;
            leave_at_upper = at_up;
        }
    }

    // the entering variable itself may hit its opposite bound first
    double range = up_[enter] - lo_[enter];
    bool flip = false;
    if (std::isfinite(range) && range < step - 1e-12) {
        step = range;
        flip = true;
    }

    if (step == kInf) return StepResult::Unbounded;

    if (step <= 1e-11)
        ++stall_count_;
    else
        stall_count_ = 0;
    if (stall_count_ > opts_.stall_limit) bland_ = true;

    // apply the move
    if (step > 0) {
        for (int i = 0; i < m_; ++i)
            if (std::abs(w[i]) > 0) x_[basic_[i]] -= dir * step * w[i];
        x_[enter] += dir * step;
    }

    if (flip) {
        vstat_[enter] = (vstat_[enter] == kAtLower) ? kAtUpper : kAtLower;
        x_[enter] = vstat_[enter] == kAtLower ? lo_[enter] : up_[enter];
        return StepResult::Pivoted;
    }

    // basis exchange
    int leave_var = basic_[leave_pos];
    x_[leave_var] = leave_to;  // snap exactly to the blocking bound
    vstat_[leave_var] = leave_at_upper ? kAtUpper : kAtLower;
    if (lo_[leave_var] == up_[leave_var]) vstat_[leave_var] = kAtLower;
    basic_[leave_pos] = enter;
    vstat_[enter] = kBasic;

    // product-form update of the explicit inverse
    double piv = w[leave_pos];
    binv_.row(leave_pos) /= piv;
    for (int i = 0; i < m_; ++i) {
        if (i == leave_pos) continue;
        double f = w[i];
        if (f != 0.0) binv_.row(i) -= f * binv_.row(leave_pos);
    }
    ++pivots_since_refactor_;
    return StepResult::Pivoted;
}

SolveResult SimplexSolver::solve(const std::vector<double>* obj, const std::vector<double>* lower,
                                 const std::vector<double>* upper, const Basis* warm) {
    auto t0 = std::chrono::steady_clock::now();
    const bool maximize = model_.sense() == Sense::Maximize;
    const std::vector<double>& user_obj = obj ? *obj : model_.objective();
    if (int(user_obj.size()) != n_) throw ContractError("objective override size mismatch");

    c_ = Eigen::VectorXd::Zero(n_ + m_);
    for (int v = 0; v < n_; ++v) c_[v] = maximize ? -user_obj[v] : user_obj[v];

    load_bounds(lower, upper);
    install_basis(warm);
    if (!refactorize()) {
        install_basis(nullptr);
        if (!refactorize()) throw SolverError("slack basis refactorization failed");
    }
    set_nonbasic_values();
    compute_basic_values();
    bland_ = false;
    stall_count_ = 0;

    SolveResult res;
    long iters = 0;
    auto maybe_refactor = [&]() {
        if (pivots_since_refactor_ >= opts_.refactor_every) {
            if (!refactorize()) throw SolverError("basis refactorization failed");
            compute_basic_values();
        }
    };

    // phase 1: drive basic variables inside their bounds
    while (infeasibility() > opts_.feas_tol) {
        if (++iters > opts_.max_iterations) throw SolverError("simplex iteration limit (phase 1)");
        StepResult r = iterate(true);
        if (r == StepResult::Optimal) {
            if (infeasibility() > 1e-7) {
                res.status = SolveStatus::Infeasible;
                res.wall_time_sec =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                return res;
            }
            break;  // close enough to feasible
        }
        if (r == StepResult::Unbounded) throw SolverError("phase 1 reported an unbounded direction");
        maybe_refactor();
    }

    // phase 2
    while (true) {
        if (++iters > opts_.max_iterations) throw SolverError("simplex iteration limit (phase 2)");
        StepResult r = iterate(false);
        if (r == StepResult::Optimal) break;
        if (r == StepResult::Unbounded) {
            res.status = SolveStatus::Unbounded;
            res.wall_time_sec =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return res;
        }
        maybe_refactor();
        // a phase-2 step can only drift a basic value out of bounds through
        // roundoff; repair when it happens
        if (infeasibility() > 1e-7) {
            if (!refactorize()) throw SolverError("basis refactorization failed");
            compute_basic_values();
            while (infeasibility() > opts_.feas_tol) {
                if (++iters > opts_.max_iterations)
                    throw SolverError("simplex iteration limit (repair)");
                StepResult rr = iterate(true);
                if (rr != StepResult::Pivoted) break;
            }
        }
    }

    // clean recompute at the claimed optimum (skipped when the basis is
    // fresh from a factorization and no pivot has touched it since)
    if (pivots_since_refactor_ > 0) {
        if (!refactorize()) throw SolverError("basis refactorization failed at optimum");
        compute_basic_values();
    }

    res.status = SolveStatus::Optimal;
    res.x.assign(x_.data(), x_.data() + n_);
    double objval = 0.0;
    for (int v = 0; v < n_; ++v) objval += user_obj[v] * x_[v];
    res.objective = objval;
    res.best_bound = objval;

    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = c_[basic_[i]];
    Eigen::VectorXd y = binv_.transpose() * cb;
    res.row_duals.resize(m_);
    for (int r = 0; r < m_; ++r) res.row_duals[r] = maximize ? -y[r] : y[r];
    res.has_duals = true;

    last_basis_.basic = basic_;
    last_basis_.vstat = vstat_;
    res.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

SolveResult solve_lp(const LinearModel& model, SimplexOptions opts) {
    SimplexSolver s(model, opts);
    return s.solve();
}

}  // namespace gridverify
