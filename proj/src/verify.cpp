#include "gridverify/verify.hpp"

#include <chrono>
#include <iostream>

#include "gridverify/branch_bound.hpp"
#include "gridverify/mlp.hpp"

namespace gridverify {

const char* to_string(Metric m) {
    switch (m) {
        case Metric::NuG: return "nu_g";
        case Metric::NuLine: return "nu_line";
        case Metric::NuDist: return "nu_dist";
        case Metric::NuOpt: return "nu_opt";
    }
    return "?";
}

Metric metric_from_string(const std::string& s) {
    if (s == "nu_g") return Metric::NuG;
    if (s == "nu_line") return Metric::NuLine;
    if (s == "nu_dist") return Metric::NuDist;
    if (s == "nu_opt") return Metric::NuOpt;
    throw ValidationError("unknown metric: " + s);
}

namespace {

struct AffineTerm {
    std::vector<std::pair<int, double>> coefs;
    double constant = 0.0;
    std::string label;
};

double term_value(const AffineTerm& t, const std::vector<double>& x) {
    double v = t.constant;
    for (auto [var, c] : t.coefs) v += c * x[var];
    return v;
}

// interval of a term from variable bounds (for the disjunctive big-Ms)
std::pair<double, double> term_interval(const AffineTerm& t, const LinearModel& m) {
    double lo = t.constant, hi = t.constant;
    for (auto [var, c] : t.coefs) {
        double a = c * m.lower(var), b = c * m.upper(var);
        lo += std::min(a, b);
        hi += std::max(a, b);
    }
    return {lo, hi};
}

struct TermsOutcome {
    double upper = -std::numeric_limits<double>::infinity();      // proven bound on the max
    double incumbent = -std::numeric_limits<double>::infinity();  // best feasible value
    std::vector<double> x_at_best;
    std::string attained;
    long nodes = 0;
    bool all_optimal = true;
    SolveStatus worst_status = SolveStatus::Optimal;
    std::vector<SolveResult> solutions;  // per term, for audits
};

// Maximizes each affine term over the model and keeps the overall best; this
// equals the single disjunctive MILP over the same term set.
TermsOutcome solve_terms(const LinearModel& base, const std::vector<AffineTerm>& terms,
                         const VerificationOptions& opts, bool keep_solutions) {
    TermsOutcome out;
    MilpParams params;
    params.gap_tol = opts.gap_tol;
    params.time_limit_sec = opts.time_limit_sec;
    params.max_nodes = opts.max_nodes;
    for (const auto& term : terms) {
        LinearModel m = base;
        m.set_sense(Sense::Maximize);
        m.clear_objective();
        for (auto [var, c] : term.coefs) m.set_objective_coef(var, m.objective()[var] + c);
        SolveResult r = solve_milp(m, params);
        if (r.status == SolveStatus::Infeasible)
            throw SolverError("verification MILP infeasible; encoding bounds are broken");
        if (r.status == SolveStatus::Unbounded)
            throw SolverError("verification MILP unbounded; missing variable bounds");
        out.nodes += r.node_count;
        double val = r.objective + term.constant;
        double bound = r.best_bound + term.constant;
        out.upper = std::max(out.upper, bound);
        if (val > out.incumbent) {
            out.incumbent = val;
            out.x_at_best = r.x;
            out.attained = term.label;
        }
        if (r.status != SolveStatus::Optimal) {
            out.all_optimal = false;
            out.worst_status = r.status;
        }
        if (keep_solutions) out.solutions.push_back(std::move(r));
    }
    return out;
}

// One model whose maximum equals max(terms, 0), with selector binaries
// picking the attaining term.
LinearModel build_disjunctive_model(const LinearModel& base, const std::vector<AffineTerm>& terms) {
    LinearModel m = base;
    m.set_sense(Sense::Maximize);
    m.clear_objective();
    double lo_all = 0.0, hi_all = 0.0;  // the zero term participates in the max
    std::vector<std::pair<double, double>> ranges;
    for (const auto& t : terms) {
        auto [lo, hi] = term_interval(t, m);
        ranges.emplace_back(lo, hi);
        lo_all = std::min(lo_all, lo);
        hi_all = std::max(hi_all, hi);
    }
    int nu = m.add_var(lo_all, hi_all, 1.0);
    std::vector<std::pair<int, double>> pick;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        int s = m.add_binary();
        pick.emplace_back(s, 1.0);
        // nu <= term_t + big (1 - s_t)
        double big = hi_all - ranges[t].first;
        std::vector<std::pair<int, double>> row{{nu, 1.0}, {s, big}};
        for (auto [var, c] : terms[t].coefs) row.emplace_back(var, -c);
        m.add_row(std::move(row), Relation::LessEq, terms[t].constant + big);
    }
    {
        int s0 = m.add_binary();
        pick.emplace_back(s0, 1.0);
        m.add_row({{nu, 1.0}, {s0, hi_all}}, Relation::LessEq, hi_all);
    }
    m.add_row(std::move(pick), Relation::Equal, 1.0);
    return m;
}

TermsOutcome solve_terms_single(const LinearModel& base, const std::vector<AffineTerm>& terms,
                                const VerificationOptions& opts) {
    LinearModel m = build_disjunctive_model(base, terms);
    MilpParams params;
    params.gap_tol = opts.gap_tol;
    params.time_limit_sec = opts.time_limit_sec;
    params.max_nodes = opts.max_nodes;
    SolveResult r = solve_milp(m, params);
    if (r.status == SolveStatus::Infeasible || r.status == SolveStatus::Unbounded)
        throw SolverError("disjunctive verification MILP failed");
    TermsOutcome out;
    out.nodes = r.node_count;
    out.upper = r.best_bound;
    out.incumbent = r.objective;
    out.x_at_best = r.x;
    out.all_optimal = r.status == SolveStatus::Optimal;
    out.worst_status = r.status;
    double best = 0.0;
    out.attained = "zero";
    for (const auto& t : terms) {
        double v = term_value(t, r.x);
        if (v > best) {
            best = v;
            out.attained = t.label;
        }
    }
    return out;
}

double boundary_fraction_of(const LinearModel& model, const std::vector<int>& pd_vars,
                            const std::vector<double>& x) {
    if (pd_vars.empty() || x.empty()) return 0.0;
    int at = 0;
    for (int v : pd_vars) {
        double lo = model.lower(v), hi = model.upper(v);
        double tol = std::max(1e-9, 1e-6 * (hi - lo));
        if (x[std::size_t(v)] <= lo + tol || x[std::size_t(v)] >= hi - tol) ++at;
    }
    return double(at) / double(pd_vars.size());
}

Eigen::VectorXd extract_load(const std::vector<int>& pd_vars, const std::vector<double>& x) {
    Eigen::VectorXd load(long(pd_vars.size()));
    for (std::size_t i = 0; i < pd_vars.size(); ++i) load[long(i)] = x[std::size_t(pd_vars[i])];
    return load;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// clip_at_zero: the metric is a max over terms and zero
VerificationReport finalize_report(Metric metric, const NetworkEncoding& enc,
                                   const TermsOutcome& out, double scale, bool clip_at_zero,
                                   double elapsed) {
    VerificationReport rep;
    rep.metric = metric;
    double upper = out.upper, lower = out.incumbent;
    if (clip_at_zero) {
        upper = std::max(0.0, upper);
        lower = std::max(0.0, lower);
    }
    rep.raw_value = upper;
    rep.worst_case_value = upper * scale;
    rep.value_lower_bound = lower * scale;
    rep.milp_gap = std::max(0.0, upper - lower) / std::max(1.0, std::abs(lower));
    rep.status = out.all_optimal ? SolveStatus::Optimal : out.worst_status;
    rep.node_count = out.nodes;
    rep.attained = out.attained;
    if (!out.x_at_best.empty()) {
        rep.maximizer_load = extract_load(enc.pd_vars, out.x_at_best);
        rep.boundary_fraction = boundary_fraction_of(enc.model, enc.pd_vars, out.x_at_best);
    }
    rep.wall_time_sec = elapsed;
    return rep;
}

std::vector<AffineTerm> generation_terms(const NetworkEncoding& enc, const GridCase& grid) {
    std::vector<AffineTerm> terms;
    auto add_gen_terms = [&](int gen, int var) {
        const auto& g = grid.gens[std::size_t(gen)];
        terms.push_back({{{var, 1.0}}, -g.p_max_mw, "gen " + std::to_string(gen) + " over"});
        terms.push_back({{{var, -1.0}}, g.p_min_mw, "gen " + std::to_string(gen) + " under"});
    };
    for (std::size_t o = 0; o < enc.output_gens.size(); ++o)
        add_gen_terms(enc.output_gens[o], enc.output_vars[o]);
    add_gen_terms(enc.slack_gen, enc.slack_var);
    return terms;
}

std::vector<AffineTerm> line_terms(const NetworkEncoding& enc, const GridCase& grid,
                                   const AdmittanceSet& adm) {
    const auto& nsb = adm.non_slack_buses;
    // injections at non-slack buses as affine expressions over the encoding;
    // the slack generator sits at the slack bus and drops out
    std::vector<std::vector<std::pair<int, double>>> inj(nsb.size());
    for (std::size_t b = 0; b < nsb.size(); ++b) {
        for (std::size_t o = 0; o < enc.output_gens.size(); ++o)
            if (grid.gens[std::size_t(enc.output_gens[o])].bus == nsb[b])
                inj[b].emplace_back(enc.output_vars[o], 1.0);
        for (int d = 0; d < grid.n_loads(); ++d)
            if (grid.loads[std::size_t(d)].bus == nsb[b])
                inj[b].emplace_back(enc.pd_vars[std::size_t(d)], -1.0);
    }
    std::vector<AffineTerm> terms;
    for (int l = 0; l < grid.n_lines(); ++l) {
        for (int sign : {+1, -1}) {
            AffineTerm t;
            t.constant = -grid.lines[std::size_t(l)].flow_limit_mw;
            std::vector<double> acc(std::size_t(enc.model.n_vars()), 0.0);
            for (std::size_t b = 0; b < nsb.size(); ++b) {
                double w = sign * adm.ptdf(l, int(b));
                if (w == 0.0) continue;
                for (auto [var, c] : inj[b]) acc[std::size_t(var)] += w * c;
            }
            for (int v = 0; v < enc.model.n_vars(); ++v)
                if (acc[std::size_t(v)] != 0.0) t.coefs.emplace_back(v, acc[std::size_t(v)]);
            t.label = "line " + std::to_string(l) + (sign > 0 ? " +" : " -");
            terms.push_back(std::move(t));
        }
    }
    return terms;
}

}  // namespace

VerificationReport worst_case_generation(const NetworkEncoding& enc, const GridCase& grid,
                                         const VerificationOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<AffineTerm> terms = generation_terms(enc, grid);
    TermsOutcome out = opts.single_milp ? solve_terms_single(enc.model, terms, opts)
                                        : solve_terms(enc.model, terms, opts, false);
    return finalize_report(Metric::NuG, enc, out, 1.0, true, seconds_since(t0));
}

VerificationReport worst_case_line(const NetworkEncoding& enc, const GridCase& grid,
                                   const AdmittanceSet& adm, const VerificationOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<AffineTerm> terms = line_terms(enc, grid, adm);
    if (terms.empty()) {
        VerificationReport rep;
        rep.metric = Metric::NuLine;
        rep.wall_time_sec = seconds_since(t0);
        return rep;
    }
    TermsOutcome out = opts.single_milp ? solve_terms_single(enc.model, terms, opts)
                                        : solve_terms(enc.model, terms, opts, false);
    return finalize_report(Metric::NuLine, enc, out, 1.0, true, seconds_since(t0));
}

KktEmbedding append_kkt_block(LinearModel& m, const GridCase& grid, const AdmittanceSet& adm,
                              const std::vector<int>& pd_vars, double big_m) {
    const double base = grid.base_mva;
    const int nb = grid.n_buses;
    const int ng = grid.n_gens();
    const int nl = grid.n_lines();
    const double M = big_m;
    KktEmbedding k;
    k.big_m = M;
    k.non_slack_buses = grid.non_slack_buses();

    k.pg_offset = m.n_vars();
    for (int g = 0; g < ng; ++g)
        m.add_var(grid.gens[g].p_min_mw / base, grid.gens[g].p_max_mw / base);
    k.theta_offset = m.n_vars();
    std::vector<int> theta_var(nb, -1);
    for (int b : k.non_slack_buses) theta_var[b] = m.add_var(-LinearModel::kInf, LinearModel::kInf);
    k.lambda_offset = m.n_vars();
    for (int b = 0; b < nb; ++b) m.add_var(-LinearModel::kInf, LinearModel::kInf);
    k.mu_line_min_offset = m.n_vars();
    for (int l = 0; l < nl; ++l) m.add_var(0.0, M);
    k.mu_line_max_offset = m.n_vars();
    for (int l = 0; l < nl; ++l) m.add_var(0.0, M);
    k.mu_gen_min_offset = m.n_vars();
    for (int g = 0; g < ng; ++g) m.add_var(0.0, M);
    k.mu_gen_max_offset = m.n_vars();
    for (int g = 0; g < ng; ++g) m.add_var(0.0, M);

    // nodal balance: sum_g pg - Bbus theta = load / base
    for (int b = 0; b < nb; ++b) {
        std::vector<std::pair<int, double>> row;
        for (int g = 0; g < ng; ++g)
            if (grid.gens[g].bus == b) row.emplace_back(k.pg_offset + g, 1.0);
        for (int b2 : k.non_slack_buses)
            if (adm.b_bus(b, b2) != 0.0) row.emplace_back(theta_var[b2], -adm.b_bus(b, b2));
        for (int d = 0; d < grid.n_loads(); ++d)
            if (grid.loads[d].bus == b) row.emplace_back(pd_vars[std::size_t(d)], -1.0 / base);
        m.add_row(std::move(row), Relation::Equal, 0.0);
    }

    // line flow limits
    std::vector<std::vector<std::pair<int, double>>> flow_expr(static_cast<std::size_t>(nl));
    for (int l = 0; l < nl; ++l)
        for (int b : k.non_slack_buses)
            if (adm.b_line(l, b) != 0.0)
                flow_expr[std::size_t(l)].emplace_back(theta_var[b], adm.b_line(l, b));
    for (int l = 0; l < nl; ++l) {
        double lim = grid.lines[l].flow_limit_mw / base;
        m.add_row(flow_expr[std::size_t(l)], Relation::LessEq, lim);
        m.add_row(flow_expr[std::size_t(l)], Relation::GreaterEq, -lim);
    }

    // stationarity wrt dispatch: -mu_gmin + mu_gmax + lambda_bus = -c
    for (int g = 0; g < ng; ++g)
        m.add_row({{k.mu_gen_min_offset + g, -1.0},
                   {k.mu_gen_max_offset + g, 1.0},
                   {k.lambda_offset + grid.gens[g].bus, 1.0}},
                  Relation::Equal, -grid.gens[g].cost);

    // stationarity wrt angles: Bline'(mu_max - mu_min) - Bbus lambda = 0
    for (int b = 0; b < nb; ++b) {
        std::vector<std::pair<int, double>> row;
        for (int l = 0; l < nl; ++l) {
            double w = adm.b_line(l, b);
            if (w == 0.0) continue;
            row.emplace_back(k.mu_line_max_offset + l, w);
            row.emplace_back(k.mu_line_min_offset + l, -w);
        }
        for (int b2 = 0; b2 < nb; ++b2)
            if (adm.b_bus(b, b2) != 0.0) row.emplace_back(k.lambda_offset + b2, -adm.b_bus(b, b2));
        m.add_row(std::move(row), Relation::Equal, 0.0);
    }

    // Fortuny-Amat pairs: constraint slack >= -rM and mu <= (1-r)M. These
    // binaries drive the relaxation looseness, so they branch first.
    auto add_pair = [&](std::vector<std::pair<int, double>> primal_terms, double primal_rhs,
                        int mu_var, const std::string& label) {
        int r = m.add_binary();
        m.set_branch_priority(r, 1);
        primal_terms.emplace_back(r, M);
        int prow = m.add_row(std::move(primal_terms), Relation::GreaterEq, primal_rhs, M);
        int drow = m.add_row({{mu_var, 1.0}, {r, M}}, Relation::LessEq, M, M);
        k.fa_pairs.push_back({prow, drow, r, label});
    };
    for (int l = 0; l < nl; ++l) {
        double lim = grid.lines[l].flow_limit_mw / base;
        // p_min - flow >= -rM  <=>  -flow + rM >= lim  (p_min = -lim)
        std::vector<std::pair<int, double>> neg;
        for (auto [v, c] : flow_expr[std::size_t(l)]) neg.emplace_back(v, -c);
        add_pair(std::move(neg), lim, k.mu_line_min_offset + l, "line_min " + std::to_string(l));
        // flow - lim >= -rM  <=>  flow + rM >= lim
        add_pair(flow_expr[std::size_t(l)], lim, k.mu_line_max_offset + l,
                 "line_max " + std::to_string(l));
    }
    for (int g = 0; g < ng; ++g) {
        add_pair({{k.pg_offset + g, -1.0}}, -grid.gens[g].p_min_mw / base,
                 k.mu_gen_min_offset + g, "gen_min " + std::to_string(g));
        add_pair({{k.pg_offset + g, 1.0}}, grid.gens[g].p_max_mw / base, k.mu_gen_max_offset + g,
                 "gen_max " + std::to_string(g));
    }
    return k;
}

BigMAudit audit_big_m(const SolveResult& sol, const LinearModel& model, const KktEmbedding& kkt) {
    BigMAudit a;
    a.n_rows = int(kkt.fa_pairs.size()) * 2;
    for (const auto& pair : kkt.fa_pairs) {
        double r = sol.x[std::size_t(pair.r_var)];
        double slack;
        std::string side;
        if (r > 0.5) {
            // the primal row is M-relaxed; it must not be binding
            slack = model.row_activity(pair.primal_row, sol.x) - model.row(pair.primal_row).rhs;
            side = " (primal)";
        } else {
            // the dual cap mu <= M is the engaged side
            slack = model.row(pair.dual_row).rhs - model.row_activity(pair.dual_row, sol.x);
            side = " (dual)";
        }
        if (slack < a.min_slack) {
            a.min_slack = slack;
            a.worst_row = pair.label + side;
        }
    }
    a.pass = kkt.fa_pairs.empty() || a.min_slack > 1e-6;
    return a;
}

namespace {

struct KktModel {
    LinearModel model;
    KktEmbedding kkt;
};

KktModel build_kkt_model(const NetworkEncoding& enc, const GridCase& grid,
                         const AdmittanceSet& adm, double big_m) {
    KktModel km;
    km.model = enc.model;
    km.kkt = append_kkt_block(km.model, grid, adm, enc.pd_vars, big_m);
    return km;
}

std::vector<AffineTerm> distance_terms(const NetworkEncoding& enc, const GridCase& grid,
                                       const KktEmbedding& kkt) {
    std::vector<AffineTerm> terms;
    auto add = [&](int gen, int pvar) {
        double range = grid.gens[std::size_t(gen)].p_max_mw - grid.gens[std::size_t(gen)].p_min_mw;
        if (range <= 0.0) {
            std::cerr << "warning: generator " << gen
                      << " has a degenerate range; excluded from nu_dist\n";
            return;
        }
        for (int sign : {+1, -1}) {
            AffineTerm t;
            t.coefs.emplace_back(pvar, sign / range);
            t.coefs.emplace_back(kkt.pg_offset + gen, -sign * grid.base_mva / range);
            t.label = "gen " + std::to_string(gen) + (sign > 0 ? " +" : " -");
            terms.push_back(std::move(t));
        }
    };
    for (std::size_t o = 0; o < enc.output_gens.size(); ++o)
        add(enc.output_gens[o], enc.output_vars[o]);
    add(enc.slack_gen, enc.slack_var);
    return terms;
}

std::vector<AffineTerm> suboptimality_terms(const NetworkEncoding& enc, const GridCase& grid,
                                            const KktEmbedding& kkt) {
    AffineTerm t;
    for (std::size_t o = 0; o < enc.output_gens.size(); ++o)
        t.coefs.emplace_back(enc.output_vars[o], grid.gens[std::size_t(enc.output_gens[o])].cost);
    t.coefs.emplace_back(enc.slack_var, grid.gens[std::size_t(enc.slack_gen)].cost);
    for (int g = 0; g < grid.n_gens(); ++g)
        t.coefs.emplace_back(kkt.pg_offset + g, -grid.gens[std::size_t(g)].cost * grid.base_mva);
    t.label = "cost gap";
    return {t};
}

// the bilevel metrics share the audit-and-retry policy around their solves
VerificationReport bilevel_metric(Metric metric, const NetworkEncoding& enc, const GridCase& grid,
                                  const AdmittanceSet& adm, double scale,
                                  const VerificationOptions& opts) {
    auto t0 = std::chrono::steady_clock::now();
    double M = opts.big_m;
    for (int attempt = 0;; ++attempt) {
        KktModel km = build_kkt_model(enc, grid, adm, M);
        std::vector<AffineTerm> terms = metric == Metric::NuDist
                                            ? distance_terms(enc, grid, km.kkt)
                                            : suboptimality_terms(enc, grid, km.kkt);
        if (terms.empty()) throw ValidationError("no admissible generators for the metric");
        TermsOutcome out = solve_terms(km.model, terms, opts, true);

        BigMAudit worst_audit;
        worst_audit.n_rows = int(km.kkt.fa_pairs.size()) * 2;
        for (const auto& sol : out.solutions) {
            BigMAudit a = audit_big_m(sol, km.model, km.kkt);
            if (a.min_slack < worst_audit.min_slack) worst_audit = a;
        }
        if (!worst_audit.pass && attempt == 0) {
            std::cerr << "warning: big-M audit failed (" << worst_audit.worst_row << ", slack "
                      << worst_audit.min_slack << "); retrying with M*10\n";
            M *= 10.0;
            continue;
        }
        VerificationReport rep = finalize_report(metric, enc, out, scale,
                                                 metric == Metric::NuDist, seconds_since(t0));
        rep.audit = worst_audit;
        rep.audit_retried = attempt > 0;
        rep.big_m_used = M;
        return rep;
    }
}

}  // namespace

VerificationReport worst_case_distance(const NetworkEncoding& enc, const GridCase& grid,
                                       const AdmittanceSet& adm, const VerificationOptions& opts) {
    return bilevel_metric(Metric::NuDist, enc, grid, adm, 100.0, opts);  // percent
}

VerificationReport worst_case_suboptimality(const NetworkEncoding& enc, const GridCase& grid,
                                            const AdmittanceSet& adm, double cost_100pct,
                                            const VerificationOptions& opts) {
    if (cost_100pct <= 0.0) throw ContractError("normalization cost must be positive");
    return bilevel_metric(Metric::NuOpt, enc, grid, adm, 100.0 / cost_100pct, opts);
}

LinearModel assemble_metric_milp(const NetworkEncoding& enc, const GridCase& grid,
                                 const AdmittanceSet& adm, Metric metric, double big_m) {
    switch (metric) {
        case Metric::NuG:
            return build_disjunctive_model(enc.model, generation_terms(enc, grid));
        case Metric::NuLine:
            return build_disjunctive_model(enc.model, line_terms(enc, grid, adm));
        case Metric::NuDist: {
            KktModel km = build_kkt_model(enc, grid, adm, big_m);
            return build_disjunctive_model(km.model, distance_terms(enc, grid, km.kkt));
        }
        case Metric::NuOpt: {
            KktModel km = build_kkt_model(enc, grid, adm, big_m);
            std::vector<AffineTerm> terms = suboptimality_terms(enc, grid, km.kkt);
            LinearModel m = km.model;
            m.set_sense(Sense::Maximize);
            m.clear_objective();
            for (auto [var, c] : terms.front().coefs)
                m.set_objective_coef(var, m.objective()[std::size_t(var)] + c);
            return m;
        }
    }
    throw ContractError("unknown metric");
}

// ---------------------------------------------------------------------------
// pointwise evaluations

double pointwise_nu_g(const MlpNetwork& net, const GridCase& grid, const Eigen::VectorXd& load_mw) {
    Eigen::VectorXd p_hat = complete_dispatch(grid, net.forward(load_mw), load_mw);
    double v = 0.0;
    for (int g = 0; g < grid.n_gens(); ++g) {
        v = std::max(v, p_hat[g] - grid.gens[std::size_t(g)].p_max_mw);
        v = std::max(v, grid.gens[std::size_t(g)].p_min_mw - p_hat[g]);
    }
    return v;
}

double pointwise_nu_line(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                         const Eigen::VectorXd& load_mw) {
    if (grid.n_lines() == 0) return 0.0;
    Eigen::VectorXd p_hat = complete_dispatch(grid, net.forward(load_mw), load_mw);
    Eigen::VectorXd inj_full = nodal_injections_mw(grid, p_hat, load_mw);
    Eigen::VectorXd inj(long(adm.non_slack_buses.size()));
    for (std::size_t b = 0; b < adm.non_slack_buses.size(); ++b)
        inj[long(b)] = inj_full[adm.non_slack_buses[b]];
    Eigen::VectorXd flows = line_flows(adm, inj);
    double v = 0.0;
    for (int l = 0; l < grid.n_lines(); ++l)
        v = std::max(v, std::abs(flows[l]) - grid.lines[std::size_t(l)].flow_limit_mw);
    return v;
}

double pointwise_nu_dist(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                         const Eigen::VectorXd& load_mw) {
    Eigen::VectorXd p_hat = complete_dispatch(grid, net.forward(load_mw), load_mw);
    DcOpfSolution sol = solve_dcopf(grid, adm, load_mw);
    double v = 0.0;
    for (int g = 0; g < grid.n_gens(); ++g) {
        double range = grid.gens[std::size_t(g)].p_max_mw - grid.gens[std::size_t(g)].p_min_mw;
        if (range <= 0.0) continue;
        v = std::max(v, std::abs(p_hat[g] - sol.p_g_mw[g]) / range);
    }
    return v;
}

double pointwise_nu_opt(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                        const Eigen::VectorXd& load_mw) {
    Eigen::VectorXd p_hat = complete_dispatch(grid, net.forward(load_mw), load_mw);
    DcOpfSolution sol = solve_dcopf(grid, adm, load_mw);
    return grid.cost_vector().dot(p_hat) - sol.objective_cost;
}

// ---------------------------------------------------------------------------

VerificationReport run_metric(Metric metric, const MlpNetwork& net, const NetworkEncoding& enc,
                              const GridCase& grid, const AdmittanceSet& adm, double cost_100pct,
                              const VerificationOptions& opts) {
    VerificationReport rep;
    switch (metric) {
        case Metric::NuG: rep = worst_case_generation(enc, grid, opts); break;
        case Metric::NuLine: rep = worst_case_line(enc, grid, adm, opts); break;
        case Metric::NuDist: rep = worst_case_distance(enc, grid, adm, opts); break;
        case Metric::NuOpt: rep = worst_case_suboptimality(enc, grid, adm, cost_100pct, opts); break;
    }
    if (rep.maximizer_load.size() > 0) {
        switch (metric) {
            case Metric::NuG:
                rep.recheck_value = pointwise_nu_g(net, grid, rep.maximizer_load);
                break;
            case Metric::NuLine:
                rep.recheck_value = pointwise_nu_line(net, grid, adm, rep.maximizer_load);
                break;
            case Metric::NuDist:
                rep.recheck_value = 100.0 * pointwise_nu_dist(net, grid, adm, rep.maximizer_load);
                break;
            case Metric::NuOpt:
                rep.recheck_value =
                    100.0 * pointwise_nu_opt(net, grid, adm, rep.maximizer_load) / cost_100pct;
                break;
        }
    }
    return rep;
}

std::vector<SweepEntry> domain_reduction_sweep(const MlpNetwork& net, const GridCase& grid,
                                               const AdmittanceSet& adm,
                                               const InputDomain& base_domain,
                                               const std::vector<double>& deltas,
                                               const BoundPipelineOptions& pipeline,
                                               const LabeledDataset* dataset,
                                               const VerificationOptions& opts) {
    if (deltas.empty()) throw ValidationError("delta list must not be empty");
    double cost100 = solve_dcopf(grid, adm, grid.nominal_loads_mw()).objective_cost;

    std::vector<SweepEntry> entries;
    for (double delta : deltas) {
        InputDomain domain = base_domain.reduced(delta);
        NeuronBounds bounds = prepare_bounds(net, grid, domain, pipeline, dataset);
        NetworkEncoding enc = encode_network(net, grid, domain, bounds);
        SweepEntry e;
        e.delta = delta;
        const Metric metrics[4] = {Metric::NuG, Metric::NuLine, Metric::NuDist, Metric::NuOpt};
        for (int i = 0; i < 4; ++i)
            e.reports[std::size_t(i)] = run_metric(metrics[i], net, enc, grid, adm, cost100, opts);
        entries.push_back(std::move(e));
    }

    // normalize against the smallest-delta (widest) domain
    std::size_t base_idx = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
        if (entries[i].delta < entries[base_idx].delta) base_idx = i;
    for (auto& e : entries)
        for (std::size_t i = 0; i < 4; ++i) {
            double v0 = entries[base_idx].reports[i].worst_case_value;
            double v = e.reports[i].worst_case_value;
            e.normalized_pct[i] = std::abs(v0) > 1e-12 ? 100.0 * v / v0 : 0.0;
        }
    return entries;
}

}  // namespace gridverify
