#pragma once

#include <array>

#include "gridverify/dcopf.hpp"
#include "gridverify/encode.hpp"

namespace gridverify {

enum class Metric { NuG, NuLine, NuDist, NuOpt };
const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

struct VerificationOptions {
    double gap_tol = 0.0;
    double time_limit_sec = std::numeric_limits<double>::infinity();
    long max_nodes = std::numeric_limits<long>::max();
    double big_m = 1e5;       // Fortuny-Amat constant
    bool single_milp = false; // disjunctive one-shot mode instead of per-term solves
};

struct BigMAudit {
    bool pass = true;
    double min_slack = std::numeric_limits<double>::infinity();
    std::string worst_row;
    int n_rows = 0;
};

struct VerificationReport {
    Metric metric = Metric::NuG;
    // the guarantee: MW for NuG/NuLine, percent for NuDist/NuOpt
    double worst_case_value = 0.0;
    // incumbent value; equals worst_case_value at zero gap
    double value_lower_bound = 0.0;
    double raw_value = 0.0;  // fraction for NuDist, $/h for NuOpt
    Eigen::VectorXd maximizer_load;
    double milp_gap = 0.0;
    SolveStatus status = SolveStatus::Optimal;
    long node_count = 0;
    double wall_time_sec = 0.0;
    std::string attained;  // generator/line and side attaining the maximum
    double empirical_lower_bound = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    // observational: fraction of loads sitting on a box bound at the maximizer
    double boundary_fraction = 0.0;
    // plain re-evaluation of the metric at the maximizer (consistency check)
    double recheck_value = std::numeric_limits<double>::quiet_NaN();
    BigMAudit audit;
    bool audit_retried = false;
    double big_m_used = 0.0;
};

// KKT block of the inner DC-OPF embedded into a verification MILP (per-unit),
// with the registry needed to audit the Fortuny-Amat rows.
struct KktEmbedding {
    int pg_offset = -1;      // n_gens vars, p.u.
    int theta_offset = -1;   // one var per non-slack bus
    int lambda_offset = -1;  // n_buses
    int mu_line_min_offset = -1, mu_line_max_offset = -1;
    int mu_gen_min_offset = -1, mu_gen_max_offset = -1;
    std::vector<int> non_slack_buses;
    struct FaPair {
        int primal_row = -1;  // g(x) >= -rM
        int dual_row = -1;    // mu <= (1-r)M
        int r_var = -1;
        std::string label;
    };
    std::vector<FaPair> fa_pairs;
    double big_m = 0.0;
};

// Appends primal DC-OPF feasibility, stationarity, dual bounds and the
// Fortuny-Amat complementarity rows; pd_vars are the MW load variables of the
// network encoding.
KktEmbedding append_kkt_block(LinearModel& m, const GridCase& grid, const AdmittanceSet& adm,
                              const std::vector<int>& pd_vars, double big_m);

// Non-bindingness audit of the big-M rows at a solution: for each pair, the
// side the binary relaxes must have slack; binding within 1e-6 fails.
BigMAudit audit_big_m(const SolveResult& sol, const LinearModel& model, const KktEmbedding& kkt);

VerificationReport worst_case_generation(const NetworkEncoding& enc, const GridCase& grid,
                                         const VerificationOptions& opts = {});
VerificationReport worst_case_line(const NetworkEncoding& enc, const GridCase& grid,
                                   const AdmittanceSet& adm,
                                   const VerificationOptions& opts = {});
VerificationReport worst_case_distance(const NetworkEncoding& enc, const GridCase& grid,
                                       const AdmittanceSet& adm,
                                       const VerificationOptions& opts = {});
VerificationReport worst_case_suboptimality(const NetworkEncoding& enc, const GridCase& grid,
                                            const AdmittanceSet& adm, double cost_100pct,
                                            const VerificationOptions& opts = {});

// Pointwise metric evaluations (used for rechecks and grid searches).
double pointwise_nu_g(const MlpNetwork& net, const GridCase& grid, const Eigen::VectorXd& load_mw);
double pointwise_nu_line(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                         const Eigen::VectorXd& load_mw);
double pointwise_nu_dist(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                         const Eigen::VectorXd& load_mw);  // fraction
double pointwise_nu_opt(const MlpNetwork& net, const GridCase& grid, const AdmittanceSet& adm,
                        const Eigen::VectorXd& load_mw);  // $/h

struct SweepEntry {
    double delta = 0.0;
    std::array<VerificationReport, 4> reports;      // NuG, NuLine, NuDist, NuOpt
    std::array<double, 4> normalized_pct{};         // vs the delta = 0 entry
};

// Rebuilds bounds and encodings per delta on the same trained network and
// solves all four metrics; values are normalized against delta = 0.
std::vector<SweepEntry> domain_reduction_sweep(const MlpNetwork& net, const GridCase& grid,
                                               const AdmittanceSet& adm,
                                               const InputDomain& base_domain,
                                               const std::vector<double>& deltas,
                                               const BoundPipelineOptions& pipeline,
                                               const LabeledDataset* dataset,
                                               const VerificationOptions& opts = {});

// Full verification pass over the encoding plus recheck fields; net is needed
// for the forward-pass consistency check.
VerificationReport run_metric(Metric metric, const MlpNetwork& net, const NetworkEncoding& enc,
                              const GridCase& grid, const AdmittanceSet& adm, double cost_100pct,
                              const VerificationOptions& opts);

// Self-contained MILP whose maximum equals the metric's worst case (raw
// units; NuDist as a fraction, NuOpt unnormalized). Used by the LP-format
// export for external cross-checking.
LinearModel assemble_metric_milp(const NetworkEncoding& enc, const GridCase& grid,
                                 const AdmittanceSet& adm, Metric metric, double big_m = 1e5);

}  // namespace gridverify
