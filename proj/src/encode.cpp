#include "gridverify/encode.hpp"

#include <filesystem>

#include "gridverify/branch_bound.hpp"
#include "gridverify/simplex.hpp"
#include "json.hpp"

namespace gridverify {

using json = nlohmann::json;

const char* to_string(StabilityMode m) {
    switch (m) {
        case StabilityMode::Off: return "off";
        case StabilityMode::Certified: return "certified";
        case StabilityMode::Dataset: return "dataset";
    }
    return "?";
}

StabilityMode stability_mode_from_string(const std::string& s) {
    if (s == "off") return StabilityMode::Off;
    if (s == "certified") return StabilityMode::Certified;
    if (s == "dataset") return StabilityMode::Dataset;
    throw ValidationError("unknown stability mode: " + s);
}

bool NeuronBounds::certified() const {
    for (const auto& layer : layers)
        for (const auto& nb : layer)
            if (nb.dataset_based && nb.stab != Stability::Free) return false;
    return true;
}

int NeuronBounds::count(Stability s) const {
    int n = 0;
    for (const auto& layer : layers)
        for (const auto& nb : layer) n += nb.stab == s ? 1 : 0;
    return n;
}

namespace {

// post-activation interval of a neuron under its stability semantics
std::pair<double, double> post_interval(const NeuronBound& nb) {
    switch (nb.stab) {
        case Stability::AlwaysInactive: return {0.0, 0.0};
        case Stability::AlwaysActive: return {nb.lo, nb.hi};  // identity map
        case Stability::Free: break;
    }
    return {std::max(0.0, nb.lo), std::max(0.0, nb.hi)};
}

void mark_certified_stability(NeuronBound& nb) {
    if (nb.stab != Stability::Free) return;
    if (nb.lo >= 0.0) {
        nb.stab = Stability::AlwaysActive;
        nb.dataset_based = false;
    } else if (nb.hi <= 0.0) {
        nb.stab = Stability::AlwaysInactive;
        nb.dataset_based = false;
    }
}

// pre-activation interval from the previous layer's post-activation interval
void propagate_layer(const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& in_lo, const Eigen::VectorXd& in_hi,
                     Eigen::VectorXd& out_lo, Eigen::VectorXd& out_hi) {
    Eigen::MatrixXd wp = w.cwiseMax(0.0);
    Eigen::MatrixXd wn = w.cwiseMin(0.0);
    out_lo = b + wp * in_lo + wn * in_hi;
    out_hi = b + wp * in_hi + wn * in_lo;
}

void post_intervals(const std::vector<NeuronBound>& layer, Eigen::VectorXd& lo,
                    Eigen::VectorXd& hi) {
    lo.resize(long(layer.size()));
    hi.resize(long(layer.size()));
    for (std::size_t i = 0; i < layer.size(); ++i) {
        auto [plo, phi] = post_interval(layer[i]);
        lo[long(i)] = plo;
        hi[long(i)] = phi;
    }
}

}  // namespace

NeuronBounds interval_bounds(const MlpNetwork& net, const GridCase& grid,
                             const InputDomain& domain) {
    net.validate();
    domain.validate(grid);
    NeuronBounds bounds;
    Eigen::VectorXd in_lo = domain.lower_mw(grid);
    Eigen::VectorXd in_hi = domain.upper_mw(grid);
    const int hidden = net.n_hidden_layers();
    for (int k = 0; k < hidden; ++k) {
        auto [w, b] = net.folded_layer(k);
        Eigen::VectorXd lo, hi;
        propagate_layer(w, b, in_lo, in_hi, lo, hi);
        std::vector<NeuronBound> layer(std::size_t(lo.size()));
        for (int i = 0; i < lo.size(); ++i) {
            NeuronBound& nb = layer[std::size_t(i)];
            nb.lo = lo[i];
            nb.hi = hi[i];
            nb.prov = BoundProvenance::Interval;
            mark_certified_stability(nb);
        }
        post_intervals(layer, in_lo, in_hi);
        bounds.layers.push_back(std::move(layer));
    }
    return bounds;
}

namespace {

// appends input vars and the network block for hidden layers [0, n_layers)
struct BlockVars {
    std::vector<int> pd;
    std::vector<std::vector<int>> zhat, z, bin;
    int free_neurons = 0;
};

BlockVars append_network_block(LinearModel& m, const MlpNetwork& net, const GridCase& grid,
                               const InputDomain& domain, const NeuronBounds& bounds,
                               int n_layers) {
    BlockVars v;
    Eigen::VectorXd lo_mw = domain.lower_mw(grid);
    Eigen::VectorXd hi_mw = domain.upper_mw(grid);
    for (int d = 0; d < net.n_inputs(); ++d) v.pd.push_back(m.add_var(lo_mw[d], hi_mw[d]));
    for (int r = 0; r < domain.poly_a.rows(); ++r) {
        std::vector<std::pair<int, double>> terms;
        for (int d = 0; d < net.n_inputs(); ++d)
            if (domain.poly_a(r, d) != 0.0) terms.emplace_back(v.pd[d], domain.poly_a(r, d));
        m.add_row(std::move(terms), Relation::LessEq, domain.poly_b[r]);
    }

    std::vector<int> prev = v.pd;
    for (int k = 0; k < n_layers; ++k) {
        auto [w, b] = net.folded_layer(k);
        const auto& layer_bounds = bounds.layers.at(std::size_t(k));
        std::vector<int> zhat(std::size_t(w.rows())), z(std::size_t(w.rows()));
        std::vector<int> bin(std::size_t(w.rows()), -1);
        for (int i = 0; i < w.rows(); ++i) {
            const NeuronBound& nb = layer_bounds.at(std::size_t(i));
            zhat[std::size_t(i)] = m.add_var(nb.lo, nb.hi);
            std::vector<std::pair<int, double>> row{{zhat[std::size_t(i)], 1.0}};
            for (int j = 0; j < w.cols(); ++j)
                if (w(i, j) != 0.0) row.emplace_back(prev[std::size_t(j)], -w(i, j));
            m.add_row(std::move(row), Relation::Equal, b[i]);

            auto [plo, phi] = post_interval(nb);
            switch (nb.stab) {
                case Stability::AlwaysInactive:
                    z[std::size_t(i)] = m.add_var(0.0, 0.0);
                    break;
                case Stability::AlwaysActive:
                    z[std::size_t(i)] = m.add_var(plo, phi);
                    m.add_row({{z[std::size_t(i)], 1.0}, {zhat[std::size_t(i)], -1.0}},
                              Relation::Equal, 0.0);
                    break;
                case Stability::Free: {
                    z[std::size_t(i)] = m.add_var(plo, phi);
                    int bv = m.add_binary();
                    bin[std::size_t(i)] = bv;
                    ++v.free_neurons;
                    // z <= zhat - lo (1 - b)
                    m.add_row({{z[std::size_t(i)], 1.0},
                               {zhat[std::size_t(i)], -1.0},
                               {bv, -nb.lo}},
                              Relation::LessEq, -nb.lo);
                    // z >= zhat
                    m.add_row({{z[std::size_t(i)], 1.0}, {zhat[std::size_t(i)], -1.0}},
                              Relation::GreaterEq, 0.0);
                    // z <= hi b
                    m.add_row({{z[std::size_t(i)], 1.0}, {bv, -nb.hi}}, Relation::LessEq, 0.0);
                    break;
                }
            }
        }
        v.zhat.push_back(std::move(zhat));
        v.z.push_back(std::move(z));
        v.bin.push_back(std::move(bin));
        prev = v.z.back();
    }
    return v;
}

}  // namespace

void tighten_bounds(const MlpNetwork& net, const GridCase& grid, const InputDomain& domain,
                    NeuronBounds& bounds, BoundProvenance stage, const TightenOptions& opts) {
    if (stage == BoundProvenance::Interval)
        throw ContractError("tighten_bounds expects the LpRelax or Milp stage");
    if (bounds.n_hidden_layers() != net.n_hidden_layers())
        throw ContractError("bounds do not match the network");
    const double pad = 1e-9;  // keeps shrunken bounds sound under roundoff

    for (int k = 0; k < net.n_hidden_layers(); ++k) {
        // layer-1 pre-activations are affine in box inputs: interval bounds
        // are already exact there
        if (k == 0) continue;
        LinearModel m;
        BlockVars v = append_network_block(m, net, grid, domain, bounds, k);
        auto [w, b] = net.folded_layer(k);
        const std::vector<int> prev = v.z.back();

        SimplexSolver lp_solver(m);
        bool have_warm = false;
        SimplexSolver::Basis warm;
        for (int i = 0; i < w.rows(); ++i) {
            NeuronBound& nb = bounds.layers[std::size_t(k)][std::size_t(i)];
            double hi_proven, lo_proven;
            if (stage == BoundProvenance::LpRelax) {
                std::vector<double> obj(std::size_t(m.n_vars()), 0.0);
                for (int j = 0; j < w.cols(); ++j) obj[std::size_t(prev[std::size_t(j)])] = w(i, j);
                m.set_sense(Sense::Maximize);
                SolveResult up = lp_solver.solve(&obj, nullptr, nullptr, have_warm ? &warm : nullptr);
                if (up.status != SolveStatus::Optimal)
                    throw SolverError("bound tightening LP did not solve");
                warm = lp_solver.last_basis();
                have_warm = true;
                hi_proven = up.objective + b[i];
                m.set_sense(Sense::Minimize);
                SolveResult dn = lp_solver.solve(&obj, nullptr, nullptr, &warm);
                if (dn.status != SolveStatus::Optimal)
                    throw SolverError("bound tightening LP did not solve");
                warm = lp_solver.last_basis();
                lo_proven = dn.objective + b[i];
            } else {
                LinearModel mm = m;
                std::vector<std::pair<int, double>> terms;
                int t = mm.add_var(-LinearModel::kInf, LinearModel::kInf, 1.0);
                terms.emplace_back(t, 1.0);
                for (int j = 0; j < w.cols(); ++j)
                    if (w(i, j) != 0.0) terms.emplace_back(prev[std::size_t(j)], -w(i, j));
                mm.add_row(std::move(terms), Relation::Equal, b[i]);
                MilpParams params;
                params.max_nodes = opts.milp_node_cap;
                mm.set_sense(Sense::Maximize);
                SolveResult up = solve_milp(mm, params);
                if (up.status == SolveStatus::Infeasible || up.status == SolveStatus::Unbounded)
                    throw SolverError("bound tightening MILP failed");
                hi_proven = up.best_bound;  // valid even when the node cap hit
                mm.set_sense(Sense::Minimize);
                SolveResult dn = solve_milp(mm, params);
                if (dn.status == SolveStatus::Infeasible || dn.status == SolveStatus::Unbounded)
                    throw SolverError("bound tightening MILP failed");
                lo_proven = dn.best_bound;
            }

            double new_hi = std::min(nb.hi, hi_proven + pad);
            double new_lo = std::max(nb.lo, lo_proven - pad);
            if (new_lo > new_hi) {
                if (new_lo - new_hi > 1e-6)
                    throw SolverError("bound tightening produced an empty interval");
                new_lo = new_hi = 0.5 * (new_lo + new_hi);
            }
            if (new_hi < nb.hi || new_lo > nb.lo) nb.prov = stage;
            nb.hi = new_hi;
            nb.lo = new_lo;
            mark_certified_stability(nb);
        }
    }
}

void apply_dataset_stability(const MlpNetwork& net, const LabeledDataset& data,
                             NeuronBounds& bounds) {
    if (data.size() == 0) throw ContractError("empty dataset");
    if (bounds.n_hidden_layers() != net.n_hidden_layers())
        throw ContractError("bounds do not match the network");

    // activation sign statistics over every dataset row (train and test)
    const int n = data.size();
    Eigen::MatrixXd h = ((data.inputs.rowwise() - net.x_scale.min.transpose()).array().rowwise() /
                         net.x_scale.range.transpose().array())
                            .matrix()
                            .transpose();
    for (int k = 0; k < net.n_hidden_layers(); ++k) {
        Eigen::MatrixXd pre =
            (net.weights[std::size_t(k)] * h).colwise() + net.biases[std::size_t(k)];
        for (int i = 0; i < pre.rows(); ++i) {
            NeuronBound& nb = bounds.layers[std::size_t(k)][std::size_t(i)];
            if (nb.stab != Stability::Free) continue;  // certified fixes win
            int active = 0;
            for (int s = 0; s < n; ++s) active += pre(i, s) >= 0.0 ? 1 : 0;
            if (active == n) {
                nb.stab = Stability::AlwaysActive;
                nb.dataset_based = true;
            } else if (active == 0) {
                nb.stab = Stability::AlwaysInactive;
                nb.dataset_based = true;
            }
        }
        h = pre.cwiseMax(0.0);
    }

    // re-propagate intervals of the deeper layers under the fixed semantics:
    // an active-fixed neuron passes negative values through, so downstream
    // bounds must cover that for the encoding to stay feasible domain-wide
    Eigen::VectorXd in_lo, in_hi;
    post_intervals(bounds.layers[0], in_lo, in_hi);
    for (int k = 1; k < net.n_hidden_layers(); ++k) {
        auto [w, b] = net.folded_layer(k);
        Eigen::VectorXd lo, hi;
        propagate_layer(w, b, in_lo, in_hi, lo, hi);
        auto& layer = bounds.layers[std::size_t(k)];
        for (int i = 0; i < lo.size(); ++i) {
            layer[std::size_t(i)].lo = lo[i];
            layer[std::size_t(i)].hi = hi[i];
            layer[std::size_t(i)].prov = BoundProvenance::Interval;
            if (layer[std::size_t(i)].stab == Stability::Free)
                mark_certified_stability(layer[std::size_t(i)]);
        }
        post_intervals(layer, in_lo, in_hi);
    }
}

NetworkEncoding encode_network(const MlpNetwork& net, const GridCase& grid,
                               const InputDomain& domain, const NeuronBounds& bounds) {
    if (bounds.n_hidden_layers() != net.n_hidden_layers())
        throw ContractError("bounds do not cover the network");
    for (const auto& layer : bounds.layers)
        for (const auto& nb : layer) {
            if (nb.lo > nb.hi) throw ContractError("neuron bound with lo > hi");
            if (nb.stab == Stability::Free && (nb.lo > 0.0 || nb.hi < 0.0))
                throw ContractError(
                    "free neuron with one-sided bounds; it should have been promoted to stable");
        }

    NetworkEncoding enc;
    enc.bounds = bounds;
    BlockVars v =
        append_network_block(enc.model, net, grid, domain, bounds, net.n_hidden_layers());
    enc.pd_vars = v.pd;
    enc.zhat_vars = v.zhat;
    enc.z_vars = v.z;
    enc.bin_vars = v.bin;
    enc.n_free_neurons = v.free_neurons;

    // output affine map, with interval bounds on the outputs for the solver
    auto [w, b] = net.folded_layer(net.n_hidden_layers());
    Eigen::VectorXd in_lo, in_hi;
    if (net.n_hidden_layers() > 0) {
        post_intervals(bounds.layers.back(), in_lo, in_hi);
    } else {
        in_lo = domain.lower_mw(grid);
        in_hi = domain.upper_mw(grid);
    }
    Eigen::VectorXd out_lo, out_hi;
    propagate_layer(w, b, in_lo, in_hi, out_lo, out_hi);

    const std::vector<int>& prev = net.n_hidden_layers() ? v.z.back() : v.pd;
    enc.output_gens = grid.non_slack_gens();
    enc.slack_gen = grid.slack_gen();
    if (int(enc.output_gens.size()) != net.n_outputs())
        throw ContractError("network outputs do not match the non-slack generator count");
    for (int o = 0; o < net.n_outputs(); ++o) {
        int var = enc.model.add_var(out_lo[o], out_hi[o]);
        enc.output_vars.push_back(var);
        std::vector<std::pair<int, double>> row{{var, 1.0}};
        for (int j = 0; j < w.cols(); ++j)
            if (w(o, j) != 0.0) row.emplace_back(prev[std::size_t(j)], -w(o, j));
        enc.model.add_row(std::move(row), Relation::Equal, b[o]);
    }

    // slack completion: slack = sum(p_d) - sum(outputs)
    Eigen::VectorXd lo_mw = domain.lower_mw(grid);
    Eigen::VectorXd hi_mw = domain.upper_mw(grid);
    double slack_lo = lo_mw.sum() - (net.n_outputs() ? out_hi.sum() : 0.0);
    double slack_hi = hi_mw.sum() - (net.n_outputs() ? out_lo.sum() : 0.0);
    enc.slack_var = enc.model.add_var(slack_lo, slack_hi);
    std::vector<std::pair<int, double>> srow{{enc.slack_var, 1.0}};
    for (int o : enc.output_vars) srow.emplace_back(o, 1.0);
    for (int d : enc.pd_vars) srow.emplace_back(d, -1.0);
    enc.model.add_row(std::move(srow), Relation::Equal, 0.0);
    return enc;
}

NeuronBounds prepare_bounds(const MlpNetwork& net, const GridCase& grid, const InputDomain& domain,
                            const BoundPipelineOptions& opts, const LabeledDataset* dataset) {
    NeuronBounds bounds = interval_bounds(net, grid, domain);
    if (opts.stability == StabilityMode::Dataset) {
        if (!dataset)
            throw ContractError("dataset stability mode requires a dataset");
        apply_dataset_stability(net, *dataset, bounds);
    }
    if (opts.tighten_lp) tighten_bounds(net, grid, domain, bounds, BoundProvenance::LpRelax, opts.tighten);
    if (opts.tighten_milp) tighten_bounds(net, grid, domain, bounds, BoundProvenance::Milp, opts.tighten);
    return bounds;
}

// ---------------------------------------------------------------------------
// bounds cache

namespace {

json domain_to_json(const InputDomain& d) {
    json j;
    j["lower_frac"] = std::vector<double>(d.lower_frac.data(), d.lower_frac.data() + d.n_loads());
    j["upper_frac"] = std::vector<double>(d.upper_frac.data(), d.upper_frac.data() + d.n_loads());
    return j;
}

const char* prov_name(BoundProvenance p) {
    switch (p) {
        case BoundProvenance::Interval: return "interval";
        case BoundProvenance::LpRelax: return "lp_relax";
        case BoundProvenance::Milp: return "milp";
    }
    return "?";
}

BoundProvenance prov_from(const std::string& s) {
    if (s == "interval") return BoundProvenance::Interval;
    if (s == "lp_relax") return BoundProvenance::LpRelax;
    if (s == "milp") return BoundProvenance::Milp;
    throw ParseError("unknown bound provenance: " + s);
}

const char* stab_name(Stability s) {
    switch (s) {
        case Stability::Free: return "free";
        case Stability::AlwaysActive: return "always_active";
        case Stability::AlwaysInactive: return "always_inactive";
    }
    return "?";
}

Stability stab_from(const std::string& s) {
    if (s == "free") return Stability::Free;
    if (s == "always_active") return Stability::AlwaysActive;
    if (s == "always_inactive") return Stability::AlwaysInactive;
    throw ParseError("unknown stability: " + s);
}

}  // namespace

void save_bounds_cache(const NeuronBounds& bounds, const MlpNetwork& net,
                       const InputDomain& domain, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["net_fingerprint"] = net_fingerprint(net);
    j["domain"] = domain_to_json(domain);
    json layers = json::array();
    for (const auto& layer : bounds.layers) {
        json jl = json::array();
        for (const auto& nb : layer)
            jl.push_back({{"lo", nb.lo},
                          {"hi", nb.hi},
                          {"prov", prov_name(nb.prov)},
                          {"stab", stab_name(nb.stab)},
                          {"dataset", nb.dataset_based}});
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    write_file_atomic(path, j.dump() + "\n");
}

bool load_bounds_cache(const MlpNetwork& net, const InputDomain& domain, const std::string& path,
                       NeuronBounds* out) {
    if (!std::filesystem::exists(path)) return false;
    json j = json::parse(read_file(path));
    if (j.at("net_fingerprint").get<std::uint64_t>() != net_fingerprint(net)) return false;
    if (j.at("domain") != domain_to_json(domain)) return false;
    NeuronBounds b;
    for (const auto& jl : j.at("layers")) {
        std::vector<NeuronBound> layer;
        for (const auto& e : jl) {
            NeuronBound nb;
            nb.lo = e.at("lo").get<double>();
            nb.hi = e.at("hi").get<double>();
            nb.prov = prov_from(e.at("prov").get<std::string>());
            nb.stab = stab_from(e.at("stab").get<std::string>());
            nb.dataset_based = e.at("dataset").get<bool>();
            layer.push_back(nb);
        }
        b.layers.push_back(std::move(layer));
    }
    *out = std::move(b);
    return true;
}

}  // namespace gridverify
