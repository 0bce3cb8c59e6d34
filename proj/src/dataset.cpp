#include "gridverify/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridverify/dcopf.hpp"
#include "gridverify/mlp.hpp"
#include "json.hpp"

namespace gridverify {

using json = nlohmann::json;

InputDomain InputDomain::box(int n_loads, double lower, double upper) {
    InputDomain d;
    d.lower_frac = Eigen::VectorXd::Constant(n_loads, lower);
    d.upper_frac = Eigen::VectorXd::Constant(n_loads, upper);
    return d;
}

InputDomain InputDomain::reduced(double delta) const {
    if (delta < 0.0) throw ContractError("domain reduction must be nonnegative");
    InputDomain d = *this;
    d.lower_frac = lower_frac.array() + delta;
    d.upper_frac = upper_frac.array() - delta;
    for (int i = 0; i < d.lower_frac.size(); ++i)
        if (d.lower_frac[i] > d.upper_frac[i]) {
            // collapse to the midpoint once the reduction crosses over
            double mid = 0.5 * (lower_frac[i] + upper_frac[i]);
            d.lower_frac[i] = d.upper_frac[i] = mid;
        }
    return d;
}

Eigen::VectorXd InputDomain::lower_mw(const GridCase& grid) const {
    return lower_frac.cwiseProduct(grid.nominal_loads_mw());
}

Eigen::VectorXd InputDomain::upper_mw(const GridCase& grid) const {
    return upper_frac.cwiseProduct(grid.nominal_loads_mw());
}

void InputDomain::validate(const GridCase& grid) const {
    if (lower_frac.size() != grid.n_loads() || upper_frac.size() != grid.n_loads())
        throw ValidationError("input domain dimension does not match the case loads");
    for (int i = 0; i < lower_frac.size(); ++i)
        if (lower_frac[i] > upper_frac[i])
            throw ValidationError("input domain has lower > upper for load " + std::to_string(i));
    if (poly_a.rows() != poly_b.size())
        throw ValidationError("polytope rows and rhs length differ");
    if (poly_a.rows() > 0 && poly_a.cols() != grid.n_loads())
        throw ValidationError("polytope row width does not match the case loads");
}

Eigen::MatrixXd lhs_sample(const InputDomain& domain, const GridCase& grid, int n,
                           std::uint64_t seed) {
    if (n < 1) throw ContractError("sample count must be positive");
    if (!domain.is_box())
        throw UnsupportedFeatureError(
            "Latin hypercube sampling requires a box domain (use rejection sampling for general "
            "polytopes)");
    domain.validate(grid);
    Eigen::VectorXd lo = domain.lower_mw(grid);
    Eigen::VectorXd hi = domain.upper_mw(grid);
    Rng rng(seed);
    Eigen::MatrixXd samples(n, grid.n_loads());
    std::vector<int> strata(n);
    for (int d = 0; d < grid.n_loads(); ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        rng.shuffle(strata);
        double width = (hi[d] - lo[d]) / double(n);
        for (int i = 0; i < n; ++i)
            samples(i, d) = lo[d] + (double(strata[i]) + rng.uniform()) * width;
    }
    return samples;
}

LabeledDataset generate_dataset(const GridCase& grid, const InputDomain& domain, int n,
                                std::uint64_t seed) {
    Eigen::MatrixXd samples = lhs_sample(domain, grid, n, seed);
    AdmittanceSet adm = build_admittance(grid);

    LabeledDataset data;
    data.case_name = grid.name;
    data.seed = seed;
    data.domain = domain;
    data.n_requested = n;

    std::vector<Eigen::VectorXd> inputs, targets;
    inputs.reserve(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd load = samples.row(i).transpose();
        try {
            DcOpfSolution sol = solve_dcopf(grid, adm, load);
            inputs.push_back(load);
            targets.push_back(sol.p_g_mw);
        } catch (const InfeasibleError&) {
            ++data.n_infeasible;
        }
    }
    if (data.n_infeasible * 2 > n)
        throw ValidationError("more than half of the samples are DC-OPF infeasible (" +
                              std::to_string(data.n_infeasible) + "/" + std::to_string(n) +
                              "); the input domain is likely misconfigured");

    const int kept = int(inputs.size());
    data.inputs.resize(kept, grid.n_loads());
    data.targets.resize(kept, grid.n_gens());
    for (int i = 0; i < kept; ++i) {
        data.inputs.row(i) = inputs[i].transpose();
        data.targets.row(i) = targets[i].transpose();
    }

    // 80/20 split by seeded shuffle (fresh stream, decoupled from sampling)
    std::vector<int> idx(kept);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0xd1b54a32d192ed03ULL);  // decoupled stream for the split
    rng.shuffle(idx);
    int n_train = int(std::lround(0.8 * kept));
    n_train = std::min(std::max(n_train, kept > 1 ? 1 : kept), kept);
    data.train_idx.assign(idx.begin(), idx.begin() + n_train);
    data.test_idx.assign(idx.begin() + n_train, idx.end());
    std::sort(data.train_idx.begin(), data.train_idx.end());
    std::sort(data.test_idx.begin(), data.test_idx.end());
    return data;
}

namespace {

std::string matrix_to_csv(const std::string& prefix, const Eigen::MatrixXd& m) {
    std::ostringstream out;
    for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << c;
    out << "\n";
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
        out << "\n";
    }
    return out.str();
}

Eigen::MatrixXd matrix_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(parse_csv_row(line));
    }
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != std::size_t(m.cols()))
            throw ParseError("ragged CSV row in " + path);
        for (int c = 0; c < m.cols(); ++c) m(int(r), c) = rows[r][c];
    }
    return m;
}

}  // namespace

void save_dataset(const LabeledDataset& data, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json meta;
    meta["format_version"] = 1;
    meta["case_name"] = data.case_name;
    meta["seed"] = data.seed;
    meta["n_requested"] = data.n_requested;
    meta["n_infeasible"] = data.n_infeasible;
    meta["n_rows"] = data.size();
    json dom;
    dom["lower_frac"] = std::vector<double>(data.domain.lower_frac.data(),
                                            data.domain.lower_frac.data() + data.domain.n_loads());
    dom["upper_frac"] = std::vector<double>(data.domain.upper_frac.data(),
                                            data.domain.upper_frac.data() + data.domain.n_loads());
    meta["domain"] = dom;
    write_file_atomic(dir + "/meta.json", meta.dump(2) + "\n");
    write_file_atomic(dir + "/inputs.csv", matrix_to_csv("load_", data.inputs));
    write_file_atomic(dir + "/targets.csv", matrix_to_csv("gen_", data.targets));
    json split;
    split["train"] = data.train_idx;
    split["test"] = data.test_idx;
    write_file_atomic(dir + "/split.json", split.dump() + "\n");
}

LabeledDataset load_dataset(const std::string& dir) {
    LabeledDataset data;
    json meta = json::parse(read_file(dir + "/meta.json"));
    data.case_name = meta.at("case_name").get<std::string>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    data.n_requested = meta.at("n_requested").get<int>();
    data.n_infeasible = meta.at("n_infeasible").get<int>();
    auto lo = meta.at("domain").at("lower_frac").get<std::vector<double>>();
    auto hi = meta.at("domain").at("upper_frac").get<std::vector<double>>();
    data.domain.lower_frac = Eigen::Map<Eigen::VectorXd>(lo.data(), long(lo.size()));
    data.domain.upper_frac = Eigen::Map<Eigen::VectorXd>(hi.data(), long(hi.size()));
    data.inputs = matrix_from_csv(dir + "/inputs.csv");
    data.targets = matrix_from_csv(dir + "/targets.csv");
    json split = json::parse(read_file(dir + "/split.json"));
    data.train_idx = split.at("train").get<std::vector<int>>();
    data.test_idx = split.at("test").get<std::vector<int>>();
    if (int(meta.at("n_rows").get<int>()) != data.size())
        throw ParseError("dataset row count does not match meta.json");
    return data;
}

EmpiricalWorstCase empirical_worst_case(const LabeledDataset& data, const MlpNetwork& net,
                                        const GridCase& grid, const AdmittanceSet& adm) {
    if (net.n_inputs() != int(data.inputs.cols()))
        throw ContractError("network input dimension does not match the dataset");
    EmpiricalWorstCase w;
    Eigen::VectorXd cost = grid.cost_vector();
    Eigen::MatrixXd pred = net.forward_batch(data.inputs);
    const auto& nsb = adm.non_slack_buses;

    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd load = data.inputs.row(i).transpose();
        Eigen::VectorXd p_hat = complete_dispatch(grid, pred.row(i).transpose(), load);

        double vg = 0.0;
        for (int g = 0; g < grid.n_gens(); ++g) {
            vg = std::max(vg, p_hat[g] - grid.gens[g].p_max_mw);
            vg = std::max(vg, grid.gens[g].p_min_mw - p_hat[g]);
        }
        if (vg > w.nu_g_mw) {
            w.nu_g_mw = vg;
            w.row_nu_g = i;
        }

        if (grid.n_lines() > 0 && !nsb.empty()) {
            Eigen::VectorXd inj_full = nodal_injections_mw(grid, p_hat, load);
            Eigen::VectorXd inj(nsb.size());
            for (std::size_t b = 0; b < nsb.size(); ++b) inj[int(b)] = inj_full[nsb[b]];
            Eigen::VectorXd flows = line_flows(adm, inj);
            double vl = 0.0;
            for (int l = 0; l < grid.n_lines(); ++l)
                vl = std::max(vl, std::abs(flows[l]) - grid.lines[l].flow_limit_mw);
            if (vl > w.nu_line_mw) {
                w.nu_line_mw = vl;
                w.row_nu_line = i;
            }
        }

        double vd = 0.0;
        for (int g = 0; g < grid.n_gens(); ++g) {
            double range = grid.gens[g].p_max_mw - grid.gens[g].p_min_mw;
            if (range <= 0.0) continue;  // undefined normalization, excluded
            vd = std::max(vd, std::abs(p_hat[g] - data.targets(i, g)) / range);
        }
        if (vd > w.nu_dist_frac) {
            w.nu_dist_frac = vd;
            w.row_nu_dist = i;
        }

        double vo = cost.dot(p_hat - data.targets.row(i).transpose());
        if (w.row_nu_opt < 0 || vo > w.nu_opt_raw) {
            w.nu_opt_raw = vo;
            w.row_nu_opt = i;
        }
    }
    return w;
}

}  // namespace gridverify
