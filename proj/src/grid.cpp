#include "gridverify/grid.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace gridverify {

using json = nlohmann::json;

int GridCase::slack_gen() const {
    for (int g = 0; g < n_gens(); ++g)
        if (gens[g].bus == slack_bus) return g;
    throw ValidationError("no generator at the slack bus");
}

std::vector<int> GridCase::non_slack_gens() const {
    std::vector<int> out;
    int sg = slack_gen();
    for (int g = 0; g < n_gens(); ++g)
        if (g != sg) out.push_back(g);
    return out;
}

std::vector<int> GridCase::non_slack_buses() const {
    std::vector<int> out;
    for (int b = 0; b < n_buses; ++b)
        if (b != slack_bus) out.push_back(b);
    return out;
}

double GridCase::total_nominal_load_mw() const {
    double s = 0.0;
    for (const auto& d : loads) s += d.p_max_nominal_mw;
    return s;
}

Eigen::VectorXd GridCase::cost_vector() const {
    Eigen::VectorXd c(n_gens());
    for (int g = 0; g < n_gens(); ++g) c[g] = gens[g].cost;
    return c;
}

Eigen::VectorXd GridCase::nominal_loads_mw() const {
    Eigen::VectorXd d(n_loads());
    for (int i = 0; i < n_loads(); ++i) d[i] = loads[i].p_max_nominal_mw;
    return d;
}

namespace {

// union-find connectivity over the line graph
bool connected(const GridCase& g) {
    if (g.n_buses <= 1) return true;
    std::vector<int> parent(g.n_buses);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& l : g.lines) parent[find(l.from_bus)] = find(l.to_bus);
    int root = find(0);
    for (int b = 1; b < g.n_buses; ++b)
        if (find(b) != root) return false;
    return true;
}

}  // namespace

void GridCase::validate() const {
    if (n_buses < 1) throw ValidationError("case has no buses");
    if (base_mva <= 0) throw ValidationError("base_mva must be positive");
    auto check_bus = [&](int b, const char* what) {
        if (b < 0 || b >= n_buses)
            throw ValidationError(std::string(what) + " references bus " + std::to_string(b) +
                                  " outside [0, " + std::to_string(n_buses) + ")");
    };
    for (const auto& l : lines) {
        check_bus(l.from_bus, "line from");
        check_bus(l.to_bus, "line to");
        if (l.from_bus == l.to_bus) throw ValidationError("line connects a bus to itself");
        if (l.flow_limit_mw <= 0) throw ValidationError("line flow limit must be positive");
        if (l.susceptance == 0.0) throw ValidationError("zero-susceptance line survived parsing");
    }
    for (const auto& g : gens) {
        check_bus(g.bus, "generator");
        if (g.p_min_mw > g.p_max_mw) throw ValidationError("generator has p_min > p_max");
    }
    for (const auto& d : loads) check_bus(d.bus, "load");
    check_bus(slack_bus, "slack");
    if (gens.empty()) throw ValidationError("case has no generators");
    slack_gen();  // throws when no generator sits at the slack bus
    if (!connected(*this)) throw ValidationError("line graph is disconnected");
}

IncidenceMaps build_incidence(const GridCase& grid) {
    IncidenceMaps m;
    m.gen_map = Eigen::MatrixXd::Zero(grid.n_buses, grid.n_gens());
    m.load_map = Eigen::MatrixXd::Zero(grid.n_buses, grid.n_loads());
    for (int g = 0; g < grid.n_gens(); ++g) m.gen_map(grid.gens[g].bus, g) = 1.0;
    for (int d = 0; d < grid.n_loads(); ++d) m.load_map(grid.loads[d].bus, d) = 1.0;
    return m;
}

AdmittanceSet build_admittance(const GridCase& grid) {
    const int nb = grid.n_buses;
    const int nl = grid.n_lines();
    AdmittanceSet adm;
    adm.b_bus = Eigen::MatrixXd::Zero(nb, nb);
    adm.b_line = Eigen::MatrixXd::Zero(nl, nb);
    for (int l = 0; l < nl; ++l) {
        const auto& ln = grid.lines[l];
        double b = ln.susceptance;
        adm.b_bus(ln.from_bus, ln.from_bus) += b;
        adm.b_bus(ln.to_bus, ln.to_bus) += b;
        adm.b_bus(ln.from_bus, ln.to_bus) -= b;
        adm.b_bus(ln.to_bus, ln.from_bus) -= b;
        adm.b_line(l, ln.from_bus) = b;
        adm.b_line(l, ln.to_bus) = -b;
    }
    adm.non_slack_buses = grid.non_slack_buses();
    const int nr = int(adm.non_slack_buses.size());
    Eigen::MatrixXd reduced(nr, nr);
    for (int i = 0; i < nr; ++i)
        for (int j = 0; j < nr; ++j)
            reduced(i, j) = adm.b_bus(adm.non_slack_buses[i], adm.non_slack_buses[j]);
    if (nr == 0) {
        adm.ptdf = Eigen::MatrixXd::Zero(nl, 0);
        return adm;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(reduced);
    if (!lu.isInvertible())
        throw NumericalError("reduced bus admittance matrix is singular (disconnected grid?)");
    // ptdf = b_line(:, non-slack) * reduced^{-1}; solve with the transpose to
    // avoid forming the inverse (reduced is symmetric)
    Eigen::MatrixXd b_line_ns(nl, nr);
    for (int j = 0; j < nr; ++j) b_line_ns.col(j) = adm.b_line.col(adm.non_slack_buses[j]);
    adm.ptdf = lu.solve(b_line_ns.transpose()).transpose();
    return adm;
}

Eigen::VectorXd line_flows(const AdmittanceSet& adm, const Eigen::VectorXd& injections_mw) {
    if (injections_mw.size() != adm.ptdf.cols())
        throw ContractError("injection vector must be indexed by non-slack buses");
    return adm.ptdf * injections_mw;
}

Eigen::VectorXd nodal_injections_mw(const GridCase& grid, const Eigen::VectorXd& p_g_mw,
                                    const Eigen::VectorXd& p_d_mw) {
    if (p_g_mw.size() != grid.n_gens() || p_d_mw.size() != grid.n_loads())
        throw ContractError("dispatch/load dimension mismatch");
    Eigen::VectorXd inj = Eigen::VectorXd::Zero(grid.n_buses);
    for (int g = 0; g < grid.n_gens(); ++g) inj[grid.gens[g].bus] += p_g_mw[g];
    for (int d = 0; d < grid.n_loads(); ++d) inj[grid.loads[d].bus] -= p_d_mw[d];
    return inj;
}

// ---------------------------------------------------------------------------
// native JSON format

GridCase parse_case_json(const std::string& source) {
    json j;
    try {
        j = json::parse(source);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid JSON case: ") + e.what());
    }
    GridCase g;
    try {
        g.name = j.value("name", "");
        g.n_buses = j.at("buses").get<int>();
        g.slack_bus = j.at("slack_bus").get<int>();
        g.base_mva = j.at("base_mva").get<double>();
        for (const auto& l : j.at("lines")) {
            Line ln;
            ln.from_bus = l.at("from").get<int>();
            ln.to_bus = l.at("to").get<int>();
            ln.susceptance = l.at("susceptance").get<double>();
            ln.flow_limit_mw = l.at("flow_limit").get<double>();
            if (ln.susceptance == 0.0) continue;  // dropped at parse time
            g.lines.push_back(ln);
        }
        for (const auto& a : j.at("generators")) {
            Generator gen;
            gen.bus = a.at("bus").get<int>();
            gen.p_min_mw = a.at("p_min").get<double>();
            gen.p_max_mw = a.at("p_max").get<double>();
            gen.cost = a.at("cost").get<double>();
            g.gens.push_back(gen);
        }
        for (const auto& a : j.at("loads")) {
            LoadPoint d;
            d.bus = a.at("bus").get<int>();
            d.p_max_nominal_mw = a.at("p_max_nominal").get<double>();
            g.loads.push_back(d);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("JSON case missing or mistyped field: ") + e.what());
    }
    g.validate();
    return g;
}

std::string serialize_case_json(const GridCase& grid) {
    json j;
    j["name"] = grid.name;
    j["base_mva"] = grid.base_mva;
    j["buses"] = grid.n_buses;
    j["slack_bus"] = grid.slack_bus;
    j["lines"] = json::array();
    for (const auto& l : grid.lines)
        j["lines"].push_back({{"from", l.from_bus},
                              {"to", l.to_bus},
                              {"susceptance", l.susceptance},
                              {"flow_limit", l.flow_limit_mw}});
    j["generators"] = json::array();
    for (const auto& g : grid.gens)
        j["generators"].push_back(
            {{"bus", g.bus}, {"p_min", g.p_min_mw}, {"p_max", g.p_max_mw}, {"cost", g.cost}});
    j["loads"] = json::array();
    for (const auto& d : grid.loads)
        j["loads"].push_back({{"bus", d.bus}, {"p_max_nominal", d.p_max_nominal_mw}});
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// MATPOWER .m subset reader
//
// Supported: mpc.baseMVA, mpc.bus (bus_i, type, Pd), mpc.gen (bus, Pmax,
// Pmin, status), mpc.branch (f, t, x, rateA, status) and mpc.gencost
// restricted to polynomial rows that are affine. Everything else is ignored
// with a warning on stderr.

namespace {

struct MatrixBlock {
    std::vector<std::vector<double>> rows;
    std::vector<int> line_numbers;
};

// strips % comments, returns per-line content
std::vector<std::string> split_lines(const std::string& src) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : src) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    lines.push_back(cur);
    for (auto& l : lines) {
        auto p = l.find('%');
        if (p != std::string::npos) l.erase(p);
    }
    return lines;
}

bool parse_row(const std::string& text, int lineno, std::vector<double>& out) {
    out.clear();
    const char* p = text.c_str();
    while (*p) {
        while (*p && (std::isspace(static_cast<unsigned char>(*p)) || *p == ',' || *p == ';')) ++p;
        if (!*p || *p == ']') break;
        char* end = nullptr;
        double v = std::strtod(p, &end);
        if (end == p)
            throw ParseError("malformed table entry at line " + std::to_string(lineno) + ": '" +
                             text + "'");
        out.push_back(v);
        p = end;
    }
    return !out.empty();
}

}  // namespace

GridCase parse_case_matpower(const std::string& source) {
    auto lines = split_lines(source);
    std::map<std::string, MatrixBlock> blocks;
    double base_mva = 100.0;
    std::string case_name;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& l = lines[i];
        auto fn = l.find("function");
        if (fn != std::string::npos) {
            auto eq = l.find('=');
            if (eq != std::string::npos) {
                std::string n = l.substr(eq + 1);
                n.erase(std::remove_if(n.begin(), n.end(),
                                       [](unsigned char c) { return std::isspace(c) || c == ';'; }),
                        n.end());
                case_name = n;
            }
            continue;
        }
        auto mpc = l.find("mpc.");
        if (mpc == std::string::npos) continue;
        auto eq = l.find('=', mpc);
        if (eq == std::string::npos) continue;
        std::string key = l.substr(mpc + 4, eq - mpc - 4);
        key.erase(std::remove_if(key.begin(), key.end(),
                                 [](unsigned char c) { return std::isspace(c); }),
                  key.end());
        std::string rest = l.substr(eq + 1);
        if (key == "baseMVA") {
            base_mva = std::strtod(rest.c_str(), nullptr);
            continue;
        }
        if (key == "version") continue;
        auto bracket = rest.find('[');
        if (bracket == std::string::npos) {
            std::cerr << "warning: ignoring MATPOWER field mpc." << key << "\n";
            continue;
        }
        MatrixBlock block;
        std::string row_text = rest.substr(bracket + 1);
        std::size_t j = i;
        bool closed = row_text.find(']') != std::string::npos;
        while (true) {
            std::string chunk = row_text.substr(0, row_text.find(']'));
            std::vector<double> row;
            if (parse_row(chunk, int(j) + 1, row)) {
                block.rows.push_back(row);
                block.line_numbers.push_back(int(j) + 1);
            }
            if (closed) break;
            ++j;
            if (j >= lines.size())
                throw ParseError("unterminated matrix mpc." + key);
            row_text = lines[j];
            closed = row_text.find(']') != std::string::npos;
        }
        i = j;
        blocks[key] = std::move(block);
    }

    auto need = [&](const char* key) -> MatrixBlock& {
        auto it = blocks.find(key);
        if (it == blocks.end()) throw ParseError(std::string("MATPOWER case lacks mpc.") + key);
        return it->second;
    };

    GridCase g;
    g.name = case_name;
    g.base_mva = base_mva;

    // bus table: bus_i type Pd ...
    auto& bus = need("bus");
    std::map<long, int> bus_index;  // MATPOWER id -> zero-based index
    int slack = -1;
    for (std::size_t r = 0; r < bus.rows.size(); ++r) {
        const auto& row = bus.rows[r];
        if (row.size() < 3)
            throw ParseError("bus row too short at line " + std::to_string(bus.line_numbers[r]));
        long id = long(row[0]);
        if (bus_index.count(id))
            throw ParseError("duplicate bus id at line " + std::to_string(bus.line_numbers[r]));
        int idx = int(bus_index.size());
        bus_index[id] = idx;
        int type = int(row[1]);
        if (type == 3) {
            if (slack >= 0) throw ValidationError("multiple slack buses in bus table");
            slack = idx;
        }
        double pd = row[2];
        if (pd != 0.0) g.loads.push_back({idx, pd});
    }
    g.n_buses = int(bus_index.size());
    if (slack < 0) throw ValidationError("bus table defines no slack (type 3) bus");
    g.slack_bus = slack;

    auto lookup_bus = [&](double id_raw, int lineno) {
        auto it = bus_index.find(long(id_raw));
        if (it == bus_index.end())
            throw ValidationError("reference to nonexistent bus " +
                                  std::to_string(long(id_raw)) + " at line " +
                                  std::to_string(lineno));
        return it->second;
    };

    // gen table: bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin ...
    auto& gen = need("gen");
    std::vector<std::size_t> in_service_gen_rows;
    for (std::size_t r = 0; r < gen.rows.size(); ++r) {
        const auto& row = gen.rows[r];
        if (row.size() < 10)
            throw ParseError("gen row too short at line " + std::to_string(gen.line_numbers[r]));
        if (row[7] <= 0) {
            std::cerr << "warning: dropping out-of-service generator at line "
                      << gen.line_numbers[r] << "\n";
            continue;
        }
        Generator gg;
        gg.bus = lookup_bus(row[0], gen.line_numbers[r]);
        gg.p_max_mw = row[8];
        gg.p_min_mw = row[9];
        g.gens.push_back(gg);
        in_service_gen_rows.push_back(r);
    }

    // branch table: fbus tbus r x b rateA rateB rateC ratio angle status
    auto& branch = need("branch");
    for (std::size_t r = 0; r < branch.rows.size(); ++r) {
        const auto& row = branch.rows[r];
        if (row.size() < 6)
            throw ParseError("branch row too short at line " +
                             std::to_string(branch.line_numbers[r]));
        double status = row.size() > 10 ? row[10] : 1.0;
        if (status <= 0) {
            std::cerr << "warning: dropping out-of-service branch at line "
                      << branch.line_numbers[r] << "\n";
            continue;
        }
        double x = row[3];
        if (x == 0.0) {
            std::cerr << "warning: dropping zero-reactance branch at line "
                      << branch.line_numbers[r] << "\n";
            continue;
        }
        Line ln;
        ln.from_bus = lookup_bus(row[0], branch.line_numbers[r]);
        ln.to_bus = lookup_bus(row[1], branch.line_numbers[r]);
        ln.susceptance = 1.0 / x;
        // rateA used directly as the MW limit; 0 means unlimited in MATPOWER,
        // mapped to a large finite limit
        ln.flow_limit_mw = row[5] > 0 ? row[5] : 1e6;
        g.lines.push_back(ln);
    }

    // gencost: model startup shutdown n c_{n-1} ... c_0 (polynomial only)
    auto it = blocks.find("gencost");
    if (it != blocks.end()) {
        const auto& cost = it->second;
        if (cost.rows.size() < in_service_gen_rows.size())
            throw ParseError("gencost table has fewer rows than gen table");
        for (std::size_t k = 0; k < in_service_gen_rows.size(); ++k) {
            const auto& row = cost.rows[in_service_gen_rows[k]];
            int lineno = cost.line_numbers[in_service_gen_rows[k]];
            if (row.size() < 4)
                throw ParseError("gencost row too short at line " + std::to_string(lineno));
            int model = int(row[0]);
            if (model != 2)
                throw UnsupportedFeatureError("only polynomial gencost rows are supported (line " +
                                              std::to_string(lineno) + ")");
            int n = int(row[3]);
            if (int(row.size()) < 4 + n)
                throw ParseError("gencost row truncated at line " + std::to_string(lineno));
            // coefficients are ordered highest degree first; anything beyond
            // the linear term must vanish
            for (int c = 0; c < n - 2; ++c)
                if (row[4 + c] != 0.0)
                    throw UnsupportedFeatureError(
                        "nonlinear generator cost at line " + std::to_string(lineno) +
                        " (only linear cost rows are supported)");
            g.gens[k].cost = n >= 2 ? row[4 + n - 2] : 0.0;
        }
    } else {
        std::cerr << "warning: no gencost table; all generator costs set to 0\n";
    }

    g.validate();
    return g;
}

GridCase parse_case(const std::string& source) {
    for (char c : source) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') return parse_case_json(source);
        break;
    }
    return parse_case_matpower(source);
}

GridCase load_case_file(const std::string& path) {
    GridCase g = parse_case(read_file(path));
    if (g.name.empty()) {
        auto slash = path.find_last_of('/');
        auto base = slash == std::string::npos ? path : path.substr(slash + 1);
        auto dot = base.find_last_of('.');
        g.name = dot == std::string::npos ? base : base.substr(0, dot);
    }
    return g;
}

}  // namespace gridverify
