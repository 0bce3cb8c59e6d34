#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridverify/util.hpp"

namespace gridverify {

struct Line {
    int from_bus = 0;
    int to_bus = 0;
    double susceptance = 0.0;    // p.u. (1/x)
    double flow_limit_mw = 0.0;  // symmetric limit, MW
};

struct Generator {
    int bus = 0;
    double p_min_mw = 0.0;
    double p_max_mw = 0.0;
    double cost = 0.0;  // $/MWh, linear
};

struct LoadPoint {
    int bus = 0;
    double p_max_nominal_mw = 0.0;
};

// Static network data. Immutable after construction; shared freely across
// concurrent verification jobs.
struct GridCase {
    std::string name;
    int n_buses = 0;
    std::vector<Line> lines;
    std::vector<Generator> gens;
    std::vector<LoadPoint> loads;
    int slack_bus = 0;
    double base_mva = 100.0;

    int n_lines() const { return int(lines.size()); }
    int n_gens() const { return int(gens.size()); }
    int n_loads() const { return int(loads.size()); }

    // The slack generator absorbs the prediction/demand mismatch: the first
    // generator located at the slack bus.
    int slack_gen() const;
    std::vector<int> non_slack_gens() const;
    std::vector<int> non_slack_buses() const;

    double total_nominal_load_mw() const;
    Eigen::VectorXd cost_vector() const;
    Eigen::VectorXd nominal_loads_mw() const;

    // throws ValidationError on bad indices, limits, slack setup or a
    // disconnected line graph
    void validate() const;
};

// 0/1 bus-incidence maps; each column has exactly one unit entry.
struct IncidenceMaps {
    Eigen::MatrixXd gen_map;   // n_buses x n_gens
    Eigen::MatrixXd load_map;  // n_buses x n_loads
};

IncidenceMaps build_incidence(const GridCase& grid);

struct AdmittanceSet {
    Eigen::MatrixXd b_bus;   // n_buses x n_buses, p.u.
    Eigen::MatrixXd b_line;  // n_lines x n_buses, p.u.; row l: +b at from, -b at to
    // flows = ptdf * injections at non-slack buses (columns in ascending bus order)
    Eigen::MatrixXd ptdf;
    std::vector<int> non_slack_buses;
};

// Assembles b_bus/b_line and the PTDF matrix by solving the slack-reduced
// system (one factorization, n_buses-1 right-hand sides).
AdmittanceSet build_admittance(const GridCase& grid);

// injections_mw indexed by non-slack buses; the slack absorbs the residual.
Eigen::VectorXd line_flows(const AdmittanceSet& adm, const Eigen::VectorXd& injections_mw);

// Net injection at every bus for a dispatch/load pair, MW.
Eigen::VectorXd nodal_injections_mw(const GridCase& grid, const Eigen::VectorXd& p_g_mw,
                                    const Eigen::VectorXd& p_d_mw);

// Parsers. parse_case() sniffs the format: JSON documents start with '{',
// anything else is treated as a MATPOWER .m case.
GridCase parse_case(const std::string& source);
GridCase parse_case_json(const std::string& source);
GridCase parse_case_matpower(const std::string& source);
std::string serialize_case_json(const GridCase& grid);
GridCase load_case_file(const std::string& path);

}  // namespace gridverify
