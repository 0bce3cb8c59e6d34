// Command-line pipeline: data generation, training, verification, domain
// sweeps and LP export. File writes are atomic; identical configs and seeds
// reproduce identical outputs (solve wall times aside).

#include <atomic>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gridverify/branch_bound.hpp"
#include "gridverify/dataset.hpp"
#include "gridverify/dcopf.hpp"
#include "gridverify/encode.hpp"
#include "gridverify/mlp.hpp"
#include "gridverify/util.hpp"
#include "gridverify/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gridverify;

namespace {

// runs jobs 0..n-1 on up to `threads` workers; results land indexed, so the
// outcome does not depend on scheduling
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                errors[std::size_t(t)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::strtod(item.c_str(), nullptr));
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (double v : parse_double_list(s)) out.push_back(int(v));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (double v : parse_double_list(s)) out.push_back(std::uint64_t(v));
    return out;
}

// flat key-value configuration; command-line flags override file entries
struct RunConfig {
    std::string case_path;
    std::string dataset_dir;
    std::vector<std::string> net_files;
    std::string out_dir = "runs/out";
    int n_samples = 10000;
    std::string seeds = "1";
    double domain_lower = 0.6;
    double domain_upper = 1.0;
    std::string layers = "50,50,50";
    int epochs = 250;
    int batch = 40;
    double lr = 0.1;
    std::string optimizer = "sgd";
    int prune_start = 50;
    int prune_end = 200;
    int prune_steps = 10;
    double sparsity = 0.8;
    std::string metric = "all";
    std::string stability = "certified";
    std::string tighten = "lp";  // interval | lp | milp
    double gap_tol = 0.0;
    double time_limit = std::numeric_limits<double>::infinity();
    long milp_node_cap = 20000;
    double big_m = 1e5;
    bool single_milp = false;
    std::string deltas = "0,0.04,0.08,0.12";
    double threshold = std::numeric_limits<double>::quiet_NaN();
    std::string bounds_cache;
    std::string load_list;  // export-lp: explicit load vector
    int jobs = std::max(1u, std::thread::hardware_concurrency());
};

void apply_config_file(RunConfig& cfg, const std::string& path) {
    json j = json::parse(read_file(path));
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("case", cfg.case_path);
    get("dataset", cfg.dataset_dir);
    get("nets", cfg.net_files);
    get("out", cfg.out_dir);
    get("n", cfg.n_samples);
    get("seeds", cfg.seeds);
    get("domain_lower", cfg.domain_lower);
    get("domain_upper", cfg.domain_upper);
    get("layers", cfg.layers);
    get("epochs", cfg.epochs);
    get("batch", cfg.batch);
    get("lr", cfg.lr);
    get("optimizer", cfg.optimizer);
    get("prune_start", cfg.prune_start);
    get("prune_end", cfg.prune_end);
    get("prune_steps", cfg.prune_steps);
    get("sparsity", cfg.sparsity);
    get("metric", cfg.metric);
    get("stability", cfg.stability);
    get("tighten", cfg.tighten);
    get("gap_tol", cfg.gap_tol);
    get("time_limit", cfg.time_limit);
    get("milp_node_cap", cfg.milp_node_cap);
    get("big_m", cfg.big_m);
    get("single_milp", cfg.single_milp);
    get("deltas", cfg.deltas);
    get("threshold", cfg.threshold);
    get("bounds_cache", cfg.bounds_cache);
    get("jobs", cfg.jobs);
}

void write_config_echo(const RunConfig& cfg, const std::string& command) {
    json j;
    j["command"] = command;
    j["case"] = cfg.case_path;
    j["dataset"] = cfg.dataset_dir;
    j["nets"] = cfg.net_files;
    j["out"] = cfg.out_dir;
    j["n"] = cfg.n_samples;
    j["seeds"] = cfg.seeds;
    j["domain_lower"] = cfg.domain_lower;
    j["domain_upper"] = cfg.domain_upper;
    j["layers"] = cfg.layers;
    j["epochs"] = cfg.epochs;
    j["batch"] = cfg.batch;
    j["lr"] = cfg.lr;
    j["optimizer"] = cfg.optimizer;
    j["prune_start"] = cfg.prune_start;
    j["prune_end"] = cfg.prune_end;
    j["prune_steps"] = cfg.prune_steps;
    j["sparsity"] = cfg.sparsity;
    j["metric"] = cfg.metric;
    j["stability"] = cfg.stability;
    j["tighten"] = cfg.tighten;
    j["gap_tol"] = cfg.gap_tol;
    j["time_limit"] = std::isfinite(cfg.time_limit) ? json(cfg.time_limit) : json("none");
    j["milp_node_cap"] = cfg.milp_node_cap;
    j["big_m"] = cfg.big_m;
    j["single_milp"] = cfg.single_milp;
    j["deltas"] = cfg.deltas;
    j["jobs"] = cfg.jobs;
    write_file_atomic(cfg.out_dir + "/config.json", j.dump(2) + "\n");
}

BoundPipelineOptions pipeline_from(const RunConfig& cfg) {
    BoundPipelineOptions p;
    p.stability = stability_mode_from_string(cfg.stability);
    if (cfg.tighten == "interval") {
        p.tighten_lp = false;
        p.tighten_milp = false;
    } else if (cfg.tighten == "lp") {
        p.tighten_lp = true;
        p.tighten_milp = false;
    } else if (cfg.tighten == "milp") {
        p.tighten_lp = true;
        p.tighten_milp = true;
    } else {
        throw ValidationError("unknown tightening stage: " + cfg.tighten);
    }
    p.tighten.milp_node_cap = cfg.milp_node_cap;
    return p;
}

VerificationOptions verify_options_from(const RunConfig& cfg) {
    VerificationOptions v;
    v.gap_tol = cfg.gap_tol;
    v.time_limit_sec = cfg.time_limit;
    v.big_m = cfg.big_m;
    v.single_milp = cfg.single_milp;
    return v;
}

json report_to_json(const VerificationReport& rep) {
    json j;
    j["metric"] = to_string(rep.metric);
    j["worst_case_value"] = rep.worst_case_value;
    j["value_lower_bound"] = rep.value_lower_bound;
    j["raw_value"] = rep.raw_value;
    j["milp_gap"] = rep.milp_gap;
    j["status"] = to_string(rep.status);
    j["node_count"] = rep.node_count;
    j["wall_time_sec"] = rep.wall_time_sec;
    j["attained"] = rep.attained;
    j["boundary_fraction"] = rep.boundary_fraction;
    if (rep.maximizer_load.size() > 0)
        j["maximizer_load"] = std::vector<double>(
            rep.maximizer_load.data(), rep.maximizer_load.data() + rep.maximizer_load.size());
    if (std::isfinite(rep.recheck_value)) j["recheck_value"] = rep.recheck_value;
    if (std::isfinite(rep.empirical_lower_bound)) {
        j["empirical_lower_bound"] = rep.empirical_lower_bound;
        if (std::isfinite(rep.ratio)) j["ratio"] = rep.ratio;
    }
    if (rep.big_m_used > 0.0) {
        j["big_m_used"] = rep.big_m_used;
        j["audit"] = {
            {"pass", rep.audit.pass},
            {"min_slack", std::isfinite(rep.audit.min_slack) ? rep.audit.min_slack : -1.0},
            {"worst_row", rep.audit.worst_row},
            {"n_rows", rep.audit.n_rows}};
        j["audit_retried"] = rep.audit_retried;
    }
    return j;
}

std::vector<Metric> metrics_from(const std::string& s) {
    if (s == "all") return {Metric::NuG, Metric::NuLine, Metric::NuDist, Metric::NuOpt};
    std::vector<Metric> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(metric_from_string(item));
    if (out.empty()) throw ValidationError("no metric selected");
    return out;
}

std::string net_stem(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& cfg) {
    GridCase grid = load_case_file(cfg.case_path);
    InputDomain domain = InputDomain::box(grid.n_loads(), cfg.domain_lower, cfg.domain_upper);
    auto seeds = parse_seed_list(cfg.seeds);
    if (seeds.empty()) throw ValidationError("a seed is required");
    LabeledDataset data = generate_dataset(grid, domain, cfg.n_samples, seeds.front());
    save_dataset(data, cfg.out_dir);
    write_config_echo(cfg, "gen-data");
    std::cout << "dataset: " << data.size() << " rows (" << data.n_infeasible
              << " infeasible dropped) -> " << cfg.out_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    GridCase grid = load_case_file(cfg.case_path);
    LabeledDataset data = load_dataset(cfg.dataset_dir);
    std::vector<int> hidden = parse_int_list(cfg.layers);
    auto seeds = parse_seed_list(cfg.seeds);
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    fs::create_directories(cfg.out_dir);

    std::vector<TrainResult> results(seeds.size());
    parallel_for(int(seeds.size()), cfg.jobs, [&](int i) {
        TrainConfig tc;
        tc.epochs_max = cfg.epochs;
        tc.batch_size = cfg.batch;
        tc.learning_rate = cfg.lr;
        tc.optimizer = cfg.optimizer;
        tc.prune_start_epoch = cfg.prune_start;
        tc.prune_end_epoch = cfg.prune_end;
        tc.prune_steps = cfg.prune_steps;
        tc.target_sparsity = cfg.sparsity;
        tc.seed = seeds[std::size_t(i)];
        results[std::size_t(i)] = train(data, grid, hidden, tc);
    });

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        std::string tag = "seed" + std::to_string(seeds[i]);
        save_net(results[i].net, cfg.out_dir + "/net_" + tag + ".json");
        std::ostringstream log;
        log << "epoch,train_mse,test_mse,sparsity\n";
        for (const auto& row : results[i].log)
            log << row.epoch << "," << format_double(row.train_mse) << ","
                << format_double(row.test_mse) << "," << format_double(row.sparsity) << "\n";
        write_file_atomic(cfg.out_dir + "/train_log_" + tag + ".csv", log.str());
        std::cout << "net_" << tag << ": best epoch " << results[i].best_epoch << ", test MSE "
                  << results[i].best_test_mse << ", sparsity " << results[i].net.zero_fraction()
                  << "\n";
    }
    write_config_echo(cfg, "train");
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    GridCase grid = load_case_file(cfg.case_path);
    AdmittanceSet adm = build_admittance(grid);
    InputDomain domain = InputDomain::box(grid.n_loads(), cfg.domain_lower, cfg.domain_upper);
    if (cfg.net_files.empty()) throw ValidationError("at least one --net file is required");
    std::vector<Metric> metrics = metrics_from(cfg.metric);
    BoundPipelineOptions pipeline = pipeline_from(cfg);
    VerificationOptions vopts = verify_options_from(cfg);

    bool have_dataset = !cfg.dataset_dir.empty();
    LabeledDataset data;
    if (have_dataset) data = load_dataset(cfg.dataset_dir);
    if (pipeline.stability == StabilityMode::Dataset && !have_dataset)
        throw ValidationError("--stability dataset requires --dataset");

    double cost100 = solve_dcopf(grid, adm, grid.nominal_loads_mw()).objective_cost;
    fs::create_directories(cfg.out_dir);

    struct PerMetric {
        double guarantee_sum = 0.0;
        double empirical_sum = 0.0;
        int empirical_n = 0;
    };
    std::vector<PerMetric> agg(metrics.size());
    int exit_code = 0;

    for (const std::string& net_file : cfg.net_files) {
        MlpNetwork net = load_net(net_file);
        NeuronBounds bounds;
        bool cached = false;
        std::string cache_path;
        if (!cfg.bounds_cache.empty()) {
            fs::create_directories(cfg.bounds_cache);
            std::ostringstream name;
            name << std::hex << net_fingerprint(net) << "_" << cfg.tighten << "_" << cfg.stability
                 << ".json";
            cache_path = cfg.bounds_cache + "/" + name.str();
            cached = load_bounds_cache(net, domain, cache_path, &bounds);
        }
        if (!cached) {
            bounds = prepare_bounds(net, grid, domain, pipeline, have_dataset ? &data : nullptr);
            if (!cache_path.empty()) save_bounds_cache(bounds, net, domain, cache_path);
        }
        NetworkEncoding enc = encode_network(net, grid, domain, bounds);
        EmpiricalWorstCase emp;
        if (have_dataset) emp = empirical_worst_case(data, net, grid, adm);

        std::vector<VerificationReport> reports(metrics.size());
        parallel_for(int(metrics.size()), cfg.jobs, [&](int mi) {
            reports[std::size_t(mi)] =
                run_metric(metrics[std::size_t(mi)], net, enc, grid, adm, cost100, vopts);
        });

        for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
            VerificationReport& rep = reports[mi];
            if (have_dataset) {
                switch (rep.metric) {
                    case Metric::NuG: rep.empirical_lower_bound = emp.nu_g_mw; break;
                    case Metric::NuLine: rep.empirical_lower_bound = emp.nu_line_mw; break;
                    case Metric::NuDist:
                        rep.empirical_lower_bound = 100.0 * emp.nu_dist_frac;
                        break;
                    case Metric::NuOpt:
                        rep.empirical_lower_bound = 100.0 * emp.nu_opt_raw / cost100;
                        break;
                }
                rep.ratio = std::abs(rep.empirical_lower_bound) > 1e-12
                                ? rep.worst_case_value / rep.empirical_lower_bound
                                : std::numeric_limits<double>::quiet_NaN();
                agg[mi].empirical_sum += rep.empirical_lower_bound;
                ++agg[mi].empirical_n;
            }
            agg[mi].guarantee_sum += rep.worst_case_value;

            json j = report_to_json(rep);
            j["net"] = net_file;
            j["case"] = grid.name;
            j["stability"] = cfg.stability;
            j["tighten"] = cfg.tighten;
            write_file_atomic(cfg.out_dir + "/report_" + net_stem(net_file) + "_" +
                                  to_string(rep.metric) + ".json",
                              j.dump(2) + "\n");
            std::cout << net_stem(net_file) << " " << to_string(rep.metric) << ": "
                      << rep.worst_case_value
                      << (rep.metric == Metric::NuG || rep.metric == Metric::NuLine ? " MW"
                                                                                    : " %")
                      << " (status " << to_string(rep.status) << ", gap " << rep.milp_gap
                      << ")\n";
            if (std::isfinite(cfg.threshold) && rep.worst_case_value > cfg.threshold) {
                std::cerr << "threshold exceeded: " << to_string(rep.metric) << " = "
                          << rep.worst_case_value << " > " << cfg.threshold << "\n";
                exit_code = 1;
            }
        }
    }

    // aggregate table shaped like the reference experiments, averaged over nets
    std::ostringstream csv;
    csv << "case,metric,empirical,guarantee,ratio\n";
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
        double guar = agg[mi].guarantee_sum / double(cfg.net_files.size());
        std::string emp_str, ratio_str;
        if (agg[mi].empirical_n > 0) {
            double emp = agg[mi].empirical_sum / agg[mi].empirical_n;
            emp_str = format_double(emp);
            if (std::abs(emp) > 1e-12) ratio_str = format_double(guar / emp);
        }
        csv << grid.name << "," << to_string(metrics[mi]) << "," << emp_str << ","
            << format_double(guar) << "," << ratio_str << "\n";
    }
    write_file_atomic(cfg.out_dir + "/aggregate.csv", csv.str());
    write_config_echo(cfg, "verify");
    return exit_code;
}

int cmd_sweep(const RunConfig& cfg) {
    GridCase grid = load_case_file(cfg.case_path);
    AdmittanceSet adm = build_admittance(grid);
    InputDomain domain = InputDomain::box(grid.n_loads(), cfg.domain_lower, cfg.domain_upper);
    if (cfg.net_files.empty()) throw ValidationError("a --net file is required");
    std::vector<double> deltas = parse_double_list(cfg.deltas);
    if (deltas.empty()) throw ValidationError("the delta list must not be empty");
    BoundPipelineOptions pipeline = pipeline_from(cfg);
    VerificationOptions vopts = verify_options_from(cfg);

    bool have_dataset = !cfg.dataset_dir.empty();
    LabeledDataset data;
    if (have_dataset) data = load_dataset(cfg.dataset_dir);
    if (pipeline.stability == StabilityMode::Dataset && !have_dataset)
        throw ValidationError("--stability dataset requires --dataset");

    MlpNetwork net = load_net(cfg.net_files.front());
    auto entries = domain_reduction_sweep(net, grid, adm, domain, deltas, pipeline,
                                          have_dataset ? &data : nullptr, vopts);

    fs::create_directories(cfg.out_dir);
    std::ostringstream csv;
    csv << "delta,metric,worst_case_value,normalized_pct,status,milp_gap\n";
    for (const auto& e : entries)
        for (std::size_t i = 0; i < e.reports.size(); ++i)
            csv << format_double(e.delta) << "," << to_string(e.reports[i].metric) << ","
                << format_double(e.reports[i].worst_case_value) << ","
                << format_double(e.normalized_pct[i]) << "," << to_string(e.reports[i].status)
                << "," << format_double(e.reports[i].milp_gap) << "\n";
    write_file_atomic(cfg.out_dir + "/sweep.csv", csv.str());
    write_config_echo(cfg, "sweep");
    std::cout << "sweep over " << entries.size() << " domain reductions -> " << cfg.out_dir
              << "/sweep.csv\n";
    return 0;
}

int cmd_export_lp(const RunConfig& cfg, const std::string& out_file) {
    GridCase grid = load_case_file(cfg.case_path);
    AdmittanceSet adm = build_admittance(grid);
    std::string text;
    if (cfg.net_files.empty()) {
        // plain DC-OPF LP at the requested (or nominal) loading
        Eigen::VectorXd load = grid.nominal_loads_mw();
        if (!cfg.load_list.empty()) {
            auto vals = parse_double_list(cfg.load_list);
            if (int(vals.size()) != grid.n_loads())
                throw ValidationError("--load must list one value per load");
            load = Eigen::Map<Eigen::VectorXd>(vals.data(), long(vals.size()));
        }
        text = export_lp_format(build_dcopf(grid, adm, load).model);
    } else {
        // assembled verification MILP for one metric
        MlpNetwork net = load_net(cfg.net_files.front());
        InputDomain domain = InputDomain::box(grid.n_loads(), cfg.domain_lower, cfg.domain_upper);
        bool have_dataset = !cfg.dataset_dir.empty();
        LabeledDataset data;
        if (have_dataset) data = load_dataset(cfg.dataset_dir);
        BoundPipelineOptions pipeline = pipeline_from(cfg);
        NeuronBounds bounds =
            prepare_bounds(net, grid, domain, pipeline, have_dataset ? &data : nullptr);
        NetworkEncoding enc = encode_network(net, grid, domain, bounds);
        Metric metric = metrics_from(cfg.metric).front();
        text = export_lp_format(assemble_metric_milp(enc, grid, adm, metric, cfg.big_m));
    }
    write_file_atomic(out_file, text);
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"worst-case guarantees for neural networks predicting DC-OPF dispatch"};
    app.require_subcommand(1);

    RunConfig cfg;
    // pre-scan for --config so command-line flags keep priority
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(cfg, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 2;
            }
        }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--case", cfg.case_path, "grid case file (.m or .json)");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--domain-lower", cfg.domain_lower, "lower load fraction");
        sub->add_option("--domain-upper", cfg.domain_upper, "upper load fraction");
        sub->add_option("--jobs", cfg.jobs, "worker pool size");
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "sample loads and label them with DC-OPF");
    add_common(gen);
    gen->add_option("--n", cfg.n_samples, "sample count");
    gen->add_option("--seed,--seeds", cfg.seeds, "sampler seed");

    CLI::App* tr = app.add_subcommand("train", "train ReLU networks on a dataset");
    add_common(tr);
    tr->add_option("--dataset", cfg.dataset_dir, "dataset directory");
    tr->add_option("--layers", cfg.layers, "hidden layer sizes, e.g. 50,50,50");
    tr->add_option("--seeds,--seed", cfg.seeds, "training seeds (one net per seed)");
    tr->add_option("--epochs", cfg.epochs, "maximum epochs");
    tr->add_option("--batch", cfg.batch, "minibatch size");
    tr->add_option("--lr", cfg.lr, "learning rate");
    tr->add_option("--optimizer", cfg.optimizer, "sgd | adam");
    tr->add_option("--prune-start", cfg.prune_start, "first pruning epoch");
    tr->add_option("--prune-end", cfg.prune_end, "last pruning epoch");
    tr->add_option("--prune-steps", cfg.prune_steps, "number of pruning checkpoints");
    tr->add_option("--sparsity", cfg.sparsity, "final zero fraction of every weight matrix");

    CLI::App* ver = app.add_subcommand("verify", "worst-case guarantees over the input domain");
    add_common(ver);
    ver->add_option("--net", cfg.net_files, "trained network file(s)");
    ver->add_option("--dataset", cfg.dataset_dir,
                    "dataset directory (for empirical bounds and --stability dataset)");
    ver->add_option("--metric", cfg.metric, "all or comma list of nu_g,nu_line,nu_dist,nu_opt");
    ver->add_option("--stability", cfg.stability, "off | certified | dataset");
    ver->add_option("--tighten", cfg.tighten, "interval | lp | milp bound tightening");
    ver->add_option("--gap-tol", cfg.gap_tol, "MILP relative gap tolerance");
    ver->add_option("--time-limit", cfg.time_limit, "per-solve time limit [s]");
    ver->add_option("--milp-node-cap", cfg.milp_node_cap, "node cap per tightening MILP");
    ver->add_option("--big-m", cfg.big_m, "Fortuny-Amat constant");
    ver->add_flag("--single-milp", cfg.single_milp, "one disjunctive MILP per metric");
    ver->add_option("--bounds-cache", cfg.bounds_cache, "directory for cached neuron bounds");
    ver->add_option("--threshold", cfg.threshold,
                    "exit 1 when any guarantee exceeds this value (CI gating)");

    CLI::App* sw = app.add_subcommand("sweep", "worst-case guarantees vs input-domain reduction");
    add_common(sw);
    sw->add_option("--net", cfg.net_files, "trained network file");
    sw->add_option("--dataset", cfg.dataset_dir, "dataset directory");
    sw->add_option("--deltas", cfg.deltas, "comma list of domain reductions");
    sw->add_option("--stability", cfg.stability, "off | certified | dataset");
    sw->add_option("--tighten", cfg.tighten, "interval | lp | milp");
    sw->add_option("--gap-tol", cfg.gap_tol, "MILP relative gap tolerance");
    sw->add_option("--big-m", cfg.big_m, "Fortuny-Amat constant");

    std::string export_out = "model.lp";
    CLI::App* ex = app.add_subcommand("export-lp", "export a DC-OPF LP or verification MILP");
    add_common(ex);
    ex->add_option("--net", cfg.net_files, "network file (omit for the plain DC-OPF LP)");
    ex->add_option("--dataset", cfg.dataset_dir, "dataset directory");
    ex->add_option("--metric", cfg.metric, "metric for the exported MILP objective");
    ex->add_option("--stability", cfg.stability, "off | certified | dataset");
    ex->add_option("--tighten", cfg.tighten, "interval | lp | milp");
    ex->add_option("--big-m", cfg.big_m, "Fortuny-Amat constant");
    ex->add_option("--load", cfg.load_list, "explicit load vector for the DC-OPF export");
    ex->add_option("--out-file", export_out, "output LP file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(cfg);
        if (tr->parsed()) return cmd_train(cfg);
        if (ver->parsed()) return cmd_verify(cfg);
        if (sw->parsed()) return cmd_sweep(cfg);
        if (ex->parsed()) return cmd_export_lp(cfg, export_out);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedFeatureError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
