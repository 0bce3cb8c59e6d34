#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "gridverify/branch_bound.hpp"
#include "gridverify/encode.hpp"
#include "gridverify/util.hpp"

using namespace gridverify;

namespace {

// single-bus grid with n_loads unit-nominal loads, so fractions = MW
GridCase unit_grid(int n_loads) {
    GridCase g;
    g.n_buses = 1;
    g.slack_bus = 0;
    g.gens.push_back({0, -1000.0, 1000.0, 1.0});
    g.gens.push_back({0, 0.0, 100.0, 2.0});
    for (int i = 0; i < n_loads; ++i) g.loads.push_back({0, 1.0});
    g.validate();
    return g;
}

MlpNetwork make_net(const std::vector<int>& sizes) {
    MlpNetwork net;
    net.layer_sizes = sizes;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        net.weights.push_back(Eigen::MatrixXd::Zero(sizes[k + 1], sizes[k]));
        net.biases.push_back(Eigen::VectorXd::Zero(sizes[k + 1]));
        net.mask.push_back(Eigen::MatrixXd::Ones(sizes[k + 1], sizes[k]));
    }
    net.x_scale = AffineScaler::identity(sizes.front());
    net.y_scale = AffineScaler::identity(sizes.back());
    return net;
}

MlpNetwork random_net(const std::vector<int>& sizes, std::uint64_t seed) {
    MlpNetwork net = make_net(sizes);
    Rng rng(seed);
    for (auto& w : net.weights)
        for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
    for (auto& b : net.biases)
        for (int i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.3, 0.3);
    return net;
}

// pre-activations of every hidden neuron via the folded layers
std::vector<Eigen::VectorXd> pre_activations(const MlpNetwork& net, const Eigen::VectorXd& x) {
    std::vector<Eigen::VectorXd> out;
    Eigen::VectorXd h = x;
    for (int k = 0; k < net.n_hidden_layers(); ++k) {
        auto [w, b] = net.folded_layer(k);
        Eigen::VectorXd z = w * h + b;
        out.push_back(z);
        h = z.cwiseMax(0.0);
    }
    return out;
}

}  // namespace

TEST_CASE("interval bounds on a sign-mixed row") {
    GridCase g = unit_grid(2);
    MlpNetwork net = make_net({2, 1, 1});
    net.weights[0] << 1.0, -1.0;
    net.weights[1] << 1.0;
    InputDomain d = InputDomain::box(2, 0.0, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    CHECK(b.layers[0][0].lo == doctest::Approx(-1.0));
    CHECK(b.layers[0][0].hi == doctest::Approx(1.0));
    CHECK(b.layers[0][0].stab == Stability::Free);
}

TEST_CASE("all-zero weights bound every neuron at its bias") {
    GridCase g = unit_grid(2);
    MlpNetwork net = make_net({2, 3, 1});
    net.biases[0] << -2.0, 0.5, 3.0;
    NeuronBounds b = interval_bounds(net, g, InputDomain::box(2, 0.0, 1.0));
    for (int i = 0; i < 3; ++i) {
        CHECK(b.layers[0][i].lo == doctest::Approx(net.biases[0][i]));
        CHECK(b.layers[0][i].hi == doctest::Approx(net.biases[0][i]));
    }
    CHECK(b.layers[0][0].stab == Stability::AlwaysInactive);
    CHECK(b.layers[0][1].stab == Stability::AlwaysActive);
    CHECK(b.layers[0][2].stab == Stability::AlwaysActive);
}

TEST_CASE("interval bounds contain sampled pre-activations") {
    GridCase g = unit_grid(2);
    MlpNetwork net = random_net({2, 4, 2}, 5);
    InputDomain d = InputDomain::box(2, 0.2, 0.9);
    NeuronBounds b = interval_bounds(net, g, d);
    Rng rng(6);
    for (int t = 0; t < 10000; ++t) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9);
        auto pre = pre_activations(net, x);
        for (int k = 0; k < 1; ++k)
            for (int i = 0; i < pre[k].size(); ++i) {
                CHECK(pre[k][i] >= b.layers[k][i].lo - 1e-9);
                CHECK(pre[k][i] <= b.layers[k][i].hi + 1e-9);
            }
    }
}

TEST_CASE("single-input chain: interval bounds are already exact") {
    GridCase g = unit_grid(1);
    MlpNetwork net = make_net({1, 1, 1, 1});
    net.weights[0] << 2.0;
    net.biases[0] << -0.7;
    net.weights[1] << -1.5;
    net.biases[1] << 0.4;
    net.weights[2] << 1.0;
    InputDomain d = InputDomain::box(1, 0.0, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    NeuronBounds tightened = b;
    tighten_bounds(net, g, d, tightened, BoundProvenance::LpRelax);
    for (int k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < b.layers[k].size(); ++i) {
            CHECK(tightened.layers[k][i].lo == doctest::Approx(b.layers[k][i].lo).epsilon(1e-7));
            CHECK(tightened.layers[k][i].hi == doctest::Approx(b.layers[k][i].hi).epsilon(1e-7));
        }
}

TEST_CASE("cancelling paths: lp tightens, milp tightens further") {
    // two identical free neurons feed a difference node whose true range is {0}
    GridCase g = unit_grid(1);
    MlpNetwork net = make_net({1, 2, 1, 1});
    net.weights[0] << 1.0, 1.0;
    net.biases[0] << -0.5, -0.5;  // free on [0,1]: pre-activation in [-0.5, 0.5]
    net.weights[1] << 1.0, -1.0;  // cancellation
    net.weights[2] << 1.0;
    InputDomain d = InputDomain::box(1, 0.0, 1.0);

    NeuronBounds interval = interval_bounds(net, g, d);
    CHECK(interval.layers[1][0].lo == doctest::Approx(-0.5));
    CHECK(interval.layers[1][0].hi == doctest::Approx(0.5));

    NeuronBounds lp = interval;
    tighten_bounds(net, g, d, lp, BoundProvenance::LpRelax);
    CHECK(lp.layers[1][0].hi < interval.layers[1][0].hi - 1e-3);  // strictly tighter
    CHECK(lp.layers[1][0].lo > interval.layers[1][0].lo + 1e-3);

    NeuronBounds milp = lp;
    tighten_bounds(net, g, d, milp, BoundProvenance::Milp);
    CHECK(milp.layers[1][0].hi == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(milp.layers[1][0].lo == doctest::Approx(0.0).epsilon(1e-6));

    // cascade ordering: milp within lp within interval
    for (int k = 0; k < 2; ++k)
        for (std::size_t i = 0; i < interval.layers[k].size(); ++i) {
            CHECK(lp.layers[k][i].lo >= interval.layers[k][i].lo - 1e-9);
            CHECK(lp.layers[k][i].hi <= interval.layers[k][i].hi + 1e-9);
            CHECK(milp.layers[k][i].lo >= lp.layers[k][i].lo - 1e-9);
            CHECK(milp.layers[k][i].hi <= lp.layers[k][i].hi + 1e-9);
        }
}

TEST_CASE("tightened bounds stay sound on samples") {
    GridCase g = unit_grid(2);
    MlpNetwork net = random_net({2, 4, 3, 2}, 11);
    InputDomain d = InputDomain::box(2, 0.3, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    tighten_bounds(net, g, d, b, BoundProvenance::LpRelax);
    tighten_bounds(net, g, d, b, BoundProvenance::Milp);
    Rng rng(13);
    for (int t = 0; t < 10000; ++t) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0);
        auto pre = pre_activations(net, x);
        for (std::size_t k = 0; k < pre.size(); ++k)
            for (int i = 0; i < pre[k].size(); ++i) {
                REQUIRE(pre[k][i] >= b.layers[k][i].lo - 1e-7);
                REQUIRE(pre[k][i] <= b.layers[k][i].hi + 1e-7);
            }
    }
}

TEST_CASE("dataset stability flags sign-stable neurons") {
    GridCase g = unit_grid(1);
    MlpNetwork net = make_net({1, 2, 1});
    net.weights[0] << 1.0, 1.0;
    net.biases[0] << -0.5, 10.0;  // first free on [0,1], second certified active
    net.weights[1] << 1.0, 1.0;
    InputDomain d = InputDomain::box(1, 0.0, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    CHECK(b.layers[0][0].stab == Stability::Free);
    CHECK(b.layers[0][1].stab == Stability::AlwaysActive);
    CHECK_FALSE(b.layers[0][1].dataset_based);

    LabeledDataset data;
    data.inputs.resize(3, 1);
    data.inputs << 0.6, 0.8, 1.0;  // always above the 0.5 kink
    data.targets.resize(3, 1);
    data.targets.setZero();
    apply_dataset_stability(net, data, b);
    CHECK(b.layers[0][0].stab == Stability::AlwaysActive);
    CHECK(b.layers[0][0].dataset_based);
    CHECK_FALSE(b.certified());

    // mixed-sign data leaves the neuron free and the encoding unfixed
    NeuronBounds b2 = interval_bounds(net, g, d);
    LabeledDataset data2 = data;
    data2.inputs << 0.1, 0.8, 1.0;
    apply_dataset_stability(net, data2, b2);
    CHECK(b2.layers[0][0].stab == Stability::Free);
    CHECK(b2.certified());
}

TEST_CASE("encoding reproduces the forward pass at fixed inputs") {
    GridCase g = unit_grid(2);
    // outputs must match the single non-slack generator
    MlpNetwork net = random_net({2, 4, 3, 1}, 21);
    InputDomain d = InputDomain::box(2, 0.1, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    tighten_bounds(net, g, d, b, BoundProvenance::LpRelax);
    NetworkEncoding enc = encode_network(net, g, d, b);

    CHECK(enc.n_free_neurons == int(enc.model.binary_vars().size()));

    Rng rng(31);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0);
        LinearModel m = enc.model;
        for (int dd = 0; dd < 2; ++dd) m.set_var_bounds(enc.pd_vars[dd], x[dd], x[dd]);
        SolveResult r = solve_milp(m);
        REQUIRE(r.status == SolveStatus::Optimal);
        Eigen::VectorXd expect = net.forward(x);
        for (int o = 0; o < net.n_outputs(); ++o)
            CHECK(std::abs(r.x[enc.output_vars[o]] - expect[o]) < 1e-6);
        double slack_expect = x.sum() - expect.sum();
        CHECK(std::abs(r.x[enc.slack_var] - slack_expect) < 1e-6);
    }
}

TEST_CASE("inactive neurons are pinned to zero in the encoding") {
    GridCase g = unit_grid(1);
    MlpNetwork net = make_net({1, 2, 1});
    net.weights[0] << 1.0, -1.0;
    net.biases[0] << -5.0, -5.0;  // both always inactive on [0,1]
    net.weights[1] << 1.0, 1.0;
    net.biases[1] << 0.5;
    InputDomain d = InputDomain::box(1, 0.0, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    CHECK(b.layers[0][0].stab == Stability::AlwaysInactive);
    NetworkEncoding enc = encode_network(net, g, d, b);
    CHECK(enc.n_free_neurons == 0);
    for (int i = 0; i < 2; ++i) {
        CHECK(enc.model.lower(enc.z_vars[0][i]) == 0.0);
        CHECK(enc.model.upper(enc.z_vars[0][i]) == 0.0);
    }
    // fixed semantics short-circuit: output is the bias everywhere
    LinearModel m = enc.model;
    m.set_var_bounds(enc.pd_vars[0], 0.7, 0.7);
    SolveResult r = solve_milp(m);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x[enc.output_vars[0]] == doctest::Approx(0.5));
}

TEST_CASE("empty dataset-stability flags leave the encoding equivalent") {
    GridCase g = unit_grid(2);
    MlpNetwork net = random_net({2, 3, 1}, 41);
    InputDomain d = InputDomain::box(2, 0.0, 1.0);
    NeuronBounds base = interval_bounds(net, g, d);

    LabeledDataset mixed;
    mixed.inputs.resize(512, 2);
    Rng rng(43);
    for (int i = 0; i < 512; ++i) {
        mixed.inputs(i, 0) = rng.uniform(0.0, 1.0);
        mixed.inputs(i, 1) = rng.uniform(0.0, 1.0);
    }
    mixed.targets.resize(512, 1);
    mixed.targets.setZero();
    NeuronBounds flagged = base;
    apply_dataset_stability(net, mixed, flagged);

    // when no neuron was actually fixed the two encodings optimize alike
    if (flagged.count(Stability::Free) == base.count(Stability::Free)) {
        NetworkEncoding e1 = encode_network(net, g, d, base);
        NetworkEncoding e2 = encode_network(net, g, d, flagged);
        LinearModel m1 = e1.model, m2 = e2.model;
        m1.set_sense(Sense::Maximize);
        m2.set_sense(Sense::Maximize);
        m1.set_objective_coef(e1.output_vars[0], 1.0);
        m2.set_objective_coef(e2.output_vars[0], 1.0);
        SolveResult r1 = solve_milp(m1), r2 = solve_milp(m2);
        REQUIRE(r1.status == SolveStatus::Optimal);
        REQUIRE(r2.status == SolveStatus::Optimal);
        CHECK(r1.objective == doctest::Approx(r2.objective).epsilon(1e-9));
    }
}

TEST_CASE("bounds cache round-trips and rejects stale entries") {
    GridCase g = unit_grid(2);
    MlpNetwork net = random_net({2, 3, 1}, 51);
    InputDomain d = InputDomain::box(2, 0.4, 1.0);
    NeuronBounds b = interval_bounds(net, g, d);
    tighten_bounds(net, g, d, b, BoundProvenance::LpRelax);

    auto path = (std::filesystem::temp_directory_path() / "gv_bounds_cache.json").string();
    save_bounds_cache(b, net, d, path);
    NeuronBounds loaded;
    REQUIRE(load_bounds_cache(net, d, path, &loaded));
    for (int k = 0; k < b.n_hidden_layers(); ++k)
        for (std::size_t i = 0; i < b.layers[k].size(); ++i) {
            CHECK(loaded.layers[k][i].lo == b.layers[k][i].lo);
            CHECK(loaded.layers[k][i].hi == b.layers[k][i].hi);
            CHECK(loaded.layers[k][i].stab == b.layers[k][i].stab);
        }

    // different net or domain: cache miss
    MlpNetwork other = random_net({2, 3, 1}, 52);
    NeuronBounds scratch;
    CHECK_FALSE(load_bounds_cache(other, d, path, &scratch));
    CHECK_FALSE(load_bounds_cache(net, InputDomain::box(2, 0.5, 1.0), path, &scratch));
    std::filesystem::remove(path);
}
