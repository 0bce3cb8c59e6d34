#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "gridverify/dataset.hpp"
#include "gridverify/mlp.hpp"
#include "gridverify/util.hpp"

using namespace gridverify;

namespace {

MlpNetwork random_net(const std::vector<int>& sizes, std::uint64_t seed,
                      bool random_scaling = false) {
    MlpNetwork net;
    net.layer_sizes = sizes;
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        Eigen::MatrixXd w(sizes[k + 1], sizes[k]);
        Eigen::VectorXd b(sizes[k + 1]);
        for (int i = 0; i < w.rows(); ++i) {
            b[i] = rng.uniform(-0.5, 0.5);
            for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-1.0, 1.0);
        }
        net.weights.push_back(w);
        net.biases.push_back(b);
        net.mask.push_back(Eigen::MatrixXd::Ones(w.rows(), w.cols()));
    }
    net.x_scale = AffineScaler::identity(sizes.front());
    net.y_scale = AffineScaler::identity(sizes.back());
    if (random_scaling) {
        for (int i = 0; i < sizes.front(); ++i) {
            net.x_scale.min[i] = rng.uniform(-1.0, 1.0);
            net.x_scale.range[i] = rng.uniform(0.5, 2.0);
        }
        for (int i = 0; i < sizes.back(); ++i) {
            net.y_scale.min[i] = rng.uniform(-1.0, 1.0);
            net.y_scale.range[i] = rng.uniform(0.5, 2.0);
        }
    }
    net.validate();
    return net;
}

// independent scalar re-implementation of the forward pass
Eigen::VectorXd forward_reference(const MlpNetwork& net, const Eigen::VectorXd& x) {
    std::vector<double> h(std::size_t(x.size()));
    for (int i = 0; i < x.size(); ++i)
        h[std::size_t(i)] = (x[i] - net.x_scale.min[i]) / net.x_scale.range[i];
    const int layers = int(net.weights.size());
    for (int k = 0; k < layers; ++k) {
        std::vector<double> nxt(std::size_t(net.layer_sizes[std::size_t(k) + 1]));
        for (std::size_t i = 0; i < nxt.size(); ++i) {
            double acc = net.biases[std::size_t(k)][int(i)];
            for (std::size_t j = 0; j < h.size(); ++j)
                acc += net.weights[std::size_t(k)](int(i), int(j)) * h[j];
            nxt[i] = (k + 1 < int(net.weights.size())) ? std::max(acc, 0.0) : acc;
        }
        h = nxt;
    }
    Eigen::VectorXd out(int(h.size()));
    for (std::size_t i = 0; i < h.size(); ++i)
        out[int(i)] = h[i] * net.y_scale.range[int(i)] + net.y_scale.min[int(i)];
    return out;
}

GridCase toy_grid(int n_loads, int n_gens) {
    GridCase g;
    g.n_buses = 1;
    g.slack_bus = 0;
    for (int i = 0; i < n_gens; ++i) g.gens.push_back({0, 0.0, 300.0, 1.0 + i});
    for (int i = 0; i < n_loads; ++i) g.loads.push_back({0, 50.0 + 10.0 * i});
    g.validate();
    return g;
}

}  // namespace

TEST_CASE("all-zero weights forward the de-normalized bias") {
    MlpNetwork net = random_net({2, 3, 2}, 1, true);
    for (auto& w : net.weights) w.setZero();
    Eigen::VectorXd x(2);
    x << 0.3, -0.2;
    Eigen::VectorXd out = net.forward(x);
    // hidden = max(b0, 0), out = y_range .* (W1 h + b1) + y_min with W1 = 0
    Eigen::VectorXd expect = net.y_scale.denormalize(net.biases[1]);
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd x2(2);
    x2 << 100.0, 100.0;
    CHECK((net.forward(x2) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("relu kills a negative pre-activation") {
    MlpNetwork net = random_net({1, 1, 1}, 2);
    net.weights[0](0, 0) = 1.0;
    net.biases[0][0] = -0.5;
    net.weights[1](0, 0) = 2.0;
    net.biases[1][0] = 0.25;
    Eigen::VectorXd x(1);
    x << 0.2;  // pre-activation -0.3 -> hidden 0
    CHECK(net.forward(x)[0] == doctest::Approx(0.25));
    x << 0.9;  // pre-activation 0.4 -> output 0.8 + 0.25
    CHECK(net.forward(x)[0] == doctest::Approx(1.05));
}

TEST_CASE("forward matches an independent reimplementation") {
    MlpNetwork net = random_net({2, 3, 1}, 3, true);
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x(2);
        x << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
        Eigen::VectorXd a = net.forward(x);
        Eigen::VectorXd b = forward_reference(net, x);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    }
    // batch path agrees with the single-sample path
    Eigen::MatrixXd xs(5, 2);
    for (int i = 0; i < 5; ++i) {
        xs(i, 0) = rng.uniform(-2.0, 2.0);
        xs(i, 1) = rng.uniform(-2.0, 2.0);
    }
    Eigen::MatrixXd ys = net.forward_batch(xs);
    for (int i = 0; i < 5; ++i)
        CHECK((ys.row(i).transpose() - net.forward(xs.row(i).transpose())).cwiseAbs().maxCoeff() <
              1e-12);
}

TEST_CASE("complete_dispatch balances generation and demand") {
    GridCase g = toy_grid(2, 3);
    Eigen::VectorXd out(2);
    out << 40.0, 50.0;
    Eigen::VectorXd load(2);
    load << 70.0, 30.0;
    Eigen::VectorXd full = complete_dispatch(g, out, load);
    CHECK(full.size() == 3);
    CHECK(full[g.slack_gen()] == doctest::Approx(10.0));  // 100 - 90
    CHECK(full.sum() == doctest::Approx(load.sum()));

    Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd zl = Eigen::VectorXd::Zero(2);
    CHECK(complete_dispatch(g, zero2, zl).sum() == doctest::Approx(0.0));
}

TEST_CASE("analytic gradients match central finite differences") {
    MlpNetwork net = random_net({2, 3, 2}, 5);
    Rng rng(23);
    Eigen::MatrixXd x(4, 2), y(4, 2);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) {
            x(i, j) = rng.uniform(-1.0, 1.0);
            y(i, j) = rng.uniform(-1.0, 1.0);
        }

    for (int draw = 0; draw < 20; ++draw) {
        // random parameter draw
        for (auto& w : net.weights)
            for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
        for (auto& b : net.biases)
            for (int i = 0; i < b.size(); ++i) b[i] = rng.uniform(-0.5, 0.5);

        MlpGradients g = mse_gradients(net, x, y);
        const double h = 1e-5;
        for (std::size_t k = 0; k < net.weights.size(); ++k) {
            for (int idx = 0; idx < std::min<long>(net.weights[k].size(), 6); ++idx) {
                double save = net.weights[k].data()[idx];
                net.weights[k].data()[idx] = save + h;
                double up = mse_loss(net, x, y);
                net.weights[k].data()[idx] = save - h;
                double dn = mse_loss(net, x, y);
                net.weights[k].data()[idx] = save;
                double fd = (up - dn) / (2 * h);
                double an = g.d_weights[k].data()[idx];
                double scale = std::max({1e-4, std::abs(fd), std::abs(an)});
                CHECK_MESSAGE(std::abs(fd - an) / scale < 1e-4, "layer ", k, " entry ", idx);
            }
            double save = net.biases[k][0];
            net.biases[k][0] = save + h;
            double up = mse_loss(net, x, y);
            net.biases[k][0] = save - h;
            double dn = mse_loss(net, x, y);
            net.biases[k][0] = save;
            double fd = (up - dn) / (2 * h);
            double an = g.d_biases[k][0];
            double scale = std::max({1e-4, std::abs(fd), std::abs(an)});
            CHECK(std::abs(fd - an) / scale < 1e-4);
        }
    }
}

TEST_CASE("forward is affine within a fixed activation pattern") {
    MlpNetwork net = random_net({2, 4, 4, 1}, 9);
    Rng rng(31);
    auto pattern = [&](const Eigen::VectorXd& x) {
        std::vector<bool> p;
        Eigen::VectorXd h = net.x_scale.normalize(x);
        for (std::size_t k = 0; k + 1 < net.weights.size(); ++k) {
            Eigen::VectorXd z = net.weights[k] * h + net.biases[k];
            for (int i = 0; i < z.size(); ++i) p.push_back(z[i] > 0.0);
            h = z.cwiseMax(0.0);
        }
        return p;
    };
    int tested = 0;
    for (int t = 0; t < 200 && tested < 20; ++t) {
        Eigen::VectorXd a(2), b(2);
        a << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
        b = a + Eigen::VectorXd::Constant(2, rng.uniform(-0.05, 0.05));
        Eigen::VectorXd mid = 0.5 * (a + b);
        if (pattern(a) != pattern(b) || pattern(a) != pattern(mid)) continue;
        Eigen::VectorXd expect = 0.5 * (net.forward(a) + net.forward(b));
        CHECK((net.forward(mid) - expect).cwiseAbs().maxCoeff() < 1e-10);
        ++tested;
    }
    CHECK(tested >= 10);
}

TEST_CASE("training learns a linear map and honors the sparsity schedule") {
    // synthetic single-bus system whose optimal dispatch is affine in the load
    GridCase g;
    g.n_buses = 1;
    g.slack_bus = 0;
    g.gens.push_back({0, -1000.0, 1000.0, 1.0});  // slack
    g.gens.push_back({0, 0.0, 200.0, 0.5});       // cheap unit serves everything it can
    g.loads.push_back({0, 80.0});
    g.loads.push_back({0, 60.0});
    g.validate();
    LabeledDataset data = generate_dataset(g, InputDomain::box(2), 600, 41);

    TrainConfig cfg;
    cfg.epochs_max = 120;
    cfg.batch_size = 40;
    cfg.learning_rate = 0.3;
    cfg.prune_start_epoch = 30;
    cfg.prune_end_epoch = 90;
    cfg.prune_steps = 6;
    cfg.target_sparsity = 0.5;
    cfg.seed = 7;
    TrainResult tr = train(data, g, {8, 8}, cfg);

    // masked entries are exactly zero and the final sparsity target is met
    for (const auto& w : tr.net.weights) {
        long zeros = (w.array() == 0.0).count();
        CHECK(double(zeros) / double(w.size()) >= 0.5 - 1e-12);
    }
    // early stopping returns the best test MSE seen after the last prune step
    CHECK(tr.best_test_mse <= tr.log.back().test_mse + 1e-15);

    // test MAE below 0.5% of the generator range
    double mae = 0.0;
    int count = 0;
    auto order = g.non_slack_gens();
    for (int idx : data.test_idx) {
        Eigen::VectorXd pred = tr.net.forward(data.inputs.row(idx).transpose());
        for (std::size_t j = 0; j < order.size(); ++j) {
            double range = g.gens[order[j]].p_max_mw - g.gens[order[j]].p_min_mw;
            mae += std::abs(pred[int(j)] - data.targets(idx, order[j])) / range;
            ++count;
        }
    }
    mae /= count;
    CHECK(mae < 0.005);
}

TEST_CASE("training is deterministic per seed") {
    GridCase g = toy_grid(2, 2);
    LabeledDataset data = generate_dataset(g, InputDomain::box(2), 100, 3);
    TrainConfig cfg;
    cfg.epochs_max = 10;
    cfg.learning_rate = 0.1;
    cfg.prune_steps = 0;
    cfg.seed = 5;
    TrainResult a = train(data, g, {4}, cfg);
    TrainResult b = train(data, g, {4}, cfg);
    for (std::size_t k = 0; k < a.net.weights.size(); ++k)
        CHECK((a.net.weights[k] - b.net.weights[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("save/load round-trips the forward map exactly") {
    MlpNetwork net = random_net({3, 5, 2}, 13, true);
    auto path = (std::filesystem::temp_directory_path() / "gv_net_rt.json").string();
    save_net(net, path);
    MlpNetwork back = load_net(path);
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x(3);
        x << rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3);
        Eigen::VectorXd a = net.forward(x);
        Eigen::VectorXd b = back.forward(x);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bit-exact
    }
    CHECK(net_fingerprint(net) == net_fingerprint(back));
    std::filesystem::remove(path);
}

TEST_CASE("truncated network file fails to load") {
    MlpNetwork net = random_net({2, 2, 1}, 19);
    std::string text = serialize_net(net);
    auto path = (std::filesystem::temp_directory_path() / "gv_net_trunc.json").string();
    {
        std::ofstream out(path);
        out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_net(path), ParseError);
    std::filesystem::remove(path);

    // version mismatch is its own explicit error
    std::string bumped = text;
    auto pos = bumped.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, 19, "\"format_version\": 9");
    CHECK_THROWS_AS(deserialize_net(bumped), UnsupportedFeatureError);
}

TEST_CASE("hand-written net file is usable without training") {
    std::string text = R"({
 "format_version": 1,
 "layers": [1, 2, 1],
 "weights": [[[1.0], [-1.0]], [[0.5, 0.25]]],
 "biases": [[0.0, 1.0], [0.0]],
 "mask": [[[1.0], [1.0]], [[1.0, 1.0]]],
 "x_scale": {"min": [0.0], "range": [1.0]},
 "y_scale": {"min": [0.0], "range": [1.0]}
})";
    MlpNetwork net = deserialize_net(text);
    Eigen::VectorXd x(1);
    x << 2.0;
    // hidden = [max(2,0), max(-2+1,0)] = [2, 0]; out = 0.5*2 = 1
    CHECK(net.forward(x)[0] == doctest::Approx(1.0));
}

TEST_CASE("pruned weights stay zero through further training") {
    GridCase g = toy_grid(2, 2);
    LabeledDataset data = generate_dataset(g, InputDomain::box(2), 120, 9);
    TrainConfig cfg;
    cfg.epochs_max = 60;
    cfg.learning_rate = 0.2;
    cfg.prune_start_epoch = 10;
    cfg.prune_end_epoch = 30;  // pruning finishes well before training ends
    cfg.prune_steps = 4;
    cfg.target_sparsity = 0.6;
    cfg.seed = 21;
    TrainResult tr = train(data, g, {6}, cfg);
    for (std::size_t k = 0; k < tr.net.weights.size(); ++k)
        for (int i = 0; i < tr.net.weights[k].size(); ++i)
            if (tr.net.mask[k].data()[i] == 0.0) CHECK(tr.net.weights[k].data()[i] == 0.0);
}
