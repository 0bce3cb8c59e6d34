#include "gridverify/mlp.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "json.hpp"

namespace gridverify {

using json = nlohmann::json;

AffineScaler AffineScaler::fit(const Eigen::MatrixXd& rows) {
    AffineScaler s;
    s.min = rows.colwise().minCoeff();
    Eigen::VectorXd max = rows.colwise().maxCoeff();
    s.range = max - s.min;
    for (int i = 0; i < s.range.size(); ++i)
        if (s.range[i] <= 0.0) s.range[i] = 1.0;
    return s;
}

AffineScaler AffineScaler::identity(int dim) {
    AffineScaler s;
    s.min = Eigen::VectorXd::Zero(dim);
    s.range = Eigen::VectorXd::Ones(dim);
    return s;
}

void MlpNetwork::validate() const {
    if (layer_sizes.size() < 2) throw ContractError("network needs input and output layers");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size() ||
        mask.size() != weights.size())
        throw ContractError("layer count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k].rows() != layer_sizes[k + 1] || weights[k].cols() != layer_sizes[k])
            throw ContractError("weight matrix dimension mismatch at layer " + std::to_string(k));
        if (biases[k].size() != layer_sizes[k + 1]) throw ContractError("bias dimension mismatch");
        if (mask[k].rows() != weights[k].rows() || mask[k].cols() != weights[k].cols())
            throw ContractError("mask dimension mismatch");
        for (int i = 0; i < weights[k].rows(); ++i)
            for (int j = 0; j < weights[k].cols(); ++j)
                if (mask[k](i, j) == 0.0 && weights[k](i, j) != 0.0)
                    throw ContractError("masked weight entry is nonzero");
    }
    if (x_scale.min.size() != layer_sizes.front() || y_scale.min.size() != layer_sizes.back())
        throw ContractError("scaler dimension mismatch");
}

Eigen::VectorXd MlpNetwork::forward(const Eigen::VectorXd& load_mw) const {
    Eigen::VectorXd h = x_scale.normalize(load_mw);
    const int last = int(weights.size()) - 1;
    for (int k = 0; k < last; ++k) h = (weights[k] * h + biases[k]).cwiseMax(0.0);
    Eigen::VectorXd out = weights[last] * h + biases[last];
    return y_scale.denormalize(out);
}

Eigen::MatrixXd MlpNetwork::forward_batch(const Eigen::MatrixXd& loads_mw) const {
    Eigen::MatrixXd h = ((loads_mw.rowwise() - x_scale.min.transpose()).array().rowwise() /
                         x_scale.range.transpose().array())
                            .matrix()
                            .transpose();
    const int last = int(weights.size()) - 1;
    for (int k = 0; k < last; ++k)
        h = ((weights[k] * h).colwise() + biases[k]).cwiseMax(0.0);
    Eigen::MatrixXd out = (weights[last] * h).colwise() + biases[last];
    Eigen::MatrixXd rows = out.transpose();
    return ((rows.array().rowwise() * y_scale.range.transpose().array()).rowwise() +
            y_scale.min.transpose().array())
        .matrix();
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> MlpNetwork::folded_layer(int k) const {
    Eigen::MatrixXd w = weights[k];
    Eigen::VectorXd b = biases[k];
    if (k == 0) {
        // absorb input normalization: W (x - min)/range + b
        Eigen::MatrixXd wd = w * x_scale.range.cwiseInverse().asDiagonal();
        b = b - wd * x_scale.min;
        w = wd;
    }
    if (k == int(weights.size()) - 1) {
        // absorb output denormalization: range .* (W h + b) + min
        w = y_scale.range.asDiagonal() * w;
        b = y_scale.range.cwiseProduct(b) + y_scale.min;
    }
    return {w, b};
}

double MlpNetwork::zero_fraction() const {
    long zeros = 0, total = 0;
    for (const auto& w : weights) {
        total += w.size();
        zeros += (w.array() == 0.0).count();
    }
    return total ? double(zeros) / double(total) : 0.0;
}

Eigen::VectorXd complete_dispatch(const GridCase& grid, const Eigen::VectorXd& net_output_mw,
                                  const Eigen::VectorXd& load_mw) {
    auto order = grid.non_slack_gens();
    if (net_output_mw.size() != int(order.size()))
        throw ContractError("network output does not match non-slack generator count");
    Eigen::VectorXd full(grid.n_gens());
    double others = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        full[order[i]] = net_output_mw[int(i)];
        others += net_output_mw[int(i)];
    }
    full[grid.slack_gen()] = load_mw.sum() - others;
    return full;
}

double mse_loss(const MlpNetwork& net, const Eigen::MatrixXd& x_norm,
                const Eigen::MatrixXd& y_norm) {
    Eigen::MatrixXd h = x_norm.transpose();
    const int last = int(net.weights.size()) - 1;
    for (int k = 0; k < last; ++k)
        h = ((net.weights[k] * h).colwise() + net.biases[k]).cwiseMax(0.0);
    Eigen::MatrixXd out = (net.weights[last] * h).colwise() + net.biases[last];
    Eigen::MatrixXd err = out - y_norm.transpose();
    return err.squaredNorm() / double(err.size());
}

MlpGradients mse_gradients(const MlpNetwork& net, const Eigen::MatrixXd& x_norm,
                           const Eigen::MatrixXd& y_norm, double* loss_out) {
    const int last = int(net.weights.size()) - 1;
    std::vector<Eigen::MatrixXd> pre(last), post(last);
    Eigen::MatrixXd h = x_norm.transpose();
    for (int k = 0; k < last; ++k) {
        pre[k] = (net.weights[k] * h).colwise() + net.biases[k];
        post[k] = pre[k].cwiseMax(0.0);
        h = post[k];
    }
    Eigen::MatrixXd out = (net.weights[last] * h).colwise() + net.biases[last];
    Eigen::MatrixXd err = out - y_norm.transpose();
    if (loss_out) *loss_out = err.squaredNorm() / double(err.size());

    MlpGradients g;
    g.d_weights.resize(last + 1);
    g.d_biases.resize(last + 1);
    Eigen::MatrixXd delta = 2.0 * err / double(err.size());
    for (int k = last; k >= 0; --k) {
        Eigen::MatrixXd input = (k == 0) ? Eigen::MatrixXd(x_norm.transpose()) : post[k - 1];
        g.d_weights[k] = delta * input.transpose();
        g.d_biases[k] = delta.rowwise().sum();
        if (k > 0) {
            delta = net.weights[k].transpose() * delta;
            delta = delta.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

namespace {

// zeroes the smallest-magnitude unmasked entries until the zero fraction of
// each matrix reaches the target
void prune_to_sparsity(MlpNetwork& net, double target) {
    for (std::size_t k = 0; k < net.weights.size(); ++k) {
        Eigen::MatrixXd& w = net.weights[k];
        Eigen::MatrixXd& m = net.mask[k];
        const long total = w.size();
        long want_zero = long(std::ceil(target * double(total)));
        long masked = total - long((m.array() != 0.0).count());
        long need = want_zero - masked;
        if (need <= 0) continue;
        std::vector<std::pair<double, long>> mags;
        mags.reserve(std::size_t(total - masked));
        for (long i = 0; i < total; ++i)
            if (m.data()[i] != 0.0) mags.emplace_back(std::abs(w.data()[i]), i);
        std::stable_sort(mags.begin(), mags.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;
        });
        need = std::min<long>(need, long(mags.size()));
        for (long i = 0; i < need; ++i) {
            w.data()[mags[i].second] = 0.0;
            m.data()[mags[i].second] = 0.0;
        }
    }
}

struct Snapshot {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    std::vector<Eigen::MatrixXd> mask;
};

}  // namespace

TrainResult train(const LabeledDataset& data, const GridCase& grid,
                  const std::vector<int>& hidden_sizes, const TrainConfig& cfg) {
    if (data.size() == 0) throw TrainingError("empty dataset");
    auto order = grid.non_slack_gens();
    if (order.empty()) throw TrainingError("no non-slack generators to predict");
    {
        // the learning task assumes a unique dispatch per load; duplicated
        // cost coefficients make ties likely
        std::vector<double> costs;
        for (const auto& gen : grid.gens) costs.push_back(gen.cost);
        std::sort(costs.begin(), costs.end());
        if (std::adjacent_find(costs.begin(), costs.end()) != costs.end())
            std::cerr << "warning: duplicated generator costs; DC-OPF dispatch may be degenerate\n";
    }

    const int n_in = int(data.inputs.cols());
    const int n_out = int(order.size());
    Eigen::MatrixXd targets_nsg(data.size(), n_out);
    for (int i = 0; i < data.size(); ++i)
        for (int j = 0; j < n_out; ++j) targets_nsg(i, j) = data.targets(i, order[j]);

    // scalers from the training split only
    Eigen::MatrixXd x_train(data.train_idx.size(), n_in);
    Eigen::MatrixXd y_train(data.train_idx.size(), n_out);
    for (std::size_t i = 0; i < data.train_idx.size(); ++i) {
        x_train.row(int(i)) = data.inputs.row(data.train_idx[i]);
        y_train.row(int(i)) = targets_nsg.row(data.train_idx[i]);
    }

    MlpNetwork net;
    net.layer_sizes.push_back(n_in);
    for (int h : hidden_sizes) net.layer_sizes.push_back(h);
    net.layer_sizes.push_back(n_out);
    net.x_scale = AffineScaler::fit(x_train);
    net.y_scale = AffineScaler::fit(y_train);

    Rng rng(cfg.seed);
    for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
        int rows = net.layer_sizes[k + 1], cols = net.layer_sizes[k];
        double r = std::sqrt(6.0 / double(rows + cols));
        Eigen::MatrixXd w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-r, r);
        net.weights.push_back(w);
        net.biases.push_back(Eigen::VectorXd::Zero(rows));
        net.mask.push_back(Eigen::MatrixXd::Ones(rows, cols));
    }

    auto normalize_rows = [](const AffineScaler& s, const Eigen::MatrixXd& rows) {
        return (((rows.rowwise() - s.min.transpose()).array().rowwise() /
                 s.range.transpose().array()))
            .matrix();
    };
    Eigen::MatrixXd xn_train = normalize_rows(net.x_scale, x_train);
    Eigen::MatrixXd yn_train = normalize_rows(net.y_scale, y_train);
    Eigen::MatrixXd x_test(data.test_idx.size(), n_in), y_test(data.test_idx.size(), n_out);
    for (std::size_t i = 0; i < data.test_idx.size(); ++i) {
        x_test.row(int(i)) = data.inputs.row(data.test_idx[i]);
        y_test.row(int(i)) = targets_nsg.row(data.test_idx[i]);
    }
    Eigen::MatrixXd xn_test = normalize_rows(net.x_scale, x_test);
    Eigen::MatrixXd yn_test = normalize_rows(net.y_scale, y_test);

    // prune checkpoints: sparsity ramps linearly over the schedule window
    std::vector<std::pair<int, double>> schedule;
    if (cfg.target_sparsity > 0.0 && cfg.prune_steps > 0) {
        for (int s = 1; s <= cfg.prune_steps; ++s) {
            int epoch = cfg.prune_start_epoch +
                        int(std::lround(double(cfg.prune_end_epoch - cfg.prune_start_epoch) *
                                        double(s) / double(cfg.prune_steps)));
            schedule.emplace_back(epoch, cfg.target_sparsity * double(s) / double(cfg.prune_steps));
        }
    }

    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    const bool adam = cfg.optimizer == "adam";
    if (adam) {
        for (const auto& w : net.weights) {
            mw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
            vw.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : net.biases) {
            mb.push_back(Eigen::VectorXd::Zero(b.size()));
            vb.push_back(Eigen::VectorXd::Zero(b.size()));
        }
    } else if (cfg.optimizer != "sgd") {
        throw TrainingError("unknown optimizer: " + cfg.optimizer);
    }
    long adam_t = 0;

    TrainResult result;
    std::vector<int> perm(xn_train.rows());
    std::iota(perm.begin(), perm.end(), 0);

    Snapshot best{net.weights, net.biases, net.mask};
    double best_test = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    bool best_valid = false;
    double sparsity_reached = 0.0;

    const int n_train = int(xn_train.rows());
    const int batch = std::max(1, cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
        rng.shuffle(perm);
        for (int start = 0; start < n_train; start += batch) {
            int len = std::min(batch, n_train - start);
            Eigen::MatrixXd xb(len, n_in), yb(len, n_out);
            for (int i = 0; i < len; ++i) {
                xb.row(i) = xn_train.row(perm[start + i]);
                yb.row(i) = yn_train.row(perm[start + i]);
            }
            double loss = 0.0;
            MlpGradients g = mse_gradients(net, xb, yb, &loss);
            if (!std::isfinite(loss))
                throw TrainingError("training diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch));
            ++adam_t;
            for (std::size_t k = 0; k < net.weights.size(); ++k) {
                Eigen::MatrixXd gw = g.d_weights[k].cwiseProduct(net.mask[k]);
                if (adam) {
                    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
                    mw[k] = b1 * mw[k] + (1 - b1) * gw;
                    vw[k] = b2 * vw[k] + (1 - b2) * gw.cwiseProduct(gw);
                    double c1 = 1.0 - std::pow(b1, double(adam_t));
                    double c2 = 1.0 - std::pow(b2, double(adam_t));
                    net.weights[k] -= (cfg.learning_rate * (mw[k] / c1).array() /
                                       ((vw[k] / c2).array().sqrt() + eps))
                                          .matrix();
                    mb[k] = b1 * mb[k] + (1 - b1) * g.d_biases[k];
                    vb[k] = b2 * vb[k] + (1 - b2) * g.d_biases[k].cwiseProduct(g.d_biases[k]);
                    net.biases[k] -= (cfg.learning_rate * (mb[k] / c1).array() /
                                      ((vb[k] / c2).array().sqrt() + eps))
                                         .matrix();
                } else {
                    net.weights[k] -= cfg.learning_rate * gw;
                    net.biases[k] -= cfg.learning_rate * g.d_biases[k];
                }
                // keep pruned entries exactly zero
                net.weights[k] = net.weights[k].cwiseProduct(net.mask[k]);
            }
        }

        for (const auto& [ep, sp] : schedule)
            if (ep == epoch) {
                prune_to_sparsity(net, sp);
                sparsity_reached = sp;
            }

        TrainLogRow row;
        row.epoch = epoch;
        row.train_mse = mse_loss(net, xn_train, yn_train);
        row.test_mse = xn_test.rows() ? mse_loss(net, xn_test, yn_test) : row.train_mse;
        row.sparsity = net.zero_fraction();
        result.log.push_back(row);
        if (!std::isfinite(row.train_mse))
            throw TrainingError("training diverged at epoch " + std::to_string(epoch));

        // early stopping restricted to epochs that already satisfy the final
        // sparsity target, so the returned snapshot honors the schedule
        bool target_met = schedule.empty() || sparsity_reached >= cfg.target_sparsity;
        if (target_met && row.test_mse < best_test) {
            best_test = row.test_mse;
            best = Snapshot{net.weights, net.biases, net.mask};
            best_epoch = epoch;
            best_valid = true;
        }
    }

    if (best_valid) {
        net.weights = best.weights;
        net.biases = best.biases;
        net.mask = best.mask;
    }
    result.best_epoch = best_valid ? best_epoch : cfg.epochs_max;
    result.best_test_mse =
        best_valid ? best_test : (result.log.empty() ? 0.0 : result.log.back().test_mse);
    net.validate();
    result.net = std::move(net);
    return result;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    int rows = int(j.size());
    int cols = rows ? int(j.at(0).size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m(i, c) = j.at(std::size_t(i)).at(std::size_t(c)).get<double>();
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[int(i)] = j.at(i).get<double>();
    return v;
}

constexpr int kNetFormatVersion = 1;

}  // namespace

std::string serialize_net(const MlpNetwork& net) {
    json j;
    j["format_version"] = kNetFormatVersion;
    j["layers"] = net.layer_sizes;
    j["weights"] = json::array();
    j["biases"] = json::array();
    j["mask"] = json::array();
    for (const auto& w : net.weights) j["weights"].push_back(matrix_to_json(w));
    for (const auto& b : net.biases) j["biases"].push_back(vector_to_json(b));
    for (const auto& m : net.mask) j["mask"].push_back(matrix_to_json(m));
    j["x_scale"] = {{"min", vector_to_json(net.x_scale.min)},
                    {"range", vector_to_json(net.x_scale.range)}};
    j["y_scale"] = {{"min", vector_to_json(net.y_scale.min)},
                    {"range", vector_to_json(net.y_scale.range)}};
    return j.dump(1) + "\n";
}

MlpNetwork deserialize_net(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid network file: ") + e.what());
    }
    try {
        int version = j.at("format_version").get<int>();
        if (version != kNetFormatVersion)
            throw UnsupportedFeatureError("network format_version " + std::to_string(version) +
                                          " not supported (expected " +
                                          std::to_string(kNetFormatVersion) + ")");
        MlpNetwork net;
        net.layer_sizes = j.at("layers").get<std::vector<int>>();
        for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
        for (const auto& b : j.at("biases")) net.biases.push_back(vector_from_json(b));
        for (const auto& m : j.at("mask")) net.mask.push_back(matrix_from_json(m));
        net.x_scale.min = vector_from_json(j.at("x_scale").at("min"));
        net.x_scale.range = vector_from_json(j.at("x_scale").at("range"));
        net.y_scale.min = vector_from_json(j.at("y_scale").at("min"));
        net.y_scale.range = vector_from_json(j.at("y_scale").at("range"));
        net.validate();
        return net;
    } catch (const json::exception& e) {
        throw ParseError(std::string("network file missing or mistyped field: ") + e.what());
    }
}

void save_net(const MlpNetwork& net, const std::string& path) {
    write_file_atomic(path, serialize_net(net));
}

MlpNetwork load_net(const std::string& path) { return deserialize_net(read_file(path)); }

std::uint64_t net_fingerprint(const MlpNetwork& net) { return fnv1a64(serialize_net(net)); }

}  // namespace gridverify
