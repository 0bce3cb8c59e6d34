#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gridverify/dataset.hpp"
#include "gridverify/grid.hpp"

namespace gridverify {

// Per-feature min/range affine normalization.
struct AffineScaler {
    Eigen::VectorXd min;
    Eigen::VectorXd range;  // strictly positive (degenerate features get 1)

    static AffineScaler fit(const Eigen::MatrixXd& rows);
    static AffineScaler identity(int dim);
    Eigen::VectorXd normalize(const Eigen::VectorXd& x) const {
        return (x - min).cwiseQuotient(range);
    }
    Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const {
        return y.cwiseProduct(range) + min;
    }
};

// Fully connected ReLU network mapping a load vector [MW] to the non-slack
// generator dispatch [MW]. Input/output normalization is stored inside the
// network so the MILP encoding can fold it into the boundary layers exactly.
struct MlpNetwork {
    std::vector<int> layer_sizes;            // [n_in, N_1..N_K, n_out]
    std::vector<Eigen::MatrixXd> weights;    // K+1 matrices, layer_sizes[k+1] x layer_sizes[k]
    std::vector<Eigen::VectorXd> biases;
    std::vector<Eigen::MatrixXd> mask;       // 1 = trainable, 0 = frozen zero
    AffineScaler x_scale, y_scale;

    int n_inputs() const { return layer_sizes.front(); }
    int n_outputs() const { return layer_sizes.back(); }
    int n_hidden_layers() const { return int(layer_sizes.size()) - 2; }

    Eigen::VectorXd forward(const Eigen::VectorXd& load_mw) const;
    // rows = samples
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& loads_mw) const;

    // Weights/biases of layer k with the normalization composed in, so that
    // chaining the folded layers maps physical MW inputs to MW outputs.
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> folded_layer(int k) const;

    double zero_fraction() const;
    void validate() const;
};

// Dispatch completion: the slack generator covers demand minus the predicted
// non-slack dispatch. Output ordered by generator index.
Eigen::VectorXd complete_dispatch(const GridCase& grid, const Eigen::VectorXd& net_output_mw,
                                  const Eigen::VectorXd& load_mw);

struct TrainConfig {
    int epochs_max = 250;
    int batch_size = 40;
    double learning_rate = 0.1;
    std::string optimizer = "sgd";  // or "adam"
    int prune_start_epoch = 50;
    int prune_end_epoch = 200;
    int prune_steps = 10;
    double target_sparsity = 0.8;
    std::uint64_t seed = 1;
};

struct TrainLogRow {
    int epoch = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double sparsity = 0.0;
};

struct TrainResult {
    MlpNetwork net;
    std::vector<TrainLogRow> log;
    int best_epoch = 0;
    double best_test_mse = 0.0;
};

// Minibatch gradient descent on the MSE over normalized non-slack dispatch,
// magnitude pruning on the configured schedule, early stopping across the
// epochs that already satisfy the final sparsity target.
TrainResult train(const LabeledDataset& data, const GridCase& grid,
                  const std::vector<int>& hidden_sizes, const TrainConfig& cfg);

// MSE and analytic gradients in normalized space (rows = samples); used by
// the trainer and by the finite-difference checks.
struct MlpGradients {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
};
double mse_loss(const MlpNetwork& net, const Eigen::MatrixXd& x_norm,
                const Eigen::MatrixXd& y_norm);
MlpGradients mse_gradients(const MlpNetwork& net, const Eigen::MatrixXd& x_norm,
                           const Eigen::MatrixXd& y_norm, double* loss_out = nullptr);

// Lossless JSON serialization; round-trips bit-exactly.
void save_net(const MlpNetwork& net, const std::string& path);
MlpNetwork load_net(const std::string& path);
std::string serialize_net(const MlpNetwork& net);
MlpNetwork deserialize_net(const std::string& text);
std::uint64_t net_fingerprint(const MlpNetwork& net);

}  // namespace gridverify
