#pragma once

#include "gridverify/dataset.hpp"
#include "gridverify/linmodel.hpp"
#include "gridverify/mlp.hpp"

namespace gridverify {

enum class BoundProvenance { Interval, LpRelax, Milp };
enum class Stability { Free, AlwaysActive, AlwaysInactive };

// How ReLU phases may be fixed in the encoding. Certified fixes only neurons
// whose tightened bounds prove the phase (sound). Dataset additionally fixes
// neurons whose pre-activation sign never flips on a dataset, which matches
// the reference experimental pipeline but is not a domain-wide proof. Off is
// certified-only fixing as well: provably stable neurons never need a binary.
enum class StabilityMode { Off, Certified, Dataset };

const char* to_string(StabilityMode m);
StabilityMode stability_mode_from_string(const std::string& s);

struct NeuronBound {
    double lo = 0.0;
    double hi = 0.0;
    BoundProvenance prov = BoundProvenance::Interval;
    Stability stab = Stability::Free;
    bool dataset_based = false;  // true when stab came from dataset evidence
};

struct NeuronBounds {
    std::vector<std::vector<NeuronBound>> layers;  // hidden layers only

    int n_hidden_layers() const { return int(layers.size()); }
    // true when no neuron is fixed on dataset evidence alone
    bool certified() const;
    int count(Stability s) const;
};

// Layer-by-layer interval propagation from the input box, with provably
// stable neurons marked as fixed.
NeuronBounds interval_bounds(const MlpNetwork& net, const GridCase& grid,
                             const InputDomain& domain);

struct TightenOptions {
    long milp_node_cap = 20000;  // per neuron solve; the last sound bound is kept on cap
};

// Shrinks pre-activation bounds by maximizing/minimizing each neuron input
// subject to the encoding of the preceding layers (binaries relaxed in the
// LpRelax stage, full MILP in the Milp stage). Bounds never grow; newly
// proven stabilities are recorded. Layers are processed in order so earlier
// tightenings feed later layers.
void tighten_bounds(const MlpNetwork& net, const GridCase& grid, const InputDomain& domain,
                    NeuronBounds& bounds, BoundProvenance stage, const TightenOptions& opts = {});

// Fixes neurons whose activation sign is constant across every dataset row
// (train and test). Downstream bounds are re-propagated under the fixed
// semantics so the encoding stays feasible on the whole domain.
void apply_dataset_stability(const MlpNetwork& net, const LabeledDataset& data,
                             NeuronBounds& bounds);

// Big-M model of the network plus input domain, output map, and the slack
// completion equality. Stability-fixed neurons carry no binary variable.
struct NetworkEncoding {
    LinearModel model;
    std::vector<int> pd_vars;                   // load inputs, MW
    std::vector<std::vector<int>> zhat_vars;    // per hidden layer
    std::vector<std::vector<int>> z_vars;
    std::vector<std::vector<int>> bin_vars;     // -1 where no binary exists
    std::vector<int> output_vars;               // predicted non-slack dispatch, MW
    int slack_var = -1;                         // completed slack dispatch, MW
    std::vector<int> output_gens;               // generator index per output
    int slack_gen = -1;
    int n_free_neurons = 0;
    NeuronBounds bounds;
};

NetworkEncoding encode_network(const MlpNetwork& net, const GridCase& grid,
                               const InputDomain& domain, const NeuronBounds& bounds);

// bounds cache keyed on the network fingerprint and domain
void save_bounds_cache(const NeuronBounds& bounds, const MlpNetwork& net,
                       const InputDomain& domain, const std::string& path);
bool load_bounds_cache(const MlpNetwork& net, const InputDomain& domain, const std::string& path,
                       NeuronBounds* out);

// Full bound-preparation pipeline: interval propagation, optional
// dataset-based stability fixing, then the requested tightening stages.
struct BoundPipelineOptions {
    StabilityMode stability = StabilityMode::Certified;
    bool tighten_lp = true;
    bool tighten_milp = false;
    TightenOptions tighten;
};

NeuronBounds prepare_bounds(const MlpNetwork& net, const GridCase& grid, const InputDomain& domain,
                            const BoundPipelineOptions& opts,
                            const LabeledDataset* dataset = nullptr);

}  // namespace gridverify
