#ifndef HITS_FLOWMAP_NET_HPP
#define HITS_FLOWMAP_NET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hits/dataset.hpp"
#include "hits/types.hpp"

namespace hits {

/// Residual MLP flow map for one step size: x_next = x + net(x), where net is
/// a feed-forward network with ReLU on hidden layers and identity output.
/// With all parameters zero the model is the identity map.
struct FlowMapModel {
    std::string system;
    double dt = 0.0;
    std::vector<int> layer_dims;   // [D, h_1, ..., h_{M-1}, D]
    std::vector<Mat> weights;      // weights[l] has shape dims[l+1] x dims[l]
    std::vector<Vec> biases;       // biases[l] has length dims[l+1]

    int dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
    int layers() const { return static_cast<int>(weights.size()); }

    /// Shape validation: first and last layer dims equal, weights/biases match
    /// layer_dims, everything finite. Throws std::invalid_argument.
    void validate() const;
};

/// Gradient (or any parameter-shaped bundle) matching a model's weights and
/// biases.
struct ParamGrads {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    static ParamGrads zeros_like(const FlowMapModel& m);
    double max_abs() const;
};

/// Adam moment accumulators, shaped like the parameters.
struct AdamState {
    std::vector<Mat> m_w, v_w;
    std::vector<Vec> m_b, v_b;
    std::int64_t t = 0;

    static AdamState zeros_like(const FlowMapModel& m);
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int max_epochs = 100000;
    double stop_threshold = 1e-8;  // one-step MSE
    int p_steps = 5;
    std::uint64_t seed = 0;
    int minibatch_threshold = 4096;  // full batch at or below this many trajectories
    int minibatch_size = 1024;

    void validate() const;
    /// Stable digest of the configuration, stored in model files.
    std::string digest() const;
};

/// Uniformly initialized model: weights and biases of layer l drawn from
/// U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
FlowMapModel init_model(const std::string& system, double dt, const std::vector<int>& layer_dims,
                        std::uint64_t seed);

/// One flow-map step applied to every row of X: X + net(X).
Mat forward(const FlowMapModel& m, const Mat& X);

/// k composed steps; result[s] is forward applied s+1 times to X. Throws
/// DivergenceError naming the step at which activations went non-finite.
std::vector<Mat> compose_forward(const FlowMapModel& m, const Mat& X, int k);

struct LossGrad {
    double loss = 0.0;          // (1/(n*p)) sum_i sum_k |x_hat - x|^2
    double one_step_mse = 0.0;  // (1/n) sum_i |x_hat_1 - x_1|^2
    ParamGrads grads;
};

/// Mean squared multi-step prediction loss and its exact reverse-mode
/// gradient. Predictions are seeded at each trajectory's first state and all
/// p composed steps contribute; gradients backpropagate through the full
/// composition including the residual paths. Each trajectory must have at
/// least p+1 states.
LossGrad loss_and_grad(const FlowMapModel& m, const std::vector<Trajectory>& batch, int p);

/// Same loss/gradient on pre-assembled matrices: x0 holds the first states,
/// targets[k-1] the states after k steps.
LossGrad loss_and_grad(const FlowMapModel& m, const Mat& x0, const std::vector<Mat>& targets);

/// Standard Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias
/// correction); increments st.t and updates the model parameters in place.
void adam_update(FlowMapModel& params, const ParamGrads& grads, AdamState& st, double lr);

struct EpochRecord {
    double loss = 0.0;
    double one_step_mse = 0.0;
};

struct TrainResult {
    FlowMapModel model;
    std::vector<EpochRecord> history;
    bool stopped_early = false;  // one-step MSE reached the stop threshold
};

/// Trains a freshly initialized model on the dataset (dataset dt must equal
/// the model dt; trajectories must cover cfg.p_steps). Deterministic given
/// cfg.seed.
TrainResult train(const Dataset& data, const std::vector<int>& layer_dims, double dt,
                  const TrainConfig& cfg);

/// Trains from an explicit starting model (used for warm starts and for
/// identity-initialized models).
TrainResult train_from(FlowMapModel model, const Dataset& data, const TrainConfig& cfg);

/// Versioned text persistence; numbers are written with 17 significant
/// digits so a round-trip is bitwise. Layout documented in docs/formats.md.
void save_model(const FlowMapModel& m, const std::string& path,
                const std::string& train_config_digest = "");
FlowMapModel load_model(const std::string& path);

}  // namespace hits

#endif
