#include "hits/flowmap_net.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hits/rng.hpp"

namespace hits {

void FlowMapModel::validate() const {
    require(layer_dims.size() >= 2, "layer_dims needs at least input and output");
    require(layer_dims.front() == layer_dims.back(),
            "residual addition requires equal input and output widths");
    require(weights.size() == layer_dims.size() - 1, "one weight matrix per layer expected");
    require(biases.size() == weights.size(), "one bias vector per layer expected");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        require(weights[l].rows() == layer_dims[l + 1] && weights[l].cols() == layer_dims[l],
                "weight shape mismatch at layer " + std::to_string(l));
        require(biases[l].size() == layer_dims[l + 1],
                "bias shape mismatch at layer " + std::to_string(l));
        require(weights[l].allFinite() && biases[l].allFinite(),
                "non-finite parameters at layer " + std::to_string(l));
    }
    require(dt > 0.0, "model dt must be positive");
}

ParamGrads ParamGrads::zeros_like(const FlowMapModel& m) {
    ParamGrads g;
    for (const auto& w : m.weights) g.weights.push_back(Mat::Zero(w.rows(), w.cols()));
    for (const auto& b : m.biases) g.biases.push_back(Vec::Zero(b.size()));
    return g;
}

double ParamGrads::max_abs() const {
    double v = 0.0;
    for (const auto& w : weights) v = std::max(v, w.cwiseAbs().maxCoeff());
    for (const auto& b : biases) v = std::max(v, b.cwiseAbs().maxCoeff());
    return v;
}

AdamState AdamState::zeros_like(const FlowMapModel& m) {
    AdamState st;
    for (const auto& w : m.weights) {
        st.m_w.push_back(Mat::Zero(w.rows(), w.cols()));
        st.v_w.push_back(Mat::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : m.biases) {
        st.m_b.push_back(Vec::Zero(b.size()));
        st.v_b.push_back(Vec::Zero(b.size()));
    }
    return st;
}

void TrainConfig::validate() const {
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(max_epochs >= 1, "max_epochs must be >= 1");
    require(stop_threshold > 0.0, "stop_threshold must be positive");
    require(p_steps >= 1, "p_steps must be >= 1");
    require(minibatch_size >= 1, "minibatch_size must be >= 1");
}

std::string TrainConfig::digest() const {
    // FNV-1a over the canonical field rendering.
    char buf[256];
    std::snprintf(buf, sizeof(buf), "lr=%.17g;epochs=%d;stop=%.17g;p=%d;seed=%" PRIu64 ";mbt=%d;mbs=%d",
                  learning_rate, max_epochs, stop_threshold, p_steps, seed, minibatch_threshold,
                  minibatch_size);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* c = buf; *c; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 0x100000001b3ULL;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016" PRIx64, h);
    return out;
}

FlowMapModel init_model(const std::string& system, double dt, const std::vector<int>& layer_dims,
                        std::uint64_t seed) {
    FlowMapModel m;
    m.system = system;
    m.dt = dt;
    m.layer_dims = layer_dims;
    Rng rng = Rng::substream(seed, 0);
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Mat w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
        }
        Vec b(fan_out);
        for (int r = 0; r < fan_out; ++r) b[r] = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    m.validate();
    return m;
}

namespace {

// Forward pass keeping per-layer inputs and preactivations for backprop.
struct StepCache {
    std::vector<Mat> inputs;   // Z_l for l = 0..L-1 (layer inputs)
    std::vector<Mat> preacts;  // H_l for l = 0..L-1
};

Mat net_forward(const FlowMapModel& m, const Mat& X, StepCache* cache) {
    const int L = m.layers();
    Mat z = X;
    for (int l = 0; l < L; ++l) {
        if (cache) cache->inputs.push_back(z);
        Mat h = z * m.weights[l].transpose();
        h.rowwise() += m.biases[l].transpose();
        if (cache) cache->preacts.push_back(h);
        if (l + 1 < L) {
            z = h.array().max(0.0).matrix();  // ReLU; subgradient at 0 is 0
        } else {
            z = std::move(h);
        }
    }
    return z;
}

// Backpropagates dL/d(output of net) through one residual step, accumulating
// parameter gradients and returning dL/d(input).
Mat net_backward(const FlowMapModel& m, const StepCache& cache, const Mat& g_out, ParamGrads& grads) {
    const int L = m.layers();
    Mat dz = g_out;
    for (int l = L - 1; l >= 0; --l) {
        Mat dh;
        if (l == L - 1) {
            dh = std::move(dz);
        } else {
            dh = (dz.array() * (cache.preacts[l].array() > 0.0).cast<double>()).matrix();
        }
        grads.weights[l] += dh.transpose() * cache.inputs[l];
        grads.biases[l] += dh.colwise().sum().transpose();
        dz = dh * m.weights[l];
    }
    return dz;
}

}  // namespace

Mat forward(const FlowMapModel& m, const Mat& X) {
    require(X.cols() == m.dim(), "batch column count must equal the model state dimension");
    if (X.rows() == 0) return X;
    return X + net_forward(m, X, nullptr);
}

std::vector<Mat> compose_forward(const FlowMapModel& m, const Mat& X, int k) {
    require(k >= 1, "composition count must be >= 1");
    require(X.cols() == m.dim(), "batch column count must equal the model state dimension");
    std::vector<Mat> out;
    out.reserve(k);
    Mat x = X;
    for (int s = 1; s <= k; ++s) {
        x = forward(m, x);
        if (!x.allFinite()) throw DivergenceError("flow-map composition step " + std::to_string(s));
        out.push_back(x);
    }
    return out;
}

LossGrad loss_and_grad(const FlowMapModel& m, const Mat& x0, const std::vector<Mat>& targets) {
    const int p = static_cast<int>(targets.size());
    require(p >= 1, "need at least one target step");
    const auto n = x0.rows();
    require(n >= 1, "empty batch");

    LossGrad out;
    out.grads = ParamGrads::zeros_like(m);
    const double scale = 1.0 / (static_cast<double>(n) * p);

    // Forward through the composition, caching per-step activations.
    std::vector<StepCache> caches(p);
    std::vector<Mat> preds(p);
    Mat x = x0;
    for (int k = 0; k < p; ++k) {
        x = x + net_forward(m, x, &caches[k]);
        preds[k] = x;
    }

    double loss = 0.0;
    for (int k = 0; k < p; ++k) loss += (preds[k] - targets[k]).squaredNorm();
    loss *= scale;
    out.loss = loss;
    out.one_step_mse = (preds[0] - targets[0]).squaredNorm() / static_cast<double>(n);
    if (!std::isfinite(loss)) return out;  // caller decides how to report

    // Reverse pass: dL/dx_hat_k accumulates the direct loss term at k plus
    // the chained term from step k+1 (identity + net Jacobian).
    Mat g = 2.0 * scale * (preds[p - 1] - targets[p - 1]);
    for (int k = p - 1; k >= 0; --k) {
        Mat g_in = net_backward(m, caches[k], g, out.grads);
        g += g_in;  // residual path: d(x + net(x))/dx = I + dnet/dx
        if (k > 0) g += 2.0 * scale * (preds[k - 1] - targets[k - 1]);
    }
    return out;
}

LossGrad loss_and_grad(const FlowMapModel& m, const std::vector<Trajectory>& batch, int p) {
    require(!batch.empty(), "empty batch");
    const int d = m.dim();
    Mat x0(static_cast<int>(batch.size()), d);
    std::vector<Mat> targets(p, Mat(static_cast<int>(batch.size()), d));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        require(batch[i].steps() >= p,
                "trajectory " + std::to_string(i) + " shorter than p+1 states");
        require(batch[i].dim() == d, "trajectory dimension mismatch");
        x0.row(static_cast<int>(i)) = batch[i].states.row(0);
        for (int k = 1; k <= p; ++k) targets[k - 1].row(static_cast<int>(i)) = batch[i].states.row(k);
    }
    return loss_and_grad(m, x0, targets);
}

void adam_update(FlowMapModel& params, const ParamGrads& grads, AdamState& st, double lr) {
    require(grads.weights.size() == params.weights.size() && grads.biases.size() == params.biases.size(),
            "gradient shape mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    st.t += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        require(grads.weights[l].rows() == params.weights[l].rows() &&
                    grads.weights[l].cols() == params.weights[l].cols() &&
                    grads.biases[l].size() == params.biases[l].size(),
                "gradient shape mismatch at layer " + std::to_string(l));
        st.m_w[l] = beta1 * st.m_w[l] + (1.0 - beta1) * grads.weights[l];
        st.v_w[l] = beta2 * st.v_w[l] + (1.0 - beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        params.weights[l] -=
            (lr * (st.m_w[l] / c1).array() / ((st.v_w[l] / c2).array().sqrt() + eps)).matrix();
        st.m_b[l] = beta1 * st.m_b[l] + (1.0 - beta1) * grads.biases[l];
        st.v_b[l] = beta2 * st.v_b[l] + (1.0 - beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        params.biases[l] -=
            (lr * (st.m_b[l] / c1).array() / ((st.v_b[l] / c2).array().sqrt() + eps)).matrix();
    }
}

TrainResult train_from(FlowMapModel model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    require(!data.trajectories.empty(), "empty dataset");
    require(std::abs(data.dt() - model.dt) <= 1e-12 * std::max(1.0, std::abs(model.dt)),
            "dataset dt must equal the model dt");
    require(data.steps() >= cfg.p_steps, "dataset trajectories shorter than p_steps");

    const int n = data.size();
    const int d = model.dim();
    require(data.dim() == d, "dataset dimension mismatch");
    const int p = cfg.p_steps;

    Mat x0(n, d);
    std::vector<Mat> targets(p, Mat(n, d));
    for (int i = 0; i < n; ++i) {
        x0.row(i) = data.trajectories[i].states.row(0);
        for (int k = 1; k <= p; ++k) targets[k - 1].row(i) = data.trajectories[i].states.row(k);
    }

    const bool full_batch = n <= cfg.minibatch_threshold;
    AdamState st = AdamState::zeros_like(model);
    TrainResult result;
    result.history.reserve(std::min(cfg.max_epochs, 1 << 20));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        EpochRecord rec;
        if (full_batch) {
            LossGrad lg = loss_and_grad(model, x0, targets);
            if (!std::isfinite(lg.loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
            adam_update(model, lg.grads, st, cfg.learning_rate);
            rec.loss = lg.loss;
            rec.one_step_mse = lg.one_step_mse;
        } else {
            // Seeded shuffle, one substream per epoch.
            Rng rng = Rng::substream(cfg.seed, 0x5u + static_cast<std::uint64_t>(epoch));
            for (int i = n - 1; i > 0; --i) {
                int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
                std::swap(order[i], order[j]);
            }
            double loss_sum = 0.0;
            for (int start = 0; start < n; start += cfg.minibatch_size) {
                const int b = std::min(cfg.minibatch_size, n - start);
                Mat mb_x0(b, d);
                std::vector<Mat> mb_t(p, Mat(b, d));
                for (int i = 0; i < b; ++i) {
                    mb_x0.row(i) = x0.row(order[start + i]);
                    for (int k = 0; k < p; ++k) mb_t[k].row(i) = targets[k].row(order[start + i]);
                }
                LossGrad lg = loss_and_grad(model, mb_x0, mb_t);
                if (!std::isfinite(lg.loss))
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
                adam_update(model, lg.grads, st, cfg.learning_rate);
                loss_sum += lg.loss * b;
            }
            rec.loss = loss_sum / n;
            // Stop criterion is evaluated on the full training set.
            Mat pred1 = forward(model, x0);
            rec.one_step_mse = (pred1 - targets[0]).squaredNorm() / static_cast<double>(n);
        }
        result.history.push_back(rec);
        if (rec.one_step_mse < cfg.stop_threshold) {
            result.stopped_early = true;
            break;
        }
    }
    result.model = std::move(model);
    return result;
}

TrainResult train(const Dataset& data, const std::vector<int>& layer_dims, double dt,
                  const TrainConfig& cfg) {
    return train_from(init_model(data.system, dt, layer_dims, cfg.seed), data, cfg);
}

namespace {

void write_doubles(std::ostream& os, const double* v, long count) {
    char buf[32];
    for (long i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        os << buf << (i + 1 < count ? " " : "\n");
    }
}

}  // namespace

void save_model(const FlowMapModel& m, const std::string& path, const std::string& digest) {
    m.validate();
    std::ofstream os(path);
    if (!os) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
    os << "hits-flowmap 1\n";
    os << "system " << m.system << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", m.dt);
    os << "dt " << buf << "\n";
    os << "layer_dims";
    for (int d : m.layer_dims) os << ' ' << d;
    os << "\n";
    os << "train_config_digest " << (digest.empty() ? "-" : digest) << "\n";
    for (int l = 0; l < m.layers(); ++l) {
        os << "W" << l << " " << m.weights[l].rows() << " " << m.weights[l].cols() << "\n";
        for (int r = 0; r < m.weights[l].rows(); ++r)
            write_doubles(os, m.weights[l].row(r).eval().data(), m.weights[l].cols());
        os << "b" << l << " " << m.biases[l].size() << "\n";
        write_doubles(os, m.biases[l].data(), m.biases[l].size());
    }
    os << "end\n";
    if (!os) throw LoadError(LoadError::Kind::io, "write failed for " + path);
}

FlowMapModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw LoadError(LoadError::Kind::io, "cannot open " + path);
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "hits-flowmap")
        throw LoadError(LoadError::Kind::version_mismatch, "not a hits flow-map file: " + path);
    if (version != 1)
        throw LoadError(LoadError::Kind::version_mismatch,
                        "unsupported flow-map format version " + std::to_string(version));

    FlowMapModel m;
    std::string key;
    if (!(is >> key >> m.system) || key != "system")
        throw LoadError(LoadError::Kind::truncated, "missing system field");
    if (!(is >> key >> m.dt) || key != "dt")
        throw LoadError(LoadError::Kind::truncated, "missing dt field");
    if (!(is >> key) || key != "layer_dims")
        throw LoadError(LoadError::Kind::truncated, "missing layer_dims field");
    {
        std::string rest;
        std::getline(is, rest);
        std::istringstream ls(rest);
        int v;
        while (ls >> v) m.layer_dims.push_back(v);
    }
    std::string digest;
    if (!(is >> key >> digest) || key != "train_config_digest")
        throw LoadError(LoadError::Kind::truncated, "missing train_config_digest field");

    if (m.layer_dims.size() < 2)
        throw LoadError(LoadError::Kind::inconsistent, "layer_dims needs at least two entries");
    if (m.layer_dims.front() != m.layer_dims.back())
        throw LoadError(LoadError::Kind::inconsistent,
                        "layer_dims ends differ; residual model requires equal input/output widths");

    const int L = static_cast<int>(m.layer_dims.size()) - 1;
    for (int l = 0; l < L; ++l) {
        long rows = 0, cols = 0;
        if (!(is >> key >> rows >> cols) || key != "W" + std::to_string(l))
            throw LoadError(LoadError::Kind::truncated, "missing weight block " + std::to_string(l));
        if (rows != m.layer_dims[l + 1] || cols != m.layer_dims[l])
            throw LoadError(LoadError::Kind::inconsistent,
                            "weight block " + std::to_string(l) + " does not match layer_dims");
        Mat w(rows, cols);
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) {
                if (!(is >> w(r, c)))
                    throw LoadError(LoadError::Kind::truncated, "weight block " + std::to_string(l) + " truncated");
            }
        }
        long blen = 0;
        if (!(is >> key >> blen) || key != "b" + std::to_string(l))
            throw LoadError(LoadError::Kind::truncated, "missing bias block " + std::to_string(l));
        if (blen != m.layer_dims[l + 1])
            throw LoadError(LoadError::Kind::inconsistent,
                            "bias block " + std::to_string(l) + " does not match layer_dims");
        Vec b(blen);
        for (long r = 0; r < blen; ++r) {
            if (!(is >> b[r]))
                throw LoadError(LoadError::Kind::truncated, "bias block " + std::to_string(l) + " truncated");
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    if (!(is >> key) || key != "end")
        throw LoadError(LoadError::Kind::truncated, "missing end marker");
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw LoadError(LoadError::Kind::inconsistent, e.what());
    }
    return m;
}

}  // namespace hits
