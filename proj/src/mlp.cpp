#include "wmbench/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wmbench/hash.hpp"

namespace wmbench {

namespace {
constexpr double kProbClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
} // namespace

bool Dataset::has_both_classes() const {
    bool pos = false, neg = false;
    for (int label : y) (label ? pos : neg) = true;
    return pos && neg;
}

MLPParams MLPParams::init(const std::vector<int>& sizes, uint64_t seed) {
    if (sizes.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
    for (int s : sizes) {
        if (s < 1) throw std::invalid_argument("layer sizes must be positive");
    }
    MLPParams p;
    p.sizes = sizes;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / fan_in);
        Rng rng(mix3(seed, 0x6c5fULL, static_cast<uint64_t>(l)));
        std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
        for (double& x : w) x = (2.0 * rng.next_unit() - 1.0) * limit;
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(static_cast<size_t>(fan_out), 0.0);
    }
    return p;
}

size_t MLPParams::parameter_count() const {
    size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

namespace {

// Forward pass keeping post-activation values per layer for backprop.
// activations[0] is the input; activations.back() is the output probability.
double forward_cached(const MLPParams& p, const EmbeddingVector& x,
                      std::vector<std::vector<double>>& activations) {
    if (static_cast<int>(x.size()) != p.sizes.front()) {
        throw std::invalid_argument("input dimension mismatch");
    }
    const size_t layers = p.weights.size();
    activations.resize(layers + 1);
    activations[0] = x;
    for (size_t l = 0; l < layers; ++l) {
        const int in = p.sizes[l];
        const int out = p.sizes[l + 1];
        auto& a = activations[l + 1];
        a.assign(static_cast<size_t>(out), 0.0);
        const auto& prev = activations[l];
        const double* w = p.weights[l].data();
        for (int o = 0; o < out; ++o) {
            double z = p.biases[l][static_cast<size_t>(o)];
            const double* row = w + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) z += row[i] * prev[static_cast<size_t>(i)];
            const bool last = l + 1 == layers;
            a[static_cast<size_t>(o)] = last ? sigmoid(z) : std::max(0.0, z);
        }
    }
    return activations.back()[0];
}

void accumulate_grad(const MLPParams& p, const std::vector<std::vector<double>>& activations,
                     int label, MLPGradients& g, double scale) {
    const size_t layers = p.weights.size();
    // d(BCE)/dz at the sigmoid output is (prob - y)
    std::vector<double> delta{(activations.back()[0] - static_cast<double>(label)) * scale};
    for (size_t l = layers; l-- > 0;) {
        const int in = p.sizes[l];
        const int out = p.sizes[l + 1];
        const auto& prev = activations[l];
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            g.d_biases[l][static_cast<size_t>(o)] += d;
            double* grow = g.d_weights[l].data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) grow[i] += d * prev[static_cast<size_t>(i)];
        }
        if (l == 0) break;
        std::vector<double> next_delta(static_cast<size_t>(in), 0.0);
        const double* w = p.weights[l].data();
        for (int o = 0; o < out; ++o) {
            const double d = delta[static_cast<size_t>(o)];
            const double* row = w + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) next_delta[static_cast<size_t>(i)] += d * row[i];
        }
        // ReLU gate: activations[l] > 0 iff the pre-activation was positive
        for (int i = 0; i < in; ++i) {
            if (prev[static_cast<size_t>(i)] <= 0.0) next_delta[static_cast<size_t>(i)] = 0.0;
        }
        delta = std::move(next_delta);
    }
}

double bce(double prob, int label) {
    const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
    return label ? -std::log(p) : -std::log(1.0 - p);
}

} // namespace

double mlp_forward(const MLPParams& params, const EmbeddingVector& x) {
    std::vector<std::vector<double>> activations;
    return forward_cached(params, x, activations);
}

MLPGradients mlp_loss_and_grad(const MLPParams& params, const std::vector<EmbeddingVector>& x,
                               const std::vector<int>& y) {
    if (x.empty() || x.size() != y.size()) throw std::invalid_argument("bad batch");
    MLPGradients g;
    for (const auto& w : params.weights) g.d_weights.emplace_back(w.size(), 0.0);
    for (const auto& b : params.biases) g.d_biases.emplace_back(b.size(), 0.0);

    const double scale = 1.0 / static_cast<double>(x.size());
    std::vector<std::vector<double>> activations;
    for (size_t s = 0; s < x.size(); ++s) {
        const double prob = forward_cached(params, x[s], activations);
        g.loss += bce(prob, y[s]) * scale;
        accumulate_grad(params, activations, y[s], g, scale);
    }
    return g;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
    int64_t t = 0;

    explicit AdamState(const MLPParams& p) {
        for (const auto& w : p.weights) {
            m_w.emplace_back(w.size(), 0.0);
            v_w.emplace_back(w.size(), 0.0);
        }
        for (const auto& b : p.biases) {
            m_b.emplace_back(b.size(), 0.0);
            v_b.emplace_back(b.size(), 0.0);
        }
    }
};

void adam_step(std::vector<double>& param, const std::vector<double>& grad,
               std::vector<double>& m, std::vector<double>& v, const TrainConfig& cfg,
               double lr, double bc1, double bc2) {
    for (size_t i = 0; i < param.size(); ++i) {
        // torch Adam semantics: weight decay folds into the gradient
        const double g = grad[i] + cfg.weight_decay * param[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

} // namespace

TrainResult train_mlp(MLPParams params, const Dataset& dataset, const TrainConfig& config) {
    if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
    if (!dataset.has_both_classes()) throw std::invalid_argument("dataset must contain both classes");
    if (dataset.dim() != params.sizes.front()) {
        throw std::invalid_argument("dataset dimension does not match network input");
    }
    if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

    TrainResult result;
    AdamState adam(params);
    double lr = config.learning_rate;
    double best_loss = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    const size_t n = dataset.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<EmbeddingVector> batch_x;
    std::vector<int> batch_y;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle) {
            Rng rng(mix3(config.seed, 0x5b1dULL, static_cast<uint64_t>(epoch)));
            for (size_t i = n; i > 1; --i) {
                const size_t j = rng.next_below(i);
                std::swap(order[i - 1], order[j]);
            }
        }

        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(n, start + static_cast<size_t>(config.batch_size));
            batch_x.clear();
            batch_y.clear();
            for (size_t i = start; i < end; ++i) {
                batch_x.push_back(dataset.x[order[i]]);
                batch_y.push_back(dataset.y[order[i]]);
            }
            const MLPGradients g = mlp_loss_and_grad(params, batch_x, batch_y);
            epoch_loss += g.loss * static_cast<double>(end - start);

            adam.t += 1;
            const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.t));
            for (size_t l = 0; l < params.weights.size(); ++l) {
                adam_step(params.weights[l], g.d_weights[l], adam.m_w[l], adam.v_w[l], config,
                          lr, bc1, bc2);
                adam_step(params.biases[l], g.d_biases[l], adam.m_b[l], adam.v_b[l], config,
                          lr, bc1, bc2);
            }
        }
        epoch_loss /= static_cast<double>(n);
        result.epoch_loss.push_back(epoch_loss);

        // plateau scheduler on training loss
        if (epoch_loss < best_loss * (1.0 - config.plateau_threshold)) {
            best_loss = epoch_loss;
            bad_epochs = 0;
        } else if (++bad_epochs > config.plateau_patience) {
            lr *= config.plateau_factor;
            bad_epochs = 0;
        }
    }

    result.params = std::move(params);
    result.final_learning_rate = lr;
    return result;
}

} // namespace wmbench
