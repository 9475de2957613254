#ifndef DERMCASCADE_LINEAR_MODEL_HPP
#define DERMCASCADE_LINEAR_MODEL_HPP

// Multinomial logistic regression over sparse rows.
//
// Objective: mean softmax cross-entropy over the batch + l2 * ||W||^2
// (the bias is not penalized). Training is mini-batch, single-threaded and
// bit-reproducible for a fixed seed.

#include "dermcascade/error.hpp"
#include "dermcascade/featurizer.hpp"
#include "dermcascade/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace dermcascade {

enum class Optimizer { adam, sgd };

inline Optimizer parse_optimizer(std::string_view s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "sgd") return Optimizer::sgd;
    throw Error("unknown optimizer '" + std::string(s) + "'");
}

inline const char* to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    std::size_t epochs = 10;
    double l2 = 1e-4;
    std::uint64_t seed = 42;
    Optimizer optimizer = Optimizer::adam;

    void validate() const {
        if (batch_size == 0) throw Error("batch size must be positive");
        if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
        if (!(l2 >= 0.0)) throw Error("l2 must be non-negative");
    }
};

struct LinearModel {
    std::size_t num_classes = 0;
    std::size_t num_features = 0;
    std::vector<double> weights;  // row-major, num_classes x num_features
    std::vector<double> bias;     // num_classes
    std::vector<std::string> class_names;

    LinearModel() = default;
    LinearModel(std::vector<std::string> names, std::size_t features)
        : num_classes(names.size()), num_features(features), weights(names.size() * features, 0.0),
          bias(names.size(), 0.0), class_names(std::move(names)) {}

    double& w(std::size_t k, std::size_t f) { return weights[k * num_features + f]; }
    double w(std::size_t k, std::size_t f) const { return weights[k * num_features + f]; }
};

/// Row of labeled sparse examples; labels are class indices.
struct Batch {
    std::span<const SparseVector> rows;
    std::span<const std::size_t> labels;
};

namespace detail {

inline void check_row(const LinearModel& m, const SparseVector& x) {
    for (const auto& f : x)
        if (f.index >= m.num_features)
            throw Error("feature index " + std::to_string(f.index) + " out of range for model with " +
                        std::to_string(m.num_features) + " features");
}

inline void logits(const LinearModel& m, const SparseVector& x, std::vector<double>& out) {
    out.assign(m.bias.begin(), m.bias.end());
    for (std::size_t k = 0; k < m.num_classes; ++k) {
        const double* row = m.weights.data() + k * m.num_features;
        double s = 0;
        for (const auto& f : x) s += row[f.index] * f.value;
        out[k] += s;
    }
}

inline void softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

/// -log softmax(z)[y], computed stably.
inline double cross_entropy(const std::vector<double>& z, std::size_t y) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (double v : z) sum += std::exp(v - mx);
    return -(z[y] - mx - std::log(sum));
}

} // namespace detail

inline std::vector<double> predict_proba(const LinearModel& m, const SparseVector& x) {
    detail::check_row(m, x);
    std::vector<double> z;
    detail::logits(m, x, z);
    detail::softmax_inplace(z);
    return z;
}

struct ScoredClass {
    std::size_t index;
    double probability;
};

/// Top-k classes by probability, descending; ties by ascending class index.
inline std::vector<ScoredClass> predict_proba_topk(const LinearModel& m, const SparseVector& x, std::size_t k) {
    if (k < 1) throw Error("k must be >= 1");
    const auto p = predict_proba(m, x);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    std::vector<ScoredClass> out;
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back({order[i], p[order[i]]});
    return out;
}

/// Objective value on `batch`. An empty batch contributes only the penalty.
inline double loss(const LinearModel& m, const Batch& batch, double l2) {
    double total = 0;
    std::vector<double> z;
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        detail::logits(m, batch.rows[i], z);
        total += detail::cross_entropy(z, batch.labels[i]);
    }
    const double data = batch.rows.empty() ? 0.0 : total / static_cast<double>(batch.rows.size());
    double sq = 0;
    for (double w : m.weights) sq += w * w;
    return data + l2 * sq;
}

struct Gradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Analytic gradient of loss(): (p - onehot(y)) x^T averaged over the batch,
/// plus 2 * l2 * W.
inline Gradient gradient(const LinearModel& m, const Batch& batch, double l2) {
    Gradient g{std::vector<double>(m.weights.size(), 0.0), std::vector<double>(m.num_classes, 0.0)};
    std::vector<double> p;
    const double scale = batch.rows.empty() ? 0.0 : 1.0 / static_cast<double>(batch.rows.size());
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        const auto& x = batch.rows[i];
        detail::logits(m, x, p);
        detail::softmax_inplace(p);
        p[batch.labels[i]] -= 1.0;
        for (std::size_t k = 0; k < m.num_classes; ++k) {
            const double d = p[k] * scale;
            g.bias[k] += d;
            double* row = g.weights.data() + k * m.num_features;
            for (const auto& f : x) row[f.index] += d * f.value;
        }
    }
    for (std::size_t j = 0; j < m.weights.size(); ++j) g.weights[j] += 2.0 * l2 * m.weights[j];
    return g;
}

struct FitResult {
    LinearModel model;
    std::vector<double> loss_history;  // full training objective after each epoch
};

/// Trains on `rows`/`labels`. `class_names[i]` names label index i.
inline FitResult fit_linear_softmax(const std::vector<SparseVector>& rows, const std::vector<std::size_t>& labels,
                                    std::vector<std::string> class_names, std::size_t num_features,
                                    const TrainConfig& config) {
    config.validate();
    if (class_names.size() < 2) throw Error("training needs at least 2 classes");
    if (rows.empty()) throw Error("training needs a non-empty feature matrix");
    if (rows.size() != labels.size()) throw Error("rows and labels differ in length");
    for (auto y : labels)
        if (y >= class_names.size()) throw Error("label index out of range");

    FitResult result{LinearModel(std::move(class_names), num_features), {}};
    LinearModel& m = result.model;
    for (const auto& x : rows) detail::check_row(m, x);

    const std::size_t n_params = m.weights.size() + m.bias.size();
    std::vector<double> first(config.optimizer == Optimizer::adam ? n_params : 0, 0.0);
    std::vector<double> second(first.size(), 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    Rng rng(config.seed);
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<SparseVector> batch_rows;
    std::vector<std::size_t> batch_labels;

    const Batch full{rows, labels};
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch_rows.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_rows.push_back(rows[order[i]]);
                batch_labels.push_back(labels[order[i]]);
            }
            const Gradient g = gradient(m, Batch{batch_rows, batch_labels}, config.l2);
            if (config.optimizer == Optimizer::sgd) {
                for (std::size_t j = 0; j < m.weights.size(); ++j) m.weights[j] -= config.learning_rate * g.weights[j];
                for (std::size_t k = 0; k < m.bias.size(); ++k) m.bias[k] -= config.learning_rate * g.bias[k];
            } else {
                beta1_t *= beta1;
                beta2_t *= beta2;
                const double step = config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
                auto update = [&](double& param, double grad, std::size_t slot) {
                    first[slot] = beta1 * first[slot] + (1.0 - beta1) * grad;
                    second[slot] = beta2 * second[slot] + (1.0 - beta2) * grad * grad;
                    param -= step * first[slot] / (std::sqrt(second[slot]) + eps);
                };
                for (std::size_t j = 0; j < m.weights.size(); ++j) update(m.weights[j], g.weights[j], j);
                for (std::size_t k = 0; k < m.bias.size(); ++k) update(m.bias[k], g.bias[k], m.weights.size() + k);
            }
        }
        const double value = loss(m, full, config.l2);
        if (!std::isfinite(value))
            throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                  "; try a smaller learning rate");
        result.loss_history.push_back(value);
    }
    return result;
}

/// Maximum relative error between analytic and central-difference gradients.
/// Coordinates are all weights and biases, or `max_coords` of them sampled
/// with `seed` when non-zero. Relative error is |a - n| / max(|a|, |n|, floor)
/// so that coordinates with vanishing gradient are judged on an absolute scale.
inline double gradient_check(const LinearModel& model, const Batch& batch, double l2, double epsilon,
                             std::size_t max_coords = 0, std::uint64_t seed = 0, double floor = 1e-4) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw Error("gradient check epsilon must lie in (0, 1e-2]");
    const Gradient g = gradient(model, batch, l2);
    const std::size_t nw = model.weights.size();
    const std::size_t total = nw + model.bias.size();
    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && max_coords < total) {
        Rng rng(seed);
        rng.shuffle(coords);
        coords.resize(max_coords);
    }
    LinearModel probe = model;
    double worst = 0;
    for (auto c : coords) {
        double& param = c < nw ? probe.weights[c] : probe.bias[c - nw];
        const double saved = param;
        param = saved + epsilon;
        const double up = loss(probe, batch, l2);
        param = saved - epsilon;
        const double down = loss(probe, batch, l2);
        param = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = c < nw ? g.weights[c] : g.bias[c - nw];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

inline nlohmann::ordered_json to_json(const LinearModel& m) {
    nlohmann::ordered_json j;
    j["num_classes"] = m.num_classes;
    j["num_features"] = m.num_features;
    j["class_names"] = m.class_names;
    j["bias"] = m.bias;
    j["weights"] = m.weights;
    return j;
}

inline LinearModel linear_model_from_json(const nlohmann::json& j) {
    LinearModel m;
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.num_features = j.at("num_features").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.bias = j.at("bias").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.class_names.size() != m.num_classes || m.bias.size() != m.num_classes ||
        m.weights.size() != m.num_classes * m.num_features)
        throw Error("linear model dimensions are inconsistent");
    return m;
}

} // namespace dermcascade

#endif
