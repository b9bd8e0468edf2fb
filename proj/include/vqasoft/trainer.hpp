#pragma once

/**
 * @file trainer.hpp
 * @brief Linear or one-hidden-layer softmax classifier over feature vectors,
 * trained with hand-written backprop and Adam under either loss.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "answers.hpp"
#include "data.hpp"
#include "error.hpp"
#include "log.hpp"
#include "losses.hpp"
#include "matrix.hpp"
#include "metric.hpp"

namespace vqasoft {

enum class Arch { Linear, MLP };

struct ModelConfig {
    Arch arch = Arch::Linear;
    std::size_t hidden_dim = 64;
};

/// Offsets of one affine layer inside ModelParams::values.
struct LayerView {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0; // out x in, row-major
    std::size_t bias_offset = 0;   // out
};

/**
 * All weights and biases in one flat vector, layer by layer, each layer
 * stored as its weight matrix followed by its bias. Linear: x = W f + b.
 * MLP: x = W2 relu(W1 f + b1) + b2.
 */
class ModelParams {
public:
    ModelParams(ModelConfig config, std::size_t input_dim, std::size_t num_classes)
        : config_(config), input_dim_(input_dim), num_classes_(num_classes) {
        if (input_dim == 0) throw InputError("model: input_dim must be positive");
        if (num_classes < 2) throw InputError("model: need at least 2 classes");
        if (config.arch == Arch::MLP && config.hidden_dim == 0) throw InputError("model: hidden_dim must be positive");

        std::size_t offset = 0;
        auto add = [&](std::size_t in, std::size_t out) {
            layers_.push_back({in, out, offset, offset + in * out});
            offset += in * out + out;
        };
        if (config.arch == Arch::Linear) {
            add(input_dim, num_classes);
        } else {
            add(input_dim, config.hidden_dim);
            add(config.hidden_dim, num_classes);
        }
        values_.assign(offset, 0.0);
    }

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
    void init_uniform(std::mt19937_64& rng) {
        for (const auto& l : layers_) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (std::size_t i = l.weight_offset; i < l.bias_offset + l.out; ++i) values_[i] = dist(rng);
        }
    }

    const ModelConfig& config() const noexcept { return config_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    const std::vector<LayerView>& layers() const noexcept { return layers_; }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double& weight(std::size_t layer, std::size_t row, std::size_t col) {
        const auto& l = layers_.at(layer);
        return values_[l.weight_offset + row * l.in + col];
    }
    double& bias(std::size_t layer, std::size_t row) { return values_[layers_.at(layer).bias_offset + row]; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    ModelConfig config_;
    std::size_t input_dim_;
    std::size_t num_classes_;
    std::vector<LayerView> layers_;
    std::vector<double> values_;
};

namespace detail {

inline void affine(std::span<const double> params, const LayerView& l, std::span<const double> in,
                   std::span<double> out) {
    for (std::size_t r = 0; r < l.out; ++r) {
        const double* w = params.data() + l.weight_offset + r * l.in;
        double acc = params[l.bias_offset + r];
        for (std::size_t c = 0; c < l.in; ++c) acc += w[c] * in[c];
        out[r] = acc;
    }
}

// grads += dL/dparams of one affine layer; returns dL/din if requested.
inline void affine_backward(std::span<const double> params, const LayerView& l, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grads, std::span<double> grad_in) {
    for (std::size_t r = 0; r < l.out; ++r) {
        const double g = grad_out[r];
        if (g == 0.0) continue;
        double* gw = grads.data() + l.weight_offset + r * l.in;
        for (std::size_t c = 0; c < l.in; ++c) gw[c] += g * in[c];
        grads[l.bias_offset + r] += g;
    }
    if (!grad_in.empty()) {
        std::fill(grad_in.begin(), grad_in.end(), 0.0);
        for (std::size_t r = 0; r < l.out; ++r) {
            const double g = grad_out[r];
            const double* w = params.data() + l.weight_offset + r * l.in;
            for (std::size_t c = 0; c < l.in; ++c) grad_in[c] += g * w[c];
        }
    }
}

inline void check_input(const ModelParams& params, std::span<const double> features) {
    if (features.size() != params.input_dim()) {
        throw InputError("model expects " + std::to_string(params.input_dim()) + " features, got " +
                         std::to_string(features.size()));
    }
}

} // namespace detail

inline std::vector<double> forward(const ModelParams& params, std::span<const double> features) {
    detail::check_input(params, features);
    const auto& layers = params.layers();
    std::vector<double> logits(params.num_classes());
    if (params.config().arch == Arch::Linear) {
        detail::affine(params.values(), layers[0], features, logits);
        return logits;
    }
    std::vector<double> hidden(layers[0].out);
    detail::affine(params.values(), layers[0], features, hidden);
    for (double& h : hidden) h = std::max(h, 0.0);
    detail::affine(params.values(), layers[1], hidden, logits);
    return logits;
}

/// Adds the parameter gradient for one example into @p grads.
inline void backward_accumulate(const ModelParams& params, std::span<const double> features,
                                std::span<const double> logit_gradient, std::span<double> grads) {
    detail::check_input(params, features);
    if (logit_gradient.size() != params.num_classes()) throw InputError("backward: logit gradient has wrong length");
    if (grads.size() != params.values().size()) throw InputError("backward: gradient buffer has wrong length");

    const auto& layers = params.layers();
    if (params.config().arch == Arch::Linear) {
        detail::affine_backward(params.values(), layers[0], features, logit_gradient, grads, {});
        return;
    }
    std::vector<double> pre(layers[0].out);
    detail::affine(params.values(), layers[0], features, pre);
    std::vector<double> hidden(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) hidden[i] = std::max(pre[i], 0.0);

    std::vector<double> grad_hidden(hidden.size());
    detail::affine_backward(params.values(), layers[1], hidden, logit_gradient, grads, grad_hidden);
    for (std::size_t i = 0; i < pre.size(); ++i) {
        if (pre[i] <= 0.0) grad_hidden[i] = 0.0;
    }
    detail::affine_backward(params.values(), layers[0], features, grad_hidden, grads, {});
}

inline std::vector<double> backward(const ModelParams& params, std::span<const double> features,
                                    std::span<const double> logit_gradient) {
    std::vector<double> grads(params.values().size(), 0.0);
    backward_accumulate(params, features, logit_gradient, grads);
    return grads;
}

// ----------------------------------------------------------------------- Adam

struct TrainConfig {
    LossMode loss_mode = LossMode::Soft;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 30;
    std::uint64_t seed = 1;

    void validate() const {
        if (batch_size == 0) throw InputError("batch_size must be positive");
        if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) throw InputError("adam_beta1 must be in (0, 1)");
        if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) throw InputError("adam_beta2 must be in (0, 1)");
        if (!(adam_eps > 0.0)) throw InputError("adam_eps must be positive");
        if (epochs < 0) throw InputError("epochs must be non-negative");
    }
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t timestep = 0;

    explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// Bias-corrected Adam update in place.
inline void adam_step(AdamState& state, std::vector<double>& params, std::span<const double> grads,
                      const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw InputError("adam_step: size mismatch");
    }
    ++state.timestep;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.timestep));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.timestep));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.first_moment[i] = b1 * state.first_moment[i] + (1.0 - b1) * g;
        state.second_moment[i] = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        const double m_hat = state.first_moment[i] / correction1;
        const double v_hat = state.second_moment[i] / correction2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
}

// ------------------------------------------------------------------- training

/// Index of the largest logit, lowest index on ties.
inline ClassIndex argmax(std::span<const double> logits) {
    ClassIndex best = 0;
    for (ClassIndex i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return best;
}

inline PredictionMap predict(const ModelParams& params, const FeatureDataset& ds, const Vocabulary& vocab) {
    PredictionMap out;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto logits = forward(params, ds.features.row(r));
        out.emplace(ds.answer_sets[r].question_id(), vocab[argmax(logits)]);
    }
    return out;
}

namespace detail {

inline std::vector<double> checked_forward(const ModelParams& params, std::span<const double> features) {
    auto logits = forward(params, features);
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericalError("non-finite logit; training diverged");
    }
    return logits;
}

} // namespace detail

/// Mean loss over the questions that have a target; 0 if none do.
inline double mean_loss(const ModelParams& params, const FeatureDataset& ds, LossMode mode) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        if (!ds.ground_truths[r]) continue;
        const auto logits = detail::checked_forward(params, ds.features.row(r));
        total += example_loss(logits, *ds.ground_truths[r], mode).loss;
        ++n;
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

struct TrainResult {
    std::vector<CurvePoint> curve;
    ModelParams params;
    /// Validation predictions of the final model.
    PredictionMap val_predictions;
};

/**
 * Per epoch: seeded shuffle, mini-batch Adam on the configured loss, then
 * full-set train and validation loss and the validation VQA accuracy of the
 * argmax predictions. Initialization and shuffling draw from separate
 * streams that do not depend on the loss mode, so both modes see the same
 * initial weights and batch order.
 */
inline TrainResult train(const FeatureDataset& train_set, const FeatureDataset& val_set, const Vocabulary& vocab,
                         const ModelConfig& model_config, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0 || val_set.size() == 0) throw InputError("train: empty dataset");
    if (train_set.feature_dim() != val_set.feature_dim()) throw InputError("train: feature dimensions differ");
    for (const auto* ds : {&train_set, &val_set}) {
        for (const auto& gt : ds->ground_truths) {
            if (!gt) continue;
            for (ClassIndex c : gt->classes) {
                if (c >= vocab.size()) throw InputError("train: target class outside vocabulary");
            }
        }
    }

    std::vector<std::size_t> trainable;
    for (std::size_t r = 0; r < train_set.size(); ++r) {
        if (train_set.ground_truths[r]) trainable.push_back(r);
    }
    if (trainable.empty()) throw InputError("train: no answerable training questions");

    std::mt19937_64 init_rng(cfg.seed);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

    TrainResult result{{}, ModelParams(model_config, train_set.feature_dim(), vocab.size()), {}};
    ModelParams& params = result.params;
    params.init_uniform(init_rng);
    AdamState adam(params.values().size());

    std::vector<double> grads(params.values().size());
    std::vector<std::vector<double>> batch_logits;
    std::vector<GroundTruth> batch_targets;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(trainable.begin(), trainable.end(), shuffle_rng);
        for (std::size_t start = 0; start < trainable.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, trainable.size());
            batch_logits.clear();
            batch_targets.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch_logits.push_back(detail::checked_forward(params, train_set.features.row(trainable[k])));
                batch_targets.push_back(*train_set.ground_truths[trainable[k]]);
            }
            const BatchLossResult bl = batch_loss(batch_logits, batch_targets, cfg.loss_mode);
            if (!std::isfinite(bl.loss)) {
                throw NumericalError("non-finite batch loss in epoch " + std::to_string(epoch));
            }
            std::fill(grads.begin(), grads.end(), 0.0);
            for (std::size_t k = start; k < stop; ++k) {
                backward_accumulate(params, train_set.features.row(trainable[k]), bl.gradients[k - start], grads);
            }
            adam_step(adam, params.values(), grads, cfg);
            if (!params.all_finite()) {
                throw NumericalError("non-finite parameter after Adam step in epoch " + std::to_string(epoch));
            }
        }

        CurvePoint point;
        point.epoch = epoch;
        point.train_loss = mean_loss(params, train_set, cfg.loss_mode);
        point.val_loss = mean_loss(params, val_set, cfg.loss_mode);
        if (!std::isfinite(point.train_loss) || !std::isfinite(point.val_loss)) {
            throw NumericalError("non-finite epoch loss in epoch " + std::to_string(epoch));
        }
        point.val_accuracy = evaluate(predict(params, val_set, vocab), val_set.answer_sets);
        log::debug("[", to_string(cfg.loss_mode), " seed ", cfg.seed, "] epoch ", epoch, " train_loss ",
                   point.train_loss, " val_loss ", point.val_loss, " val_acc ", point.val_accuracy.overall);
        result.curve.push_back(point);
    }
    result.val_predictions = predict(params, val_set, vocab);
    return result;
}

// ------------------------------------------------------------ curve analysis

/// Epoch with the highest overall validation accuracy (earliest on ties).
inline const CurvePoint& best_epoch(std::span<const CurvePoint> curve) {
    if (curve.empty()) throw InputError("best_epoch: empty curve");
    const CurvePoint* best = &curve.front();
    for (const auto& p : curve) {
        if (p.val_accuracy.overall > best->val_accuracy.overall) best = &p;
    }
    return *best;
}

/// Epochs whose validation loss and validation accuracy both rose from the previous epoch.
inline std::vector<int> discrepancy_epochs(std::span<const CurvePoint> curve) {
    std::vector<int> out;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        if (curve[i].val_loss > curve[i - 1].val_loss &&
            curve[i].val_accuracy.overall > curve[i - 1].val_accuracy.overall) {
            out.push_back(curve[i].epoch);
        }
    }
    return out;
}

} // namespace vqasoft
