#pragma once

/**
 * @file losses.hpp
 * @brief Cross entropy against a single class and soft cross entropy against
 * a weighted set of classes, each with its closed-form gradient.
 *
 * All arithmetic is double precision. Batch reductions accumulate strictly
 * left to right so results are bitwise reproducible.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "answers.hpp"
#include "error.hpp"

namespace vqasoft {

struct LossResult {
    double loss = 0.0;
    std::vector<double> gradient;
};

enum class LossMode { Standard, Soft };

inline std::string_view to_string(LossMode m) { return m == LossMode::Standard ? "standard" : "soft"; }

inline void validate_logits(std::span<const double> x) {
    if (x.size() < 2) throw InputError("logits must have at least 2 classes");
    for (double v : x) {
        if (!std::isfinite(v)) throw InputError("logits contain a non-finite value");
    }
}

/// log(sum_j exp(x_j)), shifted by max_j x_j so finite inputs never overflow.
inline double log_sum_exp(std::span<const double> x) {
    validate_logits(x);
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> x) {
    const double lse = log_sum_exp(x);
    std::vector<double> p(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) p[j] = std::exp(x[j] - lse);
    return p;
}

/// -x[target] + log_sum_exp(x); gradient softmax(x) - onehot(target).
inline LossResult cross_entropy(std::span<const double> x, ClassIndex target_class) {
    if (target_class >= x.size()) {
        throw InputError("target class " + std::to_string(target_class) + " out of range for " +
                         std::to_string(x.size()) + " logits");
    }
    const double lse = log_sum_exp(x);
    LossResult r;
    r.loss = -x[target_class] + lse;
    r.gradient.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) r.gradient[j] = std::exp(x[j] - lse);
    r.gradient[target_class] -= 1.0;
    return r;
}

/**
 * sum_i w_i (-x[c_i] + log_sum_exp(x)).
 *
 * The gradient is (sum_i w_i) softmax(x) minus w_i at each c_i. With a single
 * class of weight one this evaluates exactly the same floating point
 * operations as cross_entropy.
 */
inline LossResult soft_cross_entropy(std::span<const double> x, const GroundTruth& target) {
    if (target.classes.empty()) throw InputError("no ground truth");
    if (target.classes.size() != target.weights.size()) {
        throw InputError("ground truth classes and weights differ in length");
    }
    for (ClassIndex c : target.classes) {
        if (c >= x.size()) {
            throw InputError("target class " + std::to_string(c) + " out of range for " +
                             std::to_string(x.size()) + " logits");
        }
    }
    const double lse = log_sum_exp(x);
    double weight_sum = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < target.classes.size(); ++i) {
        weight_sum += target.weights[i];
        loss += target.weights[i] * (-x[target.classes[i]] + lse);
    }
    LossResult r;
    r.loss = loss;
    r.gradient.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) r.gradient[j] = weight_sum * std::exp(x[j] - lse);
    for (std::size_t i = 0; i < target.classes.size(); ++i) r.gradient[target.classes[i]] -= target.weights[i];
    return r;
}

/// Loss of one example under the given mode; Standard uses argmax_class.
inline LossResult example_loss(std::span<const double> x, const GroundTruth& target, LossMode mode) {
    return mode == LossMode::Standard ? cross_entropy(x, target.argmax_class) : soft_cross_entropy(x, target);
}

struct BatchLossResult {
    double loss = 0.0;
    /// One gradient per example, already scaled by 1/batch_size.
    std::vector<std::vector<double>> gradients;
};

/// Mean of per-example losses; sequential left-to-right reduction.
inline BatchLossResult batch_loss(std::span<const std::vector<double>> batch_x,
                                  std::span<const GroundTruth> batch_targets, LossMode mode) {
    if (batch_x.size() != batch_targets.size()) {
        throw InputError("batch_loss: " + std::to_string(batch_x.size()) + " logits vs " +
                         std::to_string(batch_targets.size()) + " targets");
    }
    if (batch_x.empty()) throw InputError("batch_loss: empty batch");

    const double scale = 1.0 / static_cast<double>(batch_x.size());
    BatchLossResult out;
    out.gradients.reserve(batch_x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < batch_x.size(); ++i) {
        LossResult r = example_loss(batch_x[i], batch_targets[i], mode);
        total += r.loss;
        for (double& g : r.gradient) g *= scale;
        out.gradients.push_back(std::move(r.gradient));
    }
    out.loss = total * scale;
    return out;
}

/// Entropy of the target weights, sum_i w_i log(1/w_i).
inline double target_entropy(const GroundTruth& target) {
    double h = 0.0;
    for (double w : target.weights) {
        if (w > 0.0) h -= w * std::log(w);
    }
    return h;
}

} // namespace vqasoft
