#pragma once

/**
 * @file metric.hpp
 * @brief VQA consensus accuracy: a predicted answer scores min(#matches/3, 1)
 * averaged over the ten leave-one-out subsets of the annotator answers.
 *
 * Every per-question score is a multiple of 1/30, so the kernels work on the
 * integer numerator over 30 and convert to double only at the end.
 */

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "answers.hpp"
#include "error.hpp"

namespace vqasoft {

inline constexpr int kAccuracyDenominator = 30;

using PredictionMap = std::map<std::uint64_t, std::string>;

struct Prediction {
    std::uint64_t question_id = 0;
    std::string answer;
};

/// Builds a map, rejecting repeated question ids.
inline PredictionMap make_prediction_map(std::span<const Prediction> predictions) {
    PredictionMap out;
    for (const auto& p : predictions) {
        if (!out.emplace(p.question_id, p.answer).second) {
            throw InputError("duplicate question_id " + std::to_string(p.question_id) + " in predictions");
        }
    }
    return out;
}

/// Number of annotator answers equal to @p predicted after normalization.
inline int match_count(const std::string& predicted, const AnswerSet& set) {
    const std::string p = normalize_answer(predicted);
    int n = 0;
    for (const auto& a : set.answers()) n += (normalize_answer(a) == p) ? 1 : 0;
    return n;
}

/// Enumerates the ten leave-one-out subsets; returns the score times 30.
inline int accuracy_numerator_bruteforce(const std::string& predicted, const AnswerSet& set) {
    const std::string p = normalize_answer(predicted);
    std::array<bool, kAnnotators> hit{};
    for (std::size_t j = 0; j < kAnnotators; ++j) hit[j] = normalize_answer(set.answers()[j]) == p;

    int numerator = 0;
    for (std::size_t k = 0; k < kAnnotators; ++k) {
        int matches = 0;
        for (std::size_t j = 0; j < kAnnotators; ++j) {
            if (j != k && hit[j]) ++matches;
        }
        // (1/10) * min(matches/3, 1) == min(matches, 3) / 30
        numerator += std::min(matches, 3);
    }
    return numerator;
}

/// n * min(n-1, 3) + (10-n) * min(n, 3), the score times 30 for n matches.
inline constexpr int accuracy_numerator_closed(int n) {
    if (n <= 0) return 0;
    return n * std::min(n - 1, 3) + (static_cast<int>(kAnnotators) - n) * std::min(n, 3);
}

inline double question_accuracy_bruteforce(const std::string& predicted, const AnswerSet& set) {
    return static_cast<double>(accuracy_numerator_bruteforce(predicted, set)) / kAccuracyDenominator;
}

inline double question_accuracy_closed(const std::string& predicted, const AnswerSet& set) {
    return static_cast<double>(accuracy_numerator_closed(match_count(predicted, set))) / kAccuracyDenominator;
}

/// Dataset accuracy overall and per answer type. Empty types report 0.
struct AccuracyReport {
    double overall = 0.0;
    double yes_no = 0.0;
    double number = 0.0;
    double other = 0.0;
    std::size_t count_yes_no = 0;
    std::size_t count_number = 0;
    std::size_t count_other = 0;

    std::size_t count_total() const { return count_yes_no + count_number + count_other; }

    double by_type(AnswerType t) const {
        switch (t) {
        case AnswerType::YesNo: return yes_no;
        case AnswerType::Number: return number;
        case AnswerType::Other: return other;
        }
        return 0.0;
    }

    friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

/**
 * Scores every question of @p dataset with the closed form. Throws if any
 * question lacks a prediction (listing the ids) or if the dataset repeats
 * an id. Sums are exact integers, so the aggregate is order independent.
 */
inline AccuracyReport evaluate(const PredictionMap& predictions, std::span<const AnswerSet> dataset) {
    std::vector<std::uint64_t> missing;
    std::map<std::uint64_t, bool> seen;
    std::array<long long, 3> numerators{};
    std::array<std::size_t, 3> counts{};

    for (const auto& set : dataset) {
        if (!seen.emplace(set.question_id(), true).second) {
            throw InputError("duplicate question_id " + std::to_string(set.question_id()) + " in dataset");
        }
        auto it = predictions.find(set.question_id());
        if (it == predictions.end()) {
            missing.push_back(set.question_id());
            continue;
        }
        const auto t = static_cast<std::size_t>(set.type());
        numerators[t] += accuracy_numerator_closed(match_count(it->second, set));
        ++counts[t];
    }

    if (!missing.empty()) {
        std::string msg = "missing predictions for question_id";
        const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += (i == 0 ? " " : ", ") + std::to_string(missing[i]);
        if (shown < missing.size()) msg += " (and " + std::to_string(missing.size() - shown) + " more)";
        throw InputError(msg);
    }

    auto mean = [](long long num, std::size_t n) {
        return n == 0 ? 0.0 : static_cast<double>(num) / (static_cast<double>(kAccuracyDenominator) * n);
    };
    AccuracyReport r;
    r.yes_no = mean(numerators[0], counts[0]);
    r.number = mean(numerators[1], counts[1]);
    r.other = mean(numerators[2], counts[2]);
    r.count_yes_no = counts[0];
    r.count_number = counts[1];
    r.count_other = counts[2];
    r.overall = mean(numerators[0] + numerators[1] + numerators[2], r.count_total());
    return r;
}

} // namespace vqasoft
