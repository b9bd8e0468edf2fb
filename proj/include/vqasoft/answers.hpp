#pragma once

/**
 * @file answers.hpp
 * @brief Answer normalization, answer vocabularies, and conversion of the ten
 * annotator answers of a question into a weighted classification target.
 */

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "error.hpp"

namespace vqasoft {

/// Number of human answers attached to every question.
inline constexpr std::size_t kAnnotators = 10;

using ClassIndex = std::size_t;

enum class AnswerType { YesNo, Number, Other };

inline std::string_view to_string(AnswerType t) {
    switch (t) {
    case AnswerType::YesNo: return "yes/no";
    case AnswerType::Number: return "number";
    case AnswerType::Other: return "other";
    }
    return "other";
}

inline AnswerType parse_answer_type(std::string_view s) {
    if (s == "yes/no") return AnswerType::YesNo;
    if (s == "number") return AnswerType::Number;
    if (s == "other") return AnswerType::Other;
    throw InputError("unknown answer_type \"" + std::string(s) + "\"");
}

/**
 * Lowercases, drops the punctuation characters . , ? ! ' " and collapses
 * whitespace runs to a single space with no leading or trailing blanks.
 */
inline std::string normalize_answer(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        const auto c = static_cast<unsigned char>(ch);
        if (c == '.' || c == ',' || c == '?' || c == '!' || c == '\'' || c == '"') continue;
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

/// The ten raw annotator answers for one question.
class AnswerSet {
public:
    AnswerSet(std::uint64_t question_id, std::vector<std::string> answers, AnswerType type)
        : question_id_(question_id), type_(type) {
        if (answers.size() != kAnnotators) {
            throw InputError("question " + std::to_string(question_id) + ": expected 10 answers, got " +
                             std::to_string(answers.size()));
        }
        std::move(answers.begin(), answers.end(), answers_.begin());
    }

    std::uint64_t question_id() const noexcept { return question_id_; }
    AnswerType type() const noexcept { return type_; }
    const std::array<std::string, kAnnotators>& answers() const noexcept { return answers_; }

    friend bool operator==(const AnswerSet&, const AnswerSet&) = default;

private:
    std::uint64_t question_id_;
    std::array<std::string, kAnnotators> answers_;
    AnswerType type_;
};

/// Ordered set of normalized answer strings; position is the class index.
class Vocabulary {
public:
    explicit Vocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
        if (entries_.size() < 2) throw InputError("degenerate vocabulary");
        index_.reserve(entries_.size());
        for (ClassIndex i = 0; i < entries_.size(); ++i) {
            if (normalize_answer(entries_[i]) != entries_[i]) {
                throw InputError("vocabulary entry \"" + entries_[i] + "\" is not normalized");
            }
            if (!index_.emplace(entries_[i], i).second) {
                throw InputError("duplicate vocabulary entry \"" + entries_[i] + "\"");
            }
        }
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::string& operator[](ClassIndex i) const { return entries_.at(i); }
    const std::vector<std::string>& entries() const noexcept { return entries_; }

    /// Class of an already-normalized answer, if it is in the vocabulary.
    std::optional<ClassIndex> find(const std::string& normalized) const {
        auto it = index_.find(normalized);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, ClassIndex> index_;
};

/**
 * Keeps the @p top_k most frequent normalized answers over every annotator
 * answer. Ordered by descending count, ties by lexicographic order.
 */
inline Vocabulary build_vocabulary(std::span<const AnswerSet> answer_sets, std::size_t top_k) {
    if (answer_sets.empty()) throw InputError("build_vocabulary: no answer sets");
    if (top_k < 2) throw InputError("build_vocabulary: top_k must be at least 2");

    std::map<std::string, std::size_t> counts;
    for (const auto& set : answer_sets) {
        for (const auto& a : set.answers()) ++counts[normalize_answer(a)];
    }
    if (counts.size() < 2) throw InputError("degenerate vocabulary");

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > top_k) ranked.resize(top_k);

    std::vector<std::string> entries;
    entries.reserve(ranked.size());
    for (auto& [answer, count] : ranked) entries.push_back(std::move(answer));
    return Vocabulary(std::move(entries));
}

/// Weighted target: distinct classes and their share of the ten answers.
struct GroundTruth {
    std::vector<ClassIndex> classes;
    std::vector<double> weights;
    /// Most common in-vocabulary answer; the label for plain cross entropy.
    ClassIndex argmax_class = 0;

    double weight_sum() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/**
 * Each distinct in-vocabulary answer appearing n times gets weight n/10.
 * Out-of-vocabulary answers are dropped without renormalizing, so the
 * weights sum to less than one when any answer is unknown.
 */
inline GroundTruth to_ground_truth(const AnswerSet& set, const Vocabulary& vocab) {
    std::map<ClassIndex, int> counts;
    for (const auto& raw : set.answers()) {
        if (auto cls = vocab.find(normalize_answer(raw))) ++counts[*cls];
    }
    if (counts.empty()) {
        throw InputError("question " + std::to_string(set.question_id()) + ": unanswerable under vocabulary");
    }

    // std::map iterates by ascending class, so a stable sort on count gives
    // descending count with ascending class among ties.
    std::vector<std::pair<ClassIndex, int>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    GroundTruth gt;
    gt.classes.reserve(ranked.size());
    gt.weights.reserve(ranked.size());
    for (const auto& [cls, n] : ranked) {
        gt.classes.push_back(cls);
        gt.weights.push_back(static_cast<double>(n) / static_cast<double>(kAnnotators));
    }
    gt.argmax_class = ranked.front().first;
    return gt;
}

/// Like to_ground_truth but returns nullopt for unanswerable questions.
inline std::optional<GroundTruth> try_ground_truth(const AnswerSet& set, const Vocabulary& vocab) {
    for (const auto& raw : set.answers()) {
        if (vocab.find(normalize_answer(raw))) return to_ground_truth(set, vocab);
    }
    return std::nullopt;
}

} // namespace vqasoft
