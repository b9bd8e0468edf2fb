#pragma once

/**
 * @file data.hpp
 * @brief Readers and writers for the on-disk formats.
 *
 *  - Annotation JSON: VQA v2.0 layout, `{"annotations": [{"question_id": int,
 *    "answer_type": "yes/no"|"number"|"other", "answers": [{"answer": str} x10]}]}`.
 *    Extra fields are ignored.
 *  - Prediction JSON: `[{"question_id": int, "answer": str}, ...]`.
 *  - Curve CSV: `epoch,train_loss,val_loss,val_acc_all,val_acc_yesno,val_acc_number,val_acc_other`.
 *  - Feature CSV: `question_id,f0,...,f{d-1}`, values in shortest round-trip form.
 *  - Vocabulary: one normalized answer per line, line number is the class index.
 *
 * Loaders reject malformed input rather than repairing it.
 */

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "answers.hpp"
#include "error.hpp"
#include "log.hpp"
#include "matrix.hpp"
#include "metric.hpp"

namespace vqasoft {

namespace fs = std::filesystem;

enum class Split { Train, Validation };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "val"; }

/// Feature rows aligned with their answer sets and (when answerable) targets.
struct FeatureDataset {
    Matrix features;
    std::vector<AnswerSet> answer_sets;
    /// nullopt for questions with no in-vocabulary answer.
    std::vector<std::optional<GroundTruth>> ground_truths;
    Split split = Split::Train;

    std::size_t size() const { return answer_sets.size(); }
    std::size_t feature_dim() const { return features.cols(); }
};

/// One epoch of a training run.
struct CurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    AccuracyReport val_accuracy;
};

namespace detail {

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to a sibling temp file and renames it over @p path.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + path.string());
        out << content;
        out.flush();
        if (!out) throw InputError("cannot write " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw InputError("cannot write " + path.string() + ": " + ec.message());
}

inline nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(origin + ": malformed JSON: " + e.what());
    }
}

inline std::uint64_t json_question_id(const nlohmann::json& obj, const std::string& origin) {
    auto it = obj.find("question_id");
    if (it == obj.end()) throw InputError(origin + ": missing field question_id");
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
        throw InputError(origin + ": question_id must be a non-negative integer");
    }
    return it->get<std::uint64_t>();
}

inline double parse_double(std::string_view field, const std::string& origin) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw InputError(origin + ": not a number: \"" + std::string(field) + "\"");
    }
    if (!std::isfinite(v)) throw InputError(origin + ": non-finite value");
    return v;
}

inline std::uint64_t parse_uint(std::string_view field, const std::string& origin) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw InputError(origin + ": not an unsigned integer: \"" + std::string(field) + "\"");
    }
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace detail

// ---------------------------------------------------------------- annotations

inline std::vector<AnswerSet> parse_annotations(const std::string& text, const std::string& origin = "annotations") {
    const nlohmann::json root = detail::parse_json(text, origin);
    if (!root.is_object() || !root.contains("annotations") || !root["annotations"].is_array()) {
        throw InputError(origin + ": expected top-level object with an \"annotations\" array");
    }

    std::vector<AnswerSet> sets;
    std::map<std::uint64_t, bool> seen;
    for (const auto& ann : root["annotations"]) {
        if (!ann.is_object()) throw InputError(origin + ": annotation is not an object");
        const std::uint64_t qid = detail::json_question_id(ann, origin);
        const std::string where = origin + ": question " + std::to_string(qid);

        auto type_it = ann.find("answer_type");
        if (type_it == ann.end() || !type_it->is_string()) throw InputError(where + ": missing answer_type");
        AnswerType type;
        try {
            type = parse_answer_type(type_it->get<std::string>());
        } catch (const InputError& e) {
            throw InputError(where + ": " + e.what());
        }

        auto ans_it = ann.find("answers");
        if (ans_it == ann.end() || !ans_it->is_array()) throw InputError(where + ": missing answers array");
        std::vector<std::string> answers;
        for (const auto& a : *ans_it) {
            if (!a.is_object() || !a.contains("answer") || !a["answer"].is_string()) {
                throw InputError(where + ": answer entry lacks an \"answer\" string");
            }
            answers.push_back(a["answer"].get<std::string>());
        }
        if (!seen.emplace(qid, true).second) throw InputError(origin + ": duplicate question_id " + std::to_string(qid));
        sets.emplace_back(qid, std::move(answers), type);
    }
    return sets;
}

inline std::vector<AnswerSet> load_annotations(const fs::path& path) {
    return parse_annotations(detail::read_file(path), path.string());
}

inline std::string annotations_to_json(std::span<const AnswerSet> sets) {
    nlohmann::json anns = nlohmann::json::array();
    for (const auto& s : sets) {
        nlohmann::json answers = nlohmann::json::array();
        for (std::size_t i = 0; i < s.answers().size(); ++i) {
            answers.push_back({{"answer", s.answers()[i]}, {"answer_id", i + 1}});
        }
        anns.push_back({{"question_id", s.question_id()},
                        {"answer_type", std::string(to_string(s.type()))},
                        {"answers", std::move(answers)}});
    }
    nlohmann::json root = {{"annotations", std::move(anns)}};
    return root.dump() + "\n";
}

inline void save_annotations(const fs::path& path, std::span<const AnswerSet> sets) {
    detail::write_file_atomic(path, annotations_to_json(sets));
}

// ---------------------------------------------------------------- predictions

inline PredictionMap parse_predictions(const std::string& text, const std::string& origin = "predictions") {
    const nlohmann::json root = detail::parse_json(text, origin);
    if (!root.is_array()) throw InputError(origin + ": expected a JSON array");
    std::vector<Prediction> preds;
    preds.reserve(root.size());
    for (const auto& p : root) {
        if (!p.is_object()) throw InputError(origin + ": prediction is not an object");
        Prediction pred;
        pred.question_id = detail::json_question_id(p, origin);
        if (!p.contains("answer") || !p["answer"].is_string()) {
            throw InputError(origin + ": question " + std::to_string(pred.question_id) + ": missing field answer");
        }
        pred.answer = p["answer"].get<std::string>();
        preds.push_back(std::move(pred));
    }
    try {
        return make_prediction_map(preds);
    } catch (const InputError& e) {
        throw InputError(origin + ": " + e.what());
    }
}

inline PredictionMap load_predictions(const fs::path& path) {
    return parse_predictions(detail::read_file(path), path.string());
}

inline void save_predictions(const fs::path& path, const PredictionMap& preds) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& [qid, answer] : preds) root.push_back({{"question_id", qid}, {"answer", answer}});
    detail::write_file_atomic(path, root.dump() + "\n");
}

// --------------------------------------------------------------------- curves

inline constexpr std::string_view kCurveHeader =
    "epoch,train_loss,val_loss,val_acc_all,val_acc_yesno,val_acc_number,val_acc_other";

inline std::string curves_to_csv(std::span<const CurvePoint> curve) {
    std::string out(kCurveHeader);
    out += '\n';
    const auto field = [&out](double v) {
        char buf[400];
        std::snprintf(buf, sizeof(buf), ",%.6f", v);
        out += buf;
    };
    for (const auto& p : curve) {
        const auto& a = p.val_accuracy;
        out += std::to_string(p.epoch);
        for (double v : {p.train_loss, p.val_loss, a.overall, a.yes_no, a.number, a.other}) field(v);
        out += '\n';
    }
    return out;
}

inline void save_curves(const fs::path& path, std::span<const CurvePoint> curve) {
    if (curve.empty()) throw InputError("save_curves: empty curve");
    detail::write_file_atomic(path, curves_to_csv(curve));
}

/// Parses a curve CSV. Per-type counts are not stored and come back as 0.
inline std::vector<CurvePoint> parse_curves(const std::string& text, const std::string& origin = "curve") {
    const auto lines = detail::split_lines(text);
    if (lines.empty() || lines.front() != kCurveHeader) throw InputError(origin + ": bad curve header");
    std::vector<CurvePoint> curve;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = detail::split_csv(lines[i]);
        if (fields.size() != 7) throw InputError(origin + ": line " + std::to_string(i + 1) + ": expected 7 fields");
        CurvePoint p;
        p.epoch = static_cast<int>(detail::parse_uint(fields[0], origin));
        if (p.epoch != static_cast<int>(curve.size()) + 1) {
            throw InputError(origin + ": epochs must increase from 1");
        }
        p.train_loss = detail::parse_double(fields[1], origin);
        p.val_loss = detail::parse_double(fields[2], origin);
        p.val_accuracy.overall = detail::parse_double(fields[3], origin);
        p.val_accuracy.yes_no = detail::parse_double(fields[4], origin);
        p.val_accuracy.number = detail::parse_double(fields[5], origin);
        p.val_accuracy.other = detail::parse_double(fields[6], origin);
        curve.push_back(p);
    }
    return curve;
}

inline std::vector<CurvePoint> load_curves(const fs::path& path) {
    return parse_curves(detail::read_file(path), path.string());
}

// ------------------------------------------------------------------- features

struct FeatureTable {
    std::vector<std::uint64_t> question_ids;
    Matrix features;
};

inline void save_features(const fs::path& path, std::span<const std::uint64_t> ids, const Matrix& features) {
    if (ids.size() != features.rows()) throw InputError("save_features: id count does not match rows");
    std::string out = "question_id";
    for (std::size_t c = 0; c < features.cols(); ++c) out += ",f" + std::to_string(c);
    out += '\n';
    for (std::size_t r = 0; r < features.rows(); ++r) {
        out += std::to_string(ids[r]);
        for (double v : features.row(r)) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    detail::write_file_atomic(path, out);
}

inline FeatureTable load_features(const fs::path& path) {
    const std::string origin = path.string();
    const std::string text = detail::read_file(path);
    const auto lines = detail::split_lines(text);
    if (lines.empty()) throw InputError(origin + ": empty feature file");
    const auto header = detail::split_csv(lines.front());
    if (header.size() < 2 || header.front() != "question_id") throw InputError(origin + ": bad feature header");
    const std::size_t dim = header.size() - 1;

    FeatureTable table;
    std::vector<double> values;
    values.reserve((lines.size() - 1) * dim);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = detail::split_csv(lines[i]);
        if (fields.size() != dim + 1) {
            throw InputError(origin + ": line " + std::to_string(i + 1) + ": expected " + std::to_string(dim + 1) +
                             " fields, got " + std::to_string(fields.size()));
        }
        table.question_ids.push_back(detail::parse_uint(fields[0], origin));
        for (std::size_t c = 1; c < fields.size(); ++c) values.push_back(detail::parse_double(fields[c], origin));
    }
    table.features = Matrix(table.question_ids.size(), dim);
    for (std::size_t r = 0; r < table.question_ids.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) table.features(r, c) = values[r * dim + c];
    }
    return table;
}

// ----------------------------------------------------------------- vocabulary

inline void save_vocabulary(const fs::path& path, const Vocabulary& vocab) {
    std::string out;
    for (const auto& e : vocab.entries()) out += e + "\n";
    detail::write_file_atomic(path, out);
}

inline Vocabulary load_vocabulary(const fs::path& path) {
    const std::string text = detail::read_file(path);
    std::vector<std::string> entries;
    for (auto line : detail::split_lines(text)) entries.emplace_back(line);
    try {
        return Vocabulary(std::move(entries));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// ------------------------------------------------------------ dataset folders

/// File names inside a dataset directory.
struct DatasetLayout {
    static fs::path annotations(const fs::path& dir, Split s) {
        return dir / (std::string(to_string(s)) + "_annotations.json");
    }
    static fs::path features(const fs::path& dir, Split s) {
        return dir / (std::string(to_string(s)) + "_features.csv");
    }
    static fs::path vocabulary(const fs::path& dir) { return dir / "vocab.txt"; }
};

/**
 * Joins annotations with feature rows by question id. Unanswerable questions
 * are dropped from the training split and kept (without a target) in the
 * validation split.
 */
inline FeatureDataset assemble_dataset(std::vector<AnswerSet> sets, const FeatureTable& table, const Vocabulary& vocab,
                                       Split split) {
    if (table.question_ids.size() != sets.size()) {
        throw InputError(std::string(to_string(split)) + ": " + std::to_string(sets.size()) + " annotations but " +
                         std::to_string(table.question_ids.size()) + " feature rows");
    }
    std::map<std::uint64_t, std::size_t> row_of;
    for (std::size_t r = 0; r < table.question_ids.size(); ++r) {
        if (!row_of.emplace(table.question_ids[r], r).second) {
            throw InputError("duplicate question_id " + std::to_string(table.question_ids[r]) + " in features");
        }
    }

    FeatureDataset ds;
    ds.split = split;
    std::vector<std::size_t> rows;
    std::size_t dropped = 0;
    for (auto& set : sets) {
        auto it = row_of.find(set.question_id());
        if (it == row_of.end()) {
            throw InputError("question " + std::to_string(set.question_id()) + " has no feature row");
        }
        auto gt = try_ground_truth(set, vocab);
        if (!gt && split == Split::Train) {
            ++dropped;
            continue;
        }
        rows.push_back(it->second);
        ds.ground_truths.push_back(std::move(gt));
        ds.answer_sets.push_back(std::move(set));
    }
    if (dropped > 0) log::info("dropped ", dropped, " unanswerable training questions");
    if (rows.empty()) throw InputError(std::string(to_string(split)) + ": empty dataset");

    ds.features = Matrix(rows.size(), table.features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto src = table.features.row(rows[r]);
        std::copy(src.begin(), src.end(), ds.features.row(r).begin());
    }
    return ds;
}

inline FeatureDataset load_split(const fs::path& dir, Split split, const Vocabulary& vocab) {
    return assemble_dataset(load_annotations(DatasetLayout::annotations(dir, split)),
                            load_features(DatasetLayout::features(dir, split)), vocab, split);
}

/// Writes annotations and features of one split into @p dir.
inline void save_split(const fs::path& dir, const FeatureDataset& ds) {
    save_annotations(DatasetLayout::annotations(dir, ds.split), ds.answer_sets);
    std::vector<std::uint64_t> ids;
    ids.reserve(ds.size());
    for (const auto& s : ds.answer_sets) ids.push_back(s.question_id());
    save_features(DatasetLayout::features(dir, ds.split), ids, ds.features);
}

} // namespace vqasoft
