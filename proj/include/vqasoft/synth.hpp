#pragma once

/**
 * @file synth.hpp
 * @brief Synthetic questions with annotator disagreement.
 *
 * Each question has a latent answer distribution p ~ Dirichlet(alpha); its ten
 * annotator answers are i.i.d. draws from p and its feature vector is a fixed
 * random linear embedding of p plus N(0, 0.1^2) noise. Embedding entries are
 * N(0, embedding_scale^2); at scale 5 a linear model becomes confident enough
 * on the argmax labels for validation loss to rise late in training. Class i is the answer
 * string "c<i>".
 *
 * The PRNG is std::mt19937_64 seeded with SynthConfig::seed; output is a pure
 * function of the config for a given standard library build.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "answers.hpp"
#include "data.hpp"
#include "error.hpp"
#include "matrix.hpp"

namespace vqasoft {

struct SynthConfig {
    std::size_t num_classes = 20;
    std::size_t num_train = 5000;
    std::size_t num_val = 2000;
    std::size_t feature_dim = 32;
    double dirichlet_alpha = 0.5;
    std::size_t annotators = kAnnotators;
    std::uint64_t seed = 20180401;
    /// Shares of yes/no, number and other questions.
    std::array<double, 3> type_fractions{0.38, 0.12, 0.50};
    double noise_sigma = 0.1;
    double embedding_scale = 5.0;

    void validate() const {
        if (num_classes < 2) throw InputError("synth: num_classes must be at least 2");
        if (num_train < 1 || num_val < 1) throw InputError("synth: num_train and num_val must be at least 1");
        if (feature_dim < 1) throw InputError("synth: feature_dim must be at least 1");
        if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha)) {
            throw InputError("synth: dirichlet_alpha must be positive");
        }
        if (annotators != kAnnotators) throw InputError("synth: annotators must be 10");
        double sum = 0.0;
        for (double f : type_fractions) {
            if (!(f >= 0.0)) throw InputError("synth: type_fractions must be non-negative");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InputError("synth: type_fractions must sum to 1");
        if (!(noise_sigma >= 0.0)) throw InputError("synth: noise_sigma must be non-negative");
        if (!(embedding_scale > 0.0)) throw InputError("synth: embedding_scale must be positive");
    }
};

/// Reads a JSON object; absent keys keep their defaults, unknown keys are rejected.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("synth config: expected a JSON object");
    SynthConfig c;
    const auto count = [](const std::string& key, const nlohmann::json& v) {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw InputError("synth config: \"" + key + "\" must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    };
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "num_classes") c.num_classes = count(key, value);
            else if (key == "num_train") c.num_train = count(key, value);
            else if (key == "num_val") c.num_val = count(key, value);
            else if (key == "feature_dim") c.feature_dim = count(key, value);
            else if (key == "dirichlet_alpha") c.dirichlet_alpha = value.get<double>();
            else if (key == "annotators") c.annotators = count(key, value);
            else if (key == "seed") c.seed = count(key, value);
            else if (key == "type_fractions") c.type_fractions = value.get<std::array<double, 3>>();
            else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
            else if (key == "embedding_scale") c.embedding_scale = value.get<double>();
            else throw InputError("synth config: unknown key \"" + key + "\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

inline std::string class_name(ClassIndex i) { return "c" + std::to_string(i); }

inline Vocabulary synthetic_vocabulary(std::size_t num_classes) {
    std::vector<std::string> entries;
    for (ClassIndex i = 0; i < num_classes; ++i) entries.push_back(class_name(i));
    return Vocabulary(std::move(entries));
}

struct SynthData {
    Vocabulary vocab;
    FeatureDataset train;
    FeatureDataset val;
    /// Latent answer distributions, row per question (train rows then val rows).
    Matrix latent;
};

namespace detail {

/**
 * Dirichlet draw computed through log-gamma variates so tiny alphas do not
 * underflow: for shape a < 1, G(a) = G(a + 1) * U^(1/a).
 */
inline std::vector<double> sample_dirichlet(std::size_t k, double alpha, std::mt19937_64& rng) {
    std::gamma_distribution<double> gamma(alpha < 1.0 ? alpha + 1.0 : alpha, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> logs(k);
    for (auto& l : logs) {
        l = std::log(gamma(rng));
        if (alpha < 1.0) {
            double u = unif(rng);
            while (u <= 0.0) u = unif(rng);
            l += std::log(u) / alpha;
        }
    }
    double m = logs[0];
    for (double l : logs) m = std::max(m, l);
    double s = 0.0;
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = std::exp(logs[i] - m);
        s += p[i];
    }
    for (double& v : p) v /= s;
    return p;
}

inline FeatureDataset synth_split(const SynthConfig& cfg, const Vocabulary& vocab, const Matrix& embedding,
                                  std::size_t count, std::uint64_t first_id, Split split, std::mt19937_64& rng,
                                  Matrix& latent, std::size_t latent_offset) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    FeatureDataset ds;
    ds.split = split;
    ds.features = Matrix(count, cfg.feature_dim);
    for (std::size_t q = 0; q < count; ++q) {
        const auto p = sample_dirichlet(cfg.num_classes, cfg.dirichlet_alpha, rng);
        std::copy(p.begin(), p.end(), latent.row(latent_offset + q).begin());

        std::discrete_distribution<std::size_t> annotator(p.begin(), p.end());
        std::vector<std::string> answers;
        answers.reserve(kAnnotators);
        for (std::size_t a = 0; a < kAnnotators; ++a) answers.push_back(class_name(annotator(rng)));

        for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
            double v = 0.0;
            for (std::size_t c = 0; c < cfg.num_classes; ++c) v += embedding(d, c) * p[c];
            ds.features(q, d) = v + cfg.noise_sigma * noise(rng);
        }

        const double u = unif(rng);
        AnswerType type = AnswerType::Other;
        if (u < cfg.type_fractions[0]) type = AnswerType::YesNo;
        else if (u < cfg.type_fractions[0] + cfg.type_fractions[1]) type = AnswerType::Number;

        ds.answer_sets.emplace_back(first_id + q, std::move(answers), type);
        ds.ground_truths.push_back(to_ground_truth(ds.answer_sets.back(), vocab));
    }
    return ds;
}

} // namespace detail

/// Generates train and validation splits. Question ids run 1..num_train+num_val.
inline SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    Matrix embedding(cfg.feature_dim, cfg.num_classes);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t d = 0; d < cfg.feature_dim; ++d) {
        for (std::size_t c = 0; c < cfg.num_classes; ++c) embedding(d, c) = cfg.embedding_scale * gauss(rng);
    }

    Vocabulary vocab = synthetic_vocabulary(cfg.num_classes);
    Matrix latent(cfg.num_train + cfg.num_val, cfg.num_classes);
    FeatureDataset train =
        detail::synth_split(cfg, vocab, embedding, cfg.num_train, 1, Split::Train, rng, latent, 0);
    FeatureDataset val = detail::synth_split(cfg, vocab, embedding, cfg.num_val, cfg.num_train + 1, Split::Validation,
                                             rng, latent, cfg.num_train);
    return SynthData{std::move(vocab), std::move(train), std::move(val), std::move(latent)};
}

/// Writes vocab.txt plus annotations and features for both splits.
inline void write_dataset(const fs::path& dir, const SynthData& data) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
    save_vocabulary(DatasetLayout::vocabulary(dir), data.vocab);
    save_split(dir, data.train);
    save_split(dir, data.val);
}

} // namespace vqasoft
