#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "test_support.hpp"
#include "vqasoft/synth.hpp"

using namespace vqasoft;

namespace {

SynthConfig small_config(double alpha, std::uint64_t seed = 5) {
    SynthConfig c;
    c.num_classes = 20;
    c.num_train = 1500;
    c.num_val = 500;
    c.feature_dim = 8;
    c.dirichlet_alpha = alpha;
    c.seed = seed;
    return c;
}

int max_count(const AnswerSet& s) {
    std::map<std::string, int> counts;
    int best = 0;
    for (const auto& a : s.answers()) best = std::max(best, ++counts[a]);
    return best;
}

/// E[max class count] for 10 uniform draws over k classes, via
/// P(max <= m) = 10! [x^10] (sum_{j<=m} x^j / j!)^k.
long double expected_uniform_max_count(int k) {
    auto prob_max_at_most = [k](int m) {
        std::vector<long double> poly(11, 0.0L);
        poly[0] = 1.0L;
        for (int c = 0; c < k; ++c) {
            std::vector<long double> next(11, 0.0L);
            for (int i = 0; i <= 10; ++i) {
                long double fact = 1.0L;
                for (int j = 0; j <= m && i + j <= 10; ++j) {
                    if (j > 0) fact *= j;
                    next[i + j] += poly[i] / fact;
                }
            }
            poly = next;
        }
        long double f10 = 3628800.0L;
        return poly[10] * f10 / std::pow(static_cast<long double>(k), 10);
    };
    long double e = 0.0L;
    for (int m = 1; m <= 10; ++m) e += m * (prob_max_at_most(m) - prob_max_at_most(m - 1));
    return e;
}

} // namespace

TEST(Synth, SameSeedIsBitwiseIdentical) {
    const auto a = generate(small_config(0.5, 17));
    const auto b = generate(small_config(0.5, 17));
    EXPECT_EQ(a.train.features, b.train.features);
    EXPECT_EQ(a.val.features, b.val.features);
    EXPECT_EQ(a.train.answer_sets, b.train.answer_sets);
    EXPECT_EQ(a.val.answer_sets, b.val.answer_sets);
    EXPECT_EQ(a.latent, b.latent);

    const auto c = generate(small_config(0.5, 18));
    EXPECT_NE(a.train.features, c.train.features);
}

TEST(Synth, TargetsCoverFullMass) {
    const auto d = generate(small_config(0.5));
    EXPECT_EQ(d.vocab.size(), 20u);
    EXPECT_EQ(d.vocab[3], "c3");
    for (const auto* ds : {&d.train, &d.val}) {
        for (std::size_t i = 0; i < ds->size(); ++i) {
            ASSERT_TRUE(ds->ground_truths[i].has_value());
            EXPECT_NEAR(ds->ground_truths[i]->weight_sum(), 1.0, 1e-12);
            EXPECT_EQ(*ds->ground_truths[i], to_ground_truth(ds->answer_sets[i], d.vocab));
        }
    }
    EXPECT_EQ(d.train.answer_sets.front().question_id(), 1u);
    EXPECT_EQ(d.val.answer_sets.front().question_id(), 1501u);
}

TEST(Synth, TinyAlphaMakesAnnotatorsAgree) {
    const auto d = generate(small_config(1e-3));
    std::size_t unanimous = 0;
    for (const auto& s : d.train.answer_sets) unanimous += max_count(s) == 10 ? 1 : 0;
    // Expected unanimous fraction is K * E[p_1^10] under a symmetric Dirichlet.
    const double a = 1e-3;
    const double k = 20.0;
    const double expected =
        k * std::exp(std::lgamma(a + 10) + std::lgamma(k * a) - std::lgamma(a) - std::lgamma(k * a + 10));
    EXPECT_NEAR(expected, 0.947957, 1e-6);
    const double n = static_cast<double>(d.train.size());
    const double sd = std::sqrt(expected * (1 - expected) / n);
    EXPECT_NEAR(static_cast<double>(unanimous) / n, expected, 4 * sd);
}

TEST(Synth, TinyAlphaSmallVocabularyIsAtLeast95PercentUnanimous) {
    auto c = small_config(1e-3);
    c.num_classes = 6;
    const auto d = generate(c);
    std::size_t unanimous = 0;
    for (const auto& s : d.train.answer_sets) unanimous += max_count(s) == 10 ? 1 : 0;
    // Expected fraction here is 0.98598.
    EXPECT_GE(static_cast<double>(unanimous) / d.train.size(), 0.95);
}

TEST(Synth, HugeAlphaApproachesUniformMultinomial) {
    const auto d = generate(small_config(1e6));
    double total = 0.0;
    for (const auto& s : d.train.answer_sets) total += max_count(s);
    const double mean = total / d.train.size();
    const double expected = static_cast<double>(expected_uniform_max_count(20));
    EXPECT_NEAR(expected, 2.17737, 1e-5); // exact rational evaluation, cross-checked by simulation
    EXPECT_NEAR(mean, expected, 0.06);
}

TEST(Synth, TypeFractionsRespected) {
    auto cfg = small_config(0.5);
    cfg.type_fractions = {0.0, 1.0, 0.0};
    const auto d = generate(cfg);
    for (const auto& s : d.val.answer_sets) EXPECT_EQ(s.type(), AnswerType::Number);
}

TEST(Synth, ConfigValidation) {
    auto bad = small_config(0.5);
    bad.num_classes = 1;
    EXPECT_THROW(generate(bad), InputError);
    bad = small_config(0.0);
    EXPECT_THROW(generate(bad), InputError);
    bad = small_config(0.5);
    bad.type_fractions = {0.5, 0.5, 0.5};
    EXPECT_THROW(generate(bad), InputError);
    bad = small_config(0.5);
    bad.annotators = 9;
    EXPECT_THROW(generate(bad), InputError);

    const auto cfg = synth_config_from_json(nlohmann::json{{"num_classes", 5}, {"dirichlet_alpha", 2.0}});
    EXPECT_EQ(cfg.num_classes, 5u);
    EXPECT_EQ(cfg.dirichlet_alpha, 2.0);
    EXPECT_EQ(cfg.num_train, 5000u);
    EXPECT_THROW(synth_config_from_json(nlohmann::json{{"num_clases", 5}}), InputError);
    EXPECT_THROW(synth_config_from_json(nlohmann::json{{"num_classes", "five"}}), InputError);
    EXPECT_THROW(synth_config_from_json(nlohmann::json{{"num_train", -1}}), InputError);
    EXPECT_THROW(synth_config_from_json(nlohmann::json{{"seed", 1.5}}), InputError);
}

TEST(Synth, WrittenDatasetLoadsBack) {
    auto cfg = small_config(0.5);
    cfg.num_train = 50;
    cfg.num_val = 20;
    const auto d = generate(cfg);
    const auto dir = testutil::fresh_temp_dir("synth_roundtrip");
    write_dataset(dir, d);
    const auto vocab = load_vocabulary(DatasetLayout::vocabulary(dir));
    EXPECT_EQ(vocab.entries(), d.vocab.entries());
    const auto train = load_split(dir, Split::Train, vocab);
    const auto val = load_split(dir, Split::Validation, vocab);
    EXPECT_EQ(train.answer_sets, d.train.answer_sets);
    EXPECT_EQ(train.features, d.train.features);
    EXPECT_EQ(train.ground_truths, d.train.ground_truths);
    EXPECT_EQ(val.answer_sets, d.val.answer_sets);
    EXPECT_EQ(val.features, d.val.features);
}
