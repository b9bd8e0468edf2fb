#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "vqasoft/data.hpp"

using namespace vqasoft;
namespace fs = std::filesystem;

namespace {

std::string annotation_json(std::uint64_t qid, const std::string& type, int n_answers, const std::string& answer = "yes") {
    std::string answers;
    for (int i = 0; i < n_answers; ++i) {
        answers += (i ? "," : "") + std::string("{\"answer\":\"") + answer + "\",\"answer_confidence\":\"yes\"}";
    }
    return "{\"question_id\":" + std::to_string(qid) + ",\"image_id\":9,\"answer_type\":\"" + type +
           "\",\"answers\":[" + answers + "]}";
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST(Annotations, MinimalFile) {
    const auto sets = parse_annotations("{\"annotations\":[" + annotation_json(1, "yes/no", 10) + "]}");
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].question_id(), 1u);
    EXPECT_EQ(sets[0].type(), AnswerType::YesNo);
    EXPECT_EQ(sets[0].answers()[9], "yes");
}

TEST(Annotations, RawStringsPreserved) {
    const auto sets = parse_annotations("{\"annotations\":[" + annotation_json(3, "other", 10, "Two Dogs.") + "]}");
    EXPECT_EQ(sets[0].answers()[0], "Two Dogs.");
}

TEST(Annotations, WrongAnswerCount) {
    try {
        parse_annotations("{\"annotations\":[" + annotation_json(42, "other", 9) + "]}");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("question 42: expected 10 answers, got 9"), std::string::npos);
    }
}

TEST(Annotations, RejectsMalformedInput) {
    EXPECT_THROW(parse_annotations("{\"annotations\": ["), InputError);
    EXPECT_THROW(parse_annotations("[]"), InputError);
    EXPECT_THROW(parse_annotations("{\"annotations\":[" + annotation_json(1, "color", 10) + "]}"), InputError);
    EXPECT_THROW(parse_annotations("{\"annotations\":[" + annotation_json(1, "other", 10) + "," +
                                   annotation_json(1, "other", 10) + "]}"),
                 InputError);
    EXPECT_THROW(parse_annotations("{\"annotations\":[{\"question_id\":\"1\",\"answer_type\":\"other\",\"answers\":[]}]}"),
                 InputError);
    EXPECT_THROW(parse_annotations("{\"annotations\":[{\"question_id\":-1,\"answer_type\":\"other\",\"answers\":[]}]}"),
                 InputError);
    EXPECT_THROW(parse_annotations("{\"annotations\":[{\"question_id\":1,\"answer_type\":\"other\",\"answers\":[1,2]}]}"),
                 InputError);
}

TEST(Annotations, DuplicateMessage) {
    try {
        parse_annotations("{\"annotations\":[" + annotation_json(5, "other", 10) + "," + annotation_json(5, "other", 10) +
                          "]}");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate question_id"), std::string::npos);
    }
}

TEST(Annotations, SaveLoadIdentity) {
    std::mt19937_64 rng(1);
    std::vector<AnswerSet> sets;
    for (std::uint64_t q = 0; q < 30; ++q) sets.push_back(testutil::random_answer_set(rng, 7, q, AnswerType(q % 3)));
    sets.emplace_back(99, std::vector<std::string>(10, "quote \" and \\ unicode \xc3\xa9"), AnswerType::Other);
    const auto dir = testutil::fresh_temp_dir("annotations");
    save_annotations(dir / "a.json", sets);
    EXPECT_EQ(load_annotations(dir / "a.json"), sets);
}

TEST(Predictions, Parse) {
    const auto m = parse_predictions(R"([{"question_id":1,"answer":"yes"}])");
    EXPECT_EQ(m, (PredictionMap{{1, "yes"}}));
    EXPECT_TRUE(parse_predictions("[]").empty());
    EXPECT_THROW(parse_predictions(R"([{"question_id":1,"answer":"yes"},{"question_id":1,"answer":"no"}])"),
                 InputError);
    EXPECT_THROW(parse_predictions(R"([{"question_id":1}])"), InputError);
    EXPECT_THROW(parse_predictions(R"([{"answer":"yes"}])"), InputError);
    EXPECT_THROW(parse_predictions(R"({"question_id":1,"answer":"yes"})"), InputError);
}

TEST(Predictions, SaveLoad) {
    const PredictionMap m{{3, "c1"}, {1, "two dogs"}};
    const auto dir = testutil::fresh_temp_dir("predictions");
    save_predictions(dir / "p.json", m);
    EXPECT_EQ(load_predictions(dir / "p.json"), m);
}

TEST(Curves, OneEpochFile) {
    CurvePoint p;
    p.epoch = 1;
    p.train_loss = 1.5;
    p.val_loss = 2.25;
    p.val_accuracy.overall = 0.5;
    p.val_accuracy.yes_no = 0.75;
    p.val_accuracy.number = 0.125;
    p.val_accuracy.other = 1.0 / 3.0;
    const std::vector<CurvePoint> curve{p};
    EXPECT_EQ(curves_to_csv(curve),
              "epoch,train_loss,val_loss,val_acc_all,val_acc_yesno,val_acc_number,val_acc_other\n"
              "1,1.500000,2.250000,0.500000,0.750000,0.125000,0.333333\n");
}

TEST(Curves, RoundTripWithinPrintPrecision) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<CurvePoint> curve;
    for (int e = 1; e <= 12; ++e) {
        CurvePoint p;
        p.epoch = e;
        p.train_loss = u(rng);
        p.val_loss = u(rng);
        p.val_accuracy.overall = u(rng) / 3;
        p.val_accuracy.yes_no = u(rng) / 3;
        p.val_accuracy.number = u(rng) / 3;
        p.val_accuracy.other = u(rng) / 3;
        curve.push_back(p);
    }
    const auto dir = testutil::fresh_temp_dir("curves");
    save_curves(dir / "c.csv", curve);
    const auto back = load_curves(dir / "c.csv");
    ASSERT_EQ(back.size(), curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        EXPECT_EQ(back[i].epoch, static_cast<int>(i) + 1);
        EXPECT_NEAR(back[i].train_loss, curve[i].train_loss, 5e-7);
        EXPECT_NEAR(back[i].val_loss, curve[i].val_loss, 5e-7);
        EXPECT_NEAR(back[i].val_accuracy.overall, curve[i].val_accuracy.overall, 5e-7);
        EXPECT_NEAR(back[i].val_accuracy.other, curve[i].val_accuracy.other, 5e-7);
    }
    EXPECT_THROW(save_curves(dir / "empty.csv", std::vector<CurvePoint>{}), InputError);
    EXPECT_THROW(save_curves(dir / "no_such_dir" / "c.csv", curve), InputError);
}

TEST(Curves, ExtremeValuesKeepAllFields) {
    CurvePoint p;
    p.epoch = 1;
    p.train_loss = 1.7e308;
    p.val_loss = -1.7e308;
    const auto back = parse_curves(curves_to_csv(std::vector<CurvePoint>{p}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].train_loss, 1.7e308);
    EXPECT_EQ(back[0].val_loss, -1.7e308);
}

TEST(Curves, RejectsNonConsecutiveEpochs) {
    EXPECT_THROW(parse_curves(std::string(kCurveHeader) + "\n2,1,1,0,0,0,0\n"), InputError);
    EXPECT_THROW(parse_curves("epoch,loss\n"), InputError);
}

TEST(Features, RoundTripIsExact) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 3.0);
    Matrix m(5, 4);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c) m(r, c) = g(rng);
    const std::vector<std::uint64_t> ids{10, 11, 12, 13, 14};
    const auto dir = testutil::fresh_temp_dir("features");
    save_features(dir / "f.csv", ids, m);
    const auto t = load_features(dir / "f.csv");
    EXPECT_EQ(t.question_ids, ids);
    EXPECT_EQ(t.features, m);
}

TEST(Features, RejectsRaggedAndNonFinite) {
    const auto dir = testutil::fresh_temp_dir("features_bad");
    write(dir / "ragged.csv", "question_id,f0,f1\n1,0.5,0.25\n2,0.5\n");
    EXPECT_THROW(load_features(dir / "ragged.csv"), InputError);
    write(dir / "nan.csv", "question_id,f0\n1,nan\n");
    EXPECT_THROW(load_features(dir / "nan.csv"), InputError);
    write(dir / "text.csv", "question_id,f0\n1,abc\n");
    EXPECT_THROW(load_features(dir / "text.csv"), InputError);
    EXPECT_THROW(load_features(dir / "missing.csv"), InputError);
}

TEST(Dataset, UnanswerableQuestionsDroppedOnlyFromTraining) {
    const Vocabulary vocab({"yes", "no"});
    std::vector<AnswerSet> sets{AnswerSet(1, std::vector<std::string>(10, "yes"), AnswerType::YesNo),
                                AnswerSet(2, std::vector<std::string>(10, "blue"), AnswerType::Other)};
    FeatureTable table{{2, 1}, Matrix(2, 1)};
    table.features(0, 0) = 2.0;
    table.features(1, 0) = 1.0;

    const auto train = assemble_dataset(sets, table, vocab, Split::Train);
    ASSERT_EQ(train.size(), 1u);
    EXPECT_EQ(train.features(0, 0), 1.0);
    EXPECT_TRUE(train.ground_truths[0].has_value());

    const auto val = assemble_dataset(sets, table, vocab, Split::Validation);
    ASSERT_EQ(val.size(), 2u);
    EXPECT_EQ(val.features(1, 0), 2.0);
    EXPECT_FALSE(val.ground_truths[1].has_value());

    FeatureTable wrong{{1, 3}, Matrix(2, 1)};
    EXPECT_THROW(assemble_dataset(sets, wrong, vocab, Split::Validation), InputError);
}

TEST(Vocabulary, FileRoundTrip) {
    const Vocabulary v({"yes", "no", "two dogs"});
    const auto dir = testutil::fresh_temp_dir("vocab");
    save_vocabulary(dir / "vocab.txt", v);
    EXPECT_EQ(load_vocabulary(dir / "vocab.txt").entries(), v.entries());
}
