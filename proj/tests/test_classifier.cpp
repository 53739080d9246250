#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "stereolive/classifier.hpp"

using namespace stereolive;

namespace {

GrayImage constant_crop(double v) { return GrayImage(kCropSize, kCropSize, std::vector<double>(kCropSize * kCropSize, v)); }

std::vector<Sample> trivially_separable() {
    return {Sample{constant_crop(1.0), 1, {}}, Sample{constant_crop(0.0), 0, {}}};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::size_t a = 0;
    for (std::size_t b; (b = s.find('\n', a)) != std::string::npos; a = b + 1) out.push_back(s.substr(a, b - a));
    return out;
}

}  // namespace

TEST(SplitDataset, PartitionAndSizes) {
    const auto s = split_dataset(10, 0.25, 3);
    EXPECT_EQ(s.val.size(), 2u);
    EXPECT_EQ(s.train.size(), 8u);
    std::vector<int> seen(10, 0);
    for (auto i : s.train) ++seen[i];
    for (auto i : s.val) ++seen[i];
    for (int c : seen) EXPECT_EQ(c, 1);
    EXPECT_EQ(split_dataset(10, 0.25, 3).val, s.val);
    EXPECT_TRUE(split_dataset(4, 0.0, 1).val.empty());
}

TEST(Train, TriviallySeparablePairIsLearned) {
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.val_fraction = 0.2;  // floor(2 * 0.2) = 0 validation samples
    const auto r = train(trivially_separable(), cfg);
    ASSERT_EQ(r.history.size(), 50u);
    bool reached = false;
    for (const auto& e : r.history) reached = reached || e.train_acc == 1.0;
    EXPECT_TRUE(reached);
    EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
    EXPECT_TRUE(std::isnan(r.history.back().val_loss));
    EXPECT_GT(nn::predict(r.model, constant_crop(1.0)), nn::predict(r.model, constant_crop(0.0)));
}

TEST(Train, DeterministicAndCallback) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.val_fraction = 0.2;  // floor(2 * 0.2) = 0 validation samples
    std::size_t calls = 0;
    const auto a = train(trivially_separable(), cfg, [&](const EpochStats& s) { EXPECT_EQ(s.epoch, ++calls); });
    const auto b = train(trivially_separable(), cfg);
    EXPECT_EQ(calls, 3u);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(nn::encode_weights(a.model), nn::encode_weights(b.model));
}

TEST(Train, RejectsBadInput) {
    TrainConfig cfg;
    cfg.epochs = 1;
    EXPECT_THROW(train({Sample{constant_crop(1.0), 1, {}}, Sample{constant_crop(0.5), 1, {}}}, cfg), ArgumentError);
    EXPECT_THROW(train({Sample{GrayImage(8, 8), 1, {}}, Sample{GrayImage(8, 8), 0, {}}}, cfg), ArgumentError);
    TrainConfig bad = cfg;
    bad.batch_size = 0;
    EXPECT_THROW(train(trivially_separable(), bad), ArgumentError);
    bad = cfg;
    bad.lr = -1.0;
    EXPECT_THROW(train(trivially_separable(), bad), ArgumentError);
    bad = cfg;
    bad.val_fraction = 1.0;
    EXPECT_THROW(train(trivially_separable(), bad), ArgumentError);
}

TEST(Train, UntrainedLossIsNearChance) {
    const auto ds = generate_dataset(10, 10, 7);
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto e = evaluate(nn::build_model(7), ds, all);
    EXPECT_GE(e.mean_loss, 0.6);
    EXPECT_LE(e.mean_loss, 0.8);
}

TEST(Sweep, GridAndLimits) {
    const auto g = threshold_grid(11);
    ASSERT_EQ(g.size(), 11u);
    EXPECT_EQ(g.front(), kSweepFloor);
    EXPECT_EQ(g.back(), kSweepCeil);
    EXPECT_DOUBLE_EQ(g[3], 0.3);

    const std::vector<double> conf{0.1, 0.4, 0.35, 0.8, nn::kSigmoidCeil, nn::kSigmoidFloor};
    const std::vector<int> lab{0, 1, 0, 1, 1, 0};
    const auto sw = sweep_confidences(conf, lab, 11);
    EXPECT_EQ(sw.front().fpr, 1.0);  // every output is accepted at the floor
    EXPECT_EQ(sw.front().fnr, 0.0);
    EXPECT_EQ(sw.back().fpr, 0.0);  // nothing is accepted at the ceiling
    EXPECT_EQ(sw.back().fnr, 1.0);
    EXPECT_EQ(sw.back().precision, 1.0);
    for (std::size_t i = 1; i < sw.size(); ++i) {
        EXPECT_LE(sw[i].fpr, sw[i - 1].fpr);
        EXPECT_GE(sw[i].fnr, sw[i - 1].fnr);
    }
    EXPECT_THROW(sweep_confidences({0.5}, {1}, 11), ArgumentError);
    EXPECT_THROW(threshold_grid(1), ArgumentError);
}

TEST(Sweep, WorkedPoint) {
    // t = 0.5 accepts {0.8, 0.6}; one real, one spoof; rejects real 0.4 and spoof 0.1
    const auto p = score_at(0.5, {0.8, 0.6, 0.4, 0.1}, {1, 0, 1, 0});
    EXPECT_EQ(p.accuracy, 0.5);
    EXPECT_EQ(p.precision, 0.5);
    EXPECT_EQ(p.fpr, 0.5);
    EXPECT_EQ(p.fnr, 0.5);
}

TEST(SelectThreshold, Examples) {
    const ThresholdSweep sw = {{0.1, 0, 0, 1.0, 0}, {0.4, 0, 0, 0.5, 0}, {0.7, 0, 0, 0.0, 0.2}, {0.9, 0, 0, 0.0, 0.6}};
    EXPECT_EQ(select_threshold(sw, 1.0), 0.1);
    EXPECT_EQ(select_threshold(sw, 0.5), 0.4);
    EXPECT_EQ(select_threshold(sw), 0.7);
    const ThresholdSweep never = {{0.1, 0, 0, 1.0, 0}, {0.9, 0, 0, 0.25, 0}};
    EXPECT_FALSE(select_threshold(never).has_value());
    EXPECT_THROW(select_threshold({}), ArgumentError);
}

TEST(Classify, AcceptsAtOrAboveThreshold) {
    EXPECT_TRUE(accepts(0.72, 0.65));
    EXPECT_FALSE(accepts(0.58, 0.65));
    EXPECT_TRUE(accepts(0.65, 0.65));
    DepthClassifier clf{nn::build_model(1), 0.5};
    const auto c = classify(clf, constant_crop(0.3));
    EXPECT_EQ(c.is_real, c.confidence >= 0.5);
    EXPECT_THROW(classify(clf, GrayImage(10, 10)), ArgumentError);
}

TEST(Classify, SweepAccuracyAgreesWithClassify) {
    const auto ds = generate_dataset(3, 3, 21);
    const auto model = nn::build_model(4);
    const auto sw = sweep_thresholds(model, ds, 21);
    for (const auto& p : sw) {
        std::size_t correct = 0;
        for (const auto& s : ds) correct += classify(DepthClassifier{model, p.threshold}, s.depth_crop).is_real == (s.label == 1);
        EXPECT_DOUBLE_EQ(p.accuracy, static_cast<double>(correct) / static_cast<double>(ds.size()));
    }
}

TEST(Csv, Format) {
    const auto e = lines(epoch_stats_csv({EpochStats{1, 0.693147, 0.7, 0.5, 1.0 / 3.0}}));
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0], "epoch,train_loss,val_loss,train_acc,val_acc");
    EXPECT_EQ(e[1], "1,0.693147,0.7,0.5,0.333333");
    const auto s = lines(sweep_csv({SweepPoint{0.25, 0.75, 1.0, 0.0, 0.5}}));
    EXPECT_EQ(s[0], "threshold,accuracy,precision,fpr,fnr");
    EXPECT_EQ(s[1], "0.25,0.75,1,0,0.5");
}

TEST(ClassifierFiles, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "stereolive_clf_test";
    std::filesystem::create_directories(dir);
    const DepthClassifier clf{nn::build_model(2), 0.625};
    save_classifier(dir / "m.slnn", clf);
    EXPECT_TRUE(std::filesystem::exists(classifier_sidecar(dir / "m.slnn")));
    const auto back = load_classifier(dir / "m.slnn");
    EXPECT_EQ(back.model, clf.model);
    EXPECT_EQ(back.threshold, 0.625);
    write_text(classifier_sidecar(dir / "m.slnn"), "{not json");
    EXPECT_THROW(load_classifier(dir / "m.slnn"), DecodeError);
    std::filesystem::remove_all(dir);
}
