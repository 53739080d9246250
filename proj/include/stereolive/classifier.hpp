#pragma once

// Training, threshold sweeps and operating-point selection for the
// depth-map liveness classifier.

#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "nn.hpp"
#include "random.hpp"
#include "synth.hpp"

namespace stereolive {

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 7;
    double val_fraction = 0.2;

    void validate() const {
        detail::require(epochs >= 1, "TrainConfig: epochs must be >= 1");
        detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
        detail::require(std::isfinite(lr) && lr >= 0.0, "TrainConfig: lr must be finite and >= 0");
        detail::require(val_fraction > 0.0 && val_fraction < 1.0, "TrainConfig: val_fraction must be in (0,1)");
    }
};

/// Per-epoch training record. Train figures are running means over the
/// epoch's mini-batches (before each batch's update); validation figures are
/// measured after the epoch. Validation fields are NaN when the split left
/// no validation samples.
struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
    nn::ModelParams model;
    std::vector<EpochStats> history;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Seeded shuffle of 0..n-1; the last floor(n * val_fraction) indices form
/// the validation set.
inline DatasetSplit split_dataset(std::size_t n, double val_fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(hash_combine(seed, 0x5EED5B117ULL));
    rng.shuffle(idx);
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));
    DatasetSplit s;
    s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
    s.val.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
    return s;
}

namespace detail {

inline void require_both_labels(const std::vector<Sample>& samples, const char* what) {
    bool pos = false, neg = false;
    for (const auto& s : samples) {
        require(s.label == 0 || s.label == 1, std::string(what) + ": labels must be 0 or 1");
        (s.label == 1 ? pos : neg) = true;
    }
    require(pos && neg, std::string(what) + ": dataset must contain both labels");
}

inline void require_crop_size(const GrayImage& img, const char* what) {
    require(img.width() == kCropSize && img.height() == kCropSize,
            std::string(what) + ": crop must be 96x96, got " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
}

}  // namespace detail

struct EvalSummary {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

/// Mean BCE and accuracy at threshold 0.5 over `indices`.
inline EvalSummary evaluate(const nn::ModelParams& model, const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
    if (indices.empty()) return {std::nan(""), std::nan("")};
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i : indices) {
        const double p = nn::predict(model, samples[i].depth_crop);
        loss += nn::bce_loss(p, samples[i].label).loss;
        correct += ((p >= 0.5) == (samples[i].label == 1)) ? 1 : 0;
    }
    const auto n = static_cast<double>(indices.size());
    return {loss / n, static_cast<double>(correct) / n};
}

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on mean batch BCE. Fully determined by (samples, config):
/// the model is initialised from config.seed and every shuffle derives from
/// it.
inline TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, const EpochCallback& on_epoch = {}) {
    config.validate();
    detail::require_both_labels(samples, "train");
    for (const auto& s : samples) detail::require_crop_size(s.depth_crop, "train");

    const auto split = split_dataset(samples.size(), config.val_fraction, config.seed);
    TrainResult result{nn::build_model(config.seed), {}};
    auto adam = nn::AdamState::for_model(result.model, config.lr);
    auto grads = nn::zeros_like(result.model);
    auto grad_tensors = nn::parameter_tensors(grads);
    Rng order_rng(hash_combine(config.seed, 0xBA7C4ULL));
    std::vector<std::size_t> order = split.train;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (nn::Tensor* t : grad_tensors) std::fill(t->data.begin(), t->data.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t k = start; k < end; ++k) {
                const auto& s = samples[order[k]];
                const auto r = nn::loss_and_gradient(result.model, s.depth_crop, s.label, grads, scale);
                loss_sum += r.loss;
                correct += ((r.probability >= 0.5) == (s.label == 1)) ? 1 : 0;
            }
            nn::adam_step(result.model, grads, adam);
        }
        const auto n_train = static_cast<double>(order.size());
        const auto val = evaluate(result.model, samples, split.val);
        EpochStats st{epoch, loss_sum / n_train, val.mean_loss, static_cast<double>(correct) / n_train, val.accuracy};
        result.history.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Threshold sweeps

struct SweepPoint {
    double threshold = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;  // w.r.t. the real-face class; 1.0 when nothing is predicted real
    double fpr = 0.0;        // spoofs accepted / spoofs
    double fnr = 0.0;        // real faces rejected / real faces

    friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

using ThresholdSweep = std::vector<SweepPoint>;

/// The lowest and highest sweep thresholds. Every confidence the network can
/// produce lies in [kSweepFloor, kSweepCeil), so the first grid point accepts
/// everything and the last rejects everything.
inline constexpr double kSweepFloor = nn::kSigmoidFloor;
inline constexpr double kSweepCeil = 1.0 - 0x1.0p-53;

/// `grid` evenly spaced thresholds i/(grid-1), with the two endpoints pulled
/// into the open interval (0, 1).
inline std::vector<double> threshold_grid(std::size_t grid) {
    detail::require(grid >= 2, "threshold_grid: grid must be >= 2");
    std::vector<double> t(grid);
    for (std::size_t i = 0; i < grid; ++i) t[i] = static_cast<double>(i) / static_cast<double>(grid - 1);
    t.front() = kSweepFloor;
    t.back() = kSweepCeil;
    return t;
}

inline SweepPoint score_at(double threshold, const std::vector<double>& confidences, const std::vector<int>& labels) {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < confidences.size(); ++i) {
        const bool accepted = confidences[i] >= threshold;
        if (labels[i] == 1) {
            (accepted ? tp : fn) += 1;
        } else {
            (accepted ? fp : tn) += 1;
        }
    }
    const auto n = static_cast<double>(confidences.size());
    SweepPoint p;
    p.threshold = threshold;
    p.accuracy = static_cast<double>(tp + tn) / n;
    p.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.fpr = fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
    p.fnr = tp + fn == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(tp + fn);
    return p;
}

inline ThresholdSweep sweep_confidences(const std::vector<double>& confidences, const std::vector<int>& labels, std::size_t grid) {
    detail::require(!confidences.empty() && confidences.size() == labels.size(), "sweep: need one label per confidence");
    bool pos = false, neg = false;
    for (int l : labels) (l == 1 ? pos : neg) = true;
    detail::require(pos && neg, "sweep: dataset must contain both labels");
    ThresholdSweep out;
    for (double t : threshold_grid(grid)) out.push_back(score_at(t, confidences, labels));
    return out;
}

inline ThresholdSweep sweep_thresholds(const nn::ModelParams& model, const std::vector<Sample>& samples, std::size_t grid) {
    detail::require(!samples.empty(), "sweep_thresholds: no samples");
    detail::require_both_labels(samples, "sweep_thresholds");
    std::vector<double> conf;
    std::vector<int> labels;
    for (const auto& s : samples) {
        detail::require_crop_size(s.depth_crop, "sweep_thresholds");
        conf.push_back(nn::predict(model, s.depth_crop));
        labels.push_back(s.label);
    }
    return sweep_confidences(conf, labels, grid);
}

/// Smallest threshold whose FPR <= max_fpr, or nullopt if none qualifies.
inline std::optional<double> select_threshold(const ThresholdSweep& sweep, double max_fpr = 0.0) {
    detail::require(!sweep.empty(), "select_threshold: empty sweep");
    for (const auto& p : sweep)
        if (p.fpr <= max_fpr) return p.threshold;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Deployed classifier

struct DepthClassifier {
    nn::ModelParams model;
    double threshold = 0.5;

    void validate() const {
        detail::require(threshold > 0.0 && threshold < 1.0, "DepthClassifier: threshold must be in (0,1)");
    }
};

struct Classification {
    double confidence;
    bool is_real;
};

/// Confidence at or above the threshold counts as a real face.
inline bool accepts(double confidence, double threshold) noexcept { return confidence >= threshold; }

inline Classification classify(const DepthClassifier& clf, const GrayImage& crop) {
    clf.validate();
    detail::require_crop_size(crop, "classify");
    const double c = nn::predict(clf.model, crop);
    return {c, accepts(c, clf.threshold)};
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

inline std::string epoch_stats_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_loss,train_acc,val_acc\n";
    for (const auto& s : history)
        out += std::to_string(s.epoch) + "," + detail::fmt6(s.train_loss) + "," + detail::fmt6(s.val_loss) + "," +
               detail::fmt6(s.train_acc) + "," + detail::fmt6(s.val_acc) + "\n";
    return out;
}

inline std::string sweep_csv(const ThresholdSweep& sweep) {
    std::string out = "threshold,accuracy,precision,fpr,fnr\n";
    for (const auto& p : sweep)
        out += detail::fmt6(p.threshold) + "," + detail::fmt6(p.accuracy) + "," + detail::fmt6(p.precision) + "," +
               detail::fmt6(p.fpr) + "," + detail::fmt6(p.fnr) + "\n";
    return out;
}

/// Sidecar next to a weight file: "<weights>.json".
inline std::filesystem::path classifier_sidecar(const std::filesystem::path& weights) {
    auto p = weights;
    p += ".json";
    return p;
}

inline void save_classifier(const std::filesystem::path& weights, const DepthClassifier& clf) {
    clf.validate();
    nn::save_weights(weights, clf.model);
    write_text(classifier_sidecar(weights), nlohmann::json{{"threshold", clf.threshold}}.dump(2) + "\n");
}

/// Loads weights plus the threshold sidecar; a missing sidecar means 0.5.
inline DepthClassifier load_classifier(const std::filesystem::path& weights) {
    DepthClassifier clf{nn::load_weights(weights), 0.5};
    const auto side = classifier_sidecar(weights);
    if (std::filesystem::exists(side)) {
        const auto j = nlohmann::json::parse(read_text(side), nullptr, false);
        if (j.is_discarded() || !j.contains("threshold") || !j["threshold"].is_number())
            throw DecodeError("classifier sidecar '" + side.string() + "' is not {\"threshold\": number}", 0);
        clf.threshold = j["threshold"].get<double>();
        try {
            clf.validate();
        } catch (const ArgumentError& e) {
            throw DecodeError(std::string("classifier sidecar: ") + e.what(), 0);
        }
    }
    return clf;
}

}  // namespace stereolive
