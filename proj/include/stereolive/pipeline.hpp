#pragma once

// Authentication flow: the depth classifier gates an embedding recognizer
// over an enrolled gallery. Decisions are ID <name>, Unknown or None.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "classifier.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace stereolive {

using Embedding = std::vector<double>;

/// Opaque handle to a face image (a path or an "identity#instance" tag).
/// Only the embedding provider interprets it.
struct FaceRef {
    std::string tag;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dim() const = 0;
    /// Throws ProviderError on failure. Must be deterministic per input.
    virtual Embedding embed(const FaceRef& face) const = 0;
};

inline constexpr std::size_t kEmbeddingDim = 128;

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Identity part of a face tag: the file name without directory or
/// extension, cut at the first '#'. "faces/alice#2.pgm" -> "alice".
inline std::string face_identity(std::string_view tag) {
    if (const auto slash = tag.find_last_of("/\\"); slash != std::string_view::npos) tag.remove_prefix(slash + 1);
    if (const auto hash = tag.find('#'); hash != std::string_view::npos) tag = tag.substr(0, hash);
    if (const auto dot = tag.rfind('.'); dot != std::string_view::npos && dot > 0) tag = tag.substr(0, dot);
    return std::string(tag);
}

/// Stand-in recognizer: each identity owns a seeded random unit vector;
/// each distinct tag adds Gaussian jitter (sigma `jitter` per component)
/// before renormalising. Random unit vectors in 128 dimensions are nearly
/// orthogonal (distance ~ sqrt(2)), while same-identity jitter stays ~0.1.
class StubProvider final : public EmbeddingProvider {
public:
    explicit StubProvider(std::uint64_t seed, std::size_t dim = kEmbeddingDim, double jitter = 0.005)
        : seed_(seed), dim_(dim), jitter_(jitter) {
        detail::require(dim_ >= 1, "StubProvider: dim must be >= 1");
    }

    std::size_t dim() const override { return dim_; }

    Embedding embed(const FaceRef& face) const override {
        const std::string id = face_identity(face.tag);
        if (id.empty()) throw ProviderError("stub provider: face tag '" + face.tag + "' names no identity");
        Rng base(hash_combine(seed_, fnv1a64(id)));
        Rng jit(hash_combine(seed_ ^ 0x6A09E667F3BCC909ULL, fnv1a64(face.tag)));
        Embedding e(dim_);
        for (double& v : e) v = base.normal();
        normalize(e);
        for (double& v : e) v += jitter_ * jit.normal();
        normalize(e);
        return e;
    }

private:
    static void normalize(Embedding& e) {
        double n = 0.0;
        for (double v : e) n += v * v;
        n = std::sqrt(n);
        for (double& v : e) v /= n;
    }

    std::uint64_t seed_;
    std::size_t dim_;
    double jitter_;
};

inline StubProvider stub_provider(std::uint64_t seed) { return StubProvider(seed); }

/// Forwards to another provider and counts invocations.
class CountingProvider final : public EmbeddingProvider {
public:
    explicit CountingProvider(const EmbeddingProvider& inner) : inner_(inner) {}

    std::size_t dim() const override { return inner_.dim(); }

    Embedding embed(const FaceRef& face) const override {
        calls_.fetch_add(1, std::memory_order_relaxed);
        return inner_.embed(face);
    }

    std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

private:
    const EmbeddingProvider& inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

inline double euclidean(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Gallery

inline constexpr const char* kUnknownLabel = "Unknown";
inline constexpr const char* kNoneLabel = "None";

/// One embedding per identity name, all of dimension `dim`.
class Gallery {
public:
    explicit Gallery(std::size_t dim = kEmbeddingDim) : dim_(dim) { detail::require(dim >= 1, "Gallery: dim must be >= 1"); }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool contains(const std::string& name) const { return entries_.contains(name); }
    const std::map<std::string, Embedding>& entries() const noexcept { return entries_; }

    /// Copy of this gallery with `name` mapped to `embedding` (overwrites).
    Gallery with(const std::string& name, Embedding embedding) const {
        validate_name(name);
        detail::require(embedding.size() == dim_, "Gallery: embedding has dimension " + std::to_string(embedding.size()) +
                                                      ", gallery expects " + std::to_string(dim_));
        for (double v : embedding) detail::require(std::isfinite(v), "Gallery: non-finite embedding component");
        Gallery g = *this;
        g.entries_[name] = std::move(embedding);
        return g;
    }

    struct Match {
        std::string name;
        double distance;
    };

    /// Nearest entry by Euclidean distance; ties go to the smallest name.
    std::optional<Match> nearest(const Embedding& query) const {
        std::optional<Match> best;
        for (const auto& [name, e] : entries_) {
            const double d = euclidean(query, e);
            if (!best || d < best->distance) best = Match{name, d};
        }
        return best;
    }

    static void validate_name(const std::string& name) {
        detail::require(!name.empty(), "Gallery: identity name must be non-empty");
        detail::require(name != kUnknownLabel && name != kNoneLabel, "Gallery: '" + name + "' is a reserved decision label");
    }

    nlohmann::json to_json() const {
        nlohmann::json entries = nlohmann::json::object();
        for (const auto& [name, e] : entries_) entries[name] = e;
        return {{"version", 1}, {"dim", dim_}, {"entries", entries}};
    }

    static Gallery from_json(const nlohmann::json& j) {
        const auto fail = [](const std::string& m) { throw DecodeError("gallery: " + m, 0); };
        if (!j.is_object() || !j.contains("version") || !j.contains("dim") || !j.contains("entries")) fail("expected {version, dim, entries}");
        if (j["version"] != 1) fail("unsupported version");
        if (!j["dim"].is_number_unsigned() || j["dim"].get<std::size_t>() == 0) fail("dim must be a positive integer");
        if (!j["entries"].is_object()) fail("entries must be an object");
        Gallery g(j["dim"].get<std::size_t>());
        for (const auto& [name, arr] : j["entries"].items()) {
            if (!arr.is_array()) fail("entry '" + name + "' is not an array");
            Embedding e;
            for (const auto& v : arr) {
                if (!v.is_number()) fail("entry '" + name + "' has a non-numeric component");
                e.push_back(v.get<double>());
            }
            try {
                g = g.with(name, std::move(e));
            } catch (const ArgumentError& err) {
                fail(err.what());
            }
        }
        return g;
    }

private:
    std::size_t dim_;
    std::map<std::string, Embedding> entries_;
};

inline void save_gallery(const std::filesystem::path& path, const Gallery& g) { write_text(path, g.to_json().dump(2) + "\n"); }

inline Gallery load_gallery(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw DecodeError("gallery: '" + path.string() + "' is not valid JSON", 0);
    return Gallery::from_json(j);
}

/// Gallery with `name` enrolled from `face`. Re-enrolling overwrites.
inline Gallery enroll(const Gallery& gallery, const std::string& name, const FaceRef& face, const EmbeddingProvider& provider) {
    Gallery::validate_name(name);
    return gallery.with(name, provider.embed(face));
}

// ---------------------------------------------------------------------------
// Decisions

struct AuthDecision {
    enum class Kind { id, unknown, none };

    Kind kind = Kind::none;
    std::string name;  // set only for Kind::id

    static AuthDecision identified(std::string n) { return {Kind::id, std::move(n)}; }
    static AuthDecision unknown() { return {Kind::unknown, {}}; }
    static AuthDecision none() { return {Kind::none, {}}; }

    /// Confusion-matrix label: the identity name, "Unknown" or "None".
    std::string label() const {
        switch (kind) {
            case Kind::id: return name;
            case Kind::unknown: return kUnknownLabel;
            case Kind::none: break;
        }
        return kNoneLabel;
    }

    /// CLI rendering: "ID <name>", "Unknown" or "None".
    std::string display() const { return kind == Kind::id ? "ID " + name : label(); }

    friend bool operator==(const AuthDecision&, const AuthDecision&) = default;
};

struct PipelineConfig {
    double depth_threshold = 0.5;
    double match_threshold = 1.0;

    void validate() const {
        detail::require(std::isfinite(depth_threshold) && depth_threshold > 0.0 && depth_threshold < 1.0,
                        "PipelineConfig: depth_threshold must be in (0,1)");
        detail::require(std::isfinite(match_threshold) && match_threshold >= 0.0, "PipelineConfig: match_threshold must be >= 0");
    }
};

struct AuthResult {
    AuthDecision decision;
    double depth_confidence;
};

/// Decision given an already computed depth confidence. The provider is
/// only consulted when the confidence clears `cfg.depth_threshold`.
inline AuthResult authenticate_with_confidence(double confidence, const FaceRef& face, const EmbeddingProvider& provider,
                                               const Gallery& gallery, const PipelineConfig& cfg) {
    cfg.validate();
    if (!accepts(confidence, cfg.depth_threshold)) return {AuthDecision::none(), confidence};
    const Embedding e = provider.embed(face);
    if (e.size() != gallery.dim())
        throw ProviderError("provider returned a " + std::to_string(e.size()) + "-dim embedding, gallery holds " +
                            std::to_string(gallery.dim()) + "-dim");
    const auto match = gallery.nearest(e);
    if (match && match->distance <= cfg.match_threshold) return {AuthDecision::identified(match->name), confidence};
    return {AuthDecision::unknown(), confidence};
}

/// Full gate: depth confidence from the classifier network, compared with
/// `cfg.depth_threshold`; spoofs yield None without touching the provider.
inline AuthResult authenticate(const GrayImage& depth_crop, const FaceRef& face, const DepthClassifier& clf,
                               const EmbeddingProvider& provider, const Gallery& gallery, const PipelineConfig& cfg) {
    cfg.validate();
    detail::require_crop_size(depth_crop, "authenticate");
    const double confidence = nn::predict(clf.model, depth_crop);
    return authenticate_with_confidence(confidence, face, provider, gallery, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Square count matrix, rows = predicted label, columns = true label.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;

    explicit ConfusionMatrix(std::vector<std::string> l = {})
        : labels(std::move(l)), counts(labels.size(), std::vector<std::size_t>(labels.size(), 0)) {}

    std::size_t index_of(const std::string& label) const {
        const auto it = std::find(labels.begin(), labels.end(), label);
        detail::require(it != labels.end(), "ConfusionMatrix: unknown label '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }

    void add(const std::string& truth, const std::string& predicted) { ++counts[index_of(predicted)][index_of(truth)]; }

    std::size_t row_sum(std::size_t r) const {
        std::size_t s = 0;
        for (auto v : counts[r]) s += v;
        return s;
    }

    std::size_t col_sum(std::size_t c) const {
        std::size_t s = 0;
        for (const auto& row : counts) s += row[c];
        return s;
    }

    std::size_t total() const {
        std::size_t s = 0;
        for (std::size_t r = 0; r < counts.size(); ++r) s += row_sum(r);
        return s;
    }
};

/// Macro-averaged metrics. A class never predicted has precision 1.0; a
/// class never present has recall 1.0.
struct PipelineMetrics {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> per_class_f1;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double mean_f1 = 0.0;      // mean of per-class F1
    double harmonic_f1 = 0.0;  // harmonic mean of macro precision and recall
};

namespace detail {

inline PipelineMetrics metrics_from_counts(const std::vector<std::size_t>& diag, const std::vector<std::size_t>& predicted,
                                           const std::vector<std::size_t>& actual) {
    PipelineMetrics m;
    const std::size_t n = diag.size();
    require(n > 0, "metrics: no classes");
    for (std::size_t k = 0; k < n; ++k) {
        const double p = predicted[k] == 0 ? 1.0 : static_cast<double>(diag[k]) / static_cast<double>(predicted[k]);
        const double r = actual[k] == 0 ? 1.0 : static_cast<double>(diag[k]) / static_cast<double>(actual[k]);
        m.precision.push_back(p);
        m.recall.push_back(r);
        m.per_class_f1.push_back(p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r));
        m.macro_precision += p;
        m.macro_recall += r;
        m.mean_f1 += m.per_class_f1.back();
    }
    m.macro_precision /= static_cast<double>(n);
    m.macro_recall /= static_cast<double>(n);
    m.mean_f1 /= static_cast<double>(n);
    const double s = m.macro_precision + m.macro_recall;
    m.harmonic_f1 = s == 0.0 ? 0.0 : 2.0 * m.macro_precision * m.macro_recall / s;
    return m;
}

}  // namespace detail

inline PipelineMetrics compute_metrics(const ConfusionMatrix& cm) {
    const std::size_t n = cm.labels.size();
    std::vector<std::size_t> diag(n), pred(n), actual(n);
    for (std::size_t k = 0; k < n; ++k) {
        diag[k] = cm.counts[k][k];
        pred[k] = cm.row_sum(k);
        actual[k] = cm.col_sum(k);
    }
    return detail::metrics_from_counts(diag, pred, actual);
}

/// Running per-class tallies; yields the same metrics as building the
/// full matrix first.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(std::vector<std::string> labels)
        : labels_(std::move(labels)), diag_(labels_.size()), pred_(labels_.size()), actual_(labels_.size()) {}

    void add(const std::string& truth, const std::string& predicted) {
        const auto t = index(truth), p = index(predicted);
        ++actual_[t];
        ++pred_[p];
        if (t == p) ++diag_[t];
    }

    PipelineMetrics metrics() const { return detail::metrics_from_counts(diag_, pred_, actual_); }

private:
    std::size_t index(const std::string& l) const {
        const auto it = std::find(labels_.begin(), labels_.end(), l);
        detail::require(it != labels_.end(), "MetricsAccumulator: unknown label '" + l + "'");
        return static_cast<std::size_t>(it - labels_.begin());
    }

    std::vector<std::string> labels_;
    std::vector<std::size_t> diag_, pred_, actual_;
};

struct EvalCase {
    GrayImage depth_crop;
    FaceRef face;
    std::string truth;  // identity name, "Unknown" or "None"
};

struct EvaluationReport {
    ConfusionMatrix matrix;
    PipelineMetrics metrics;
    std::vector<AuthResult> results;  // one per case, in input order
};

/// Class labels for a gallery: enrolled names (sorted), then Unknown, None.
inline std::vector<std::string> decision_labels(const Gallery& gallery) {
    std::vector<std::string> labels;
    for (const auto& [name, _] : gallery.entries()) labels.push_back(name);
    labels.emplace_back(kUnknownLabel);
    labels.emplace_back(kNoneLabel);
    return labels;
}

/// Ground truth naming an identity that is not enrolled counts as Unknown.
inline std::string truth_label(const std::string& truth, const Gallery& gallery) {
    detail::require(!truth.empty(), "evaluate_pipeline: empty truth label");
    if (truth == kNoneLabel || truth == kUnknownLabel || gallery.contains(truth)) return truth;
    return kUnknownLabel;
}

inline EvaluationReport evaluate_pipeline(const std::vector<EvalCase>& cases, const DepthClassifier& clf,
                                          const EmbeddingProvider& provider, const Gallery& gallery, const PipelineConfig& cfg) {
    detail::require(!cases.empty(), "evaluate_pipeline: no cases");
    EvaluationReport rep{ConfusionMatrix(decision_labels(gallery)), {}, {}};
    for (const auto& c : cases) {
        auto r = authenticate(c.depth_crop, c.face, clf, provider, gallery, cfg);
        rep.matrix.add(truth_label(c.truth, gallery), r.decision.label());
        rep.results.push_back(std::move(r));
    }
    rep.metrics = compute_metrics(rep.matrix);
    return rep;
}

inline nlohmann::json metrics_json(const ConfusionMatrix& cm, const PipelineMetrics& m) {
    return {{"labels", cm.labels},
            {"matrix", cm.counts},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"per_class_f1", m.per_class_f1},
            {"mean_f1", m.mean_f1},
            {"harmonic_f1", m.harmonic_f1}};
}

}  // namespace stereolive
