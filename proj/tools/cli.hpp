#pragma once

// stereolive command-line front end. Kept header-only so the test suite can
// drive `run_cli` in-process.
//
// Exit codes:
//   0  success
//   1  usage error (bad flags, missing subcommand)
//   2  invalid argument or input (e.g. stereo size mismatch, bad config value)
//   3  I/O failure (missing input, unwritable output)
//   4  corrupt or undecodable input file
//   5  embedding provider failure
//   6  no threshold satisfies the requested FPR bound

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stereolive/stereolive.hpp"

namespace stereolive::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInvalid = 2,
    kIo = 3,
    kCorrupt = 4,
    kProvider = 5,
    kNoThreshold = 6,
};

struct NoThresholdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Effective configuration

struct SynthSettings {
    std::size_t real = 200;
    std::size_t spoof = 200;
    std::size_t identities = 3;
    std::size_t width = 288;
    std::size_t height = 160;
    double fold_probability = 0.3;
};

struct SweepSettings {
    std::size_t grid = 101;
    double max_fpr = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 7;
    CameraRig rig{};
    MatchParams match{};
    double gamma = 0.4;
    TrainConfig train{};
    std::optional<double> depth_threshold;  // unset: use the classifier's stored threshold
    double match_threshold = 1.0;
    SynthSettings synth{};
    SweepSettings sweep{};

    void validate() const {
        rig.validate();
        match.validate();
        detail::require(std::isfinite(gamma) && gamma > 0.0, "config: gamma must be > 0");
        TrainConfig t = train;
        t.seed = seed;
        t.validate();
        if (depth_threshold) PipelineConfig{*depth_threshold, match_threshold}.validate();
        detail::require(std::isfinite(match_threshold) && match_threshold >= 0.0, "config: match_threshold must be >= 0");
        detail::require(sweep.grid >= 2, "config: sweep.grid must be >= 2");
        detail::require(sweep.max_fpr >= 0.0 && sweep.max_fpr <= 1.0, "config: sweep.max_fpr must be in [0,1]");
        detail::require(synth.fold_probability >= 0.0 && synth.fold_probability <= 1.0,
                        "config: synth.fold_probability must be in [0,1]");
        detail::require(synth.identities >= 1, "config: synth.identities must be >= 1");
    }

    TrainConfig train_config() const {
        TrainConfig t = train;
        t.seed = seed;
        return t;
    }

    DatasetOptions dataset_options() const {
        DatasetOptions o;
        o.width = synth.width;
        o.height = synth.height;
        o.rig = rig;
        o.match = match;
        o.gamma = gamma;
        o.fold_probability = synth.fold_probability;
        return o;
    }

    json to_json() const {
        return {{"seed", seed},
                {"rig", {{"focal_length", rig.focal_length}, {"baseline", rig.baseline}}},
                {"match",
                 {{"block_radius", match.block_radius},
                  {"d_min", match.d_min},
                  {"d_max", match.d_max},
                  {"uniqueness_ratio", match.uniqueness_ratio},
                  {"texture_threshold", match.texture_threshold}}},
                {"gamma", gamma},
                {"train",
                 {{"epochs", train.epochs}, {"batch_size", train.batch_size}, {"lr", train.lr}, {"val_fraction", train.val_fraction}}},
                {"pipeline", {{"depth_threshold", depth_threshold ? json(*depth_threshold) : json(nullptr)}, {"match_threshold", match_threshold}}},
                {"synth",
                 {{"real", synth.real},
                  {"spoof", synth.spoof},
                  {"identities", synth.identities},
                  {"width", synth.width},
                  {"height", synth.height},
                  {"fold_probability", synth.fold_probability}}},
                {"sweep", {{"grid", sweep.grid}, {"max_fpr", sweep.max_fpr}}}};
    }
};

namespace detail {

template <typename T>
void read_key(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ArgumentError("config: '" + where + "." + key + "' has the wrong type");
    }
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
    for (const auto& [k, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ArgumentError("config: unknown key '" + where + "." + k + "'");
    }
}

}  // namespace detail

/// Overlays a JSON config file onto `cfg`. Unknown keys are rejected.
inline void apply_config_json(RunConfig& cfg, const json& j) {
    using detail::check_keys;
    using detail::read_key;
    check_keys(j, {"seed", "rig", "match", "gamma", "train", "pipeline", "synth", "sweep"}, "$");
    read_key(j, "seed", cfg.seed, "$");
    read_key(j, "gamma", cfg.gamma, "$");
    if (j.contains("rig")) {
        const auto& r = j["rig"];
        check_keys(r, {"focal_length", "baseline"}, "rig");
        read_key(r, "focal_length", cfg.rig.focal_length, "rig");
        read_key(r, "baseline", cfg.rig.baseline, "rig");
    }
    if (j.contains("match")) {
        const auto& m = j["match"];
        check_keys(m, {"block_radius", "d_min", "d_max", "uniqueness_ratio", "texture_threshold"}, "match");
        read_key(m, "block_radius", cfg.match.block_radius, "match");
        read_key(m, "d_min", cfg.match.d_min, "match");
        read_key(m, "d_max", cfg.match.d_max, "match");
        read_key(m, "uniqueness_ratio", cfg.match.uniqueness_ratio, "match");
        read_key(m, "texture_threshold", cfg.match.texture_threshold, "match");
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        check_keys(t, {"epochs", "batch_size", "lr", "val_fraction"}, "train");
        read_key(t, "epochs", cfg.train.epochs, "train");
        read_key(t, "batch_size", cfg.train.batch_size, "train");
        read_key(t, "lr", cfg.train.lr, "train");
        read_key(t, "val_fraction", cfg.train.val_fraction, "train");
    }
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        check_keys(p, {"depth_threshold", "match_threshold"}, "pipeline");
        if (p.contains("depth_threshold") && !p["depth_threshold"].is_null()) {
            double t = 0.0;
            read_key(p, "depth_threshold", t, "pipeline");
            cfg.depth_threshold = t;
        }
        read_key(p, "match_threshold", cfg.match_threshold, "pipeline");
    }
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        check_keys(s, {"real", "spoof", "identities", "width", "height", "fold_probability"}, "synth");
        read_key(s, "real", cfg.synth.real, "synth");
        read_key(s, "spoof", cfg.synth.spoof, "synth");
        read_key(s, "identities", cfg.synth.identities, "synth");
        read_key(s, "width", cfg.synth.width, "synth");
        read_key(s, "height", cfg.synth.height, "synth");
        read_key(s, "fold_probability", cfg.synth.fold_probability, "synth");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        check_keys(s, {"grid", "max_fpr"}, "sweep");
        read_key(s, "grid", cfg.sweep.grid, "sweep");
        read_key(s, "max_fpr", cfg.sweep.max_fpr, "sweep");
    }
}

inline json scene_json(const SceneSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"distance", s.distance},
            {"tilt", s.tilt},
            {"tilt_axis", to_string(s.tilt_axis)},
            {"folded", s.folded},
            {"bump_depth", s.bump_depth},
            {"texture_seed", s.texture_seed},
            {"rig", {{"focal_length", s.rig.focal_length}, {"baseline", s.rig.baseline}}},
            {"width", s.width},
            {"height", s.height}};
}

// ---------------------------------------------------------------------------
// Artifact bookkeeping

/// Files written by one subcommand. Unless `commit()` is called, every file
/// recorded here is deleted on destruction, so a failed run leaves no
/// partial output behind.
class ArtifactSet {
public:
    ArtifactSet() = default;
    ArtifactSet(const ArtifactSet&) = delete;
    ArtifactSet& operator=(const ArtifactSet&) = delete;

    ~ArtifactSet() {
        if (committed_) return;
        std::error_code ec;
        for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove(*it, ec);
    }

    void write(const fs::path& p, std::span<const std::uint8_t> bytes) {
        paths_.push_back(p);
        write_file(p, bytes);
    }

    void write(const fs::path& p, const std::string& text) {
        paths_.push_back(p);
        write_text(p, text);
    }

    /// Records a directory created by this run (removed if empty on failure).
    void created_dir(const fs::path& p) { paths_.push_back(p); }

    void commit() noexcept { committed_ = true; }

private:
    std::vector<fs::path> paths_;
    bool committed_ = false;
};

inline void ensure_dir(const fs::path& dir, ArtifactSet& art) {
    std::error_code ec;
    if (fs::is_directory(dir, ec)) return;
    std::vector<fs::path> fresh;
    for (fs::path p = dir; !p.empty() && !fs::exists(p, ec); p = p.parent_path()) {
        fresh.push_back(p);
        if (p == p.parent_path()) break;
    }
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
    for (auto it = fresh.rbegin(); it != fresh.rend(); ++it) art.created_dir(*it);
}

inline std::string config_sidecar_text(const RunConfig& cfg, const std::string& command) {
    json j = cfg.to_json();
    j["command"] = command;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Manifests

inline std::vector<json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<json> out;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t at = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw DecodeError("'" + path.string() + "': malformed JSON line", at);
        out.push_back(std::move(j));
    }
    return out;
}

inline std::vector<Sample> load_samples(const fs::path& data_dir) {
    const fs::path manifest = data_dir / "manifest.jsonl";
    std::vector<Sample> samples;
    for (const auto& j : read_jsonl(manifest)) {
        if (!j.contains("path") || !j["path"].is_string() || !j.contains("label") || !j["label"].is_number_integer())
            throw DecodeError("'" + manifest.string() + "': record lacks path/label", 0);
        const int label = j["label"].get<int>();
        if (label != 0 && label != 1) throw DecodeError("'" + manifest.string() + "': label must be 0 or 1", 0);
        Sample s;
        s.depth_crop = read_pgm(data_dir / j["path"].get<std::string>());
        s.label = label;
        samples.push_back(std::move(s));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Subcommands

struct Context {
    RunConfig cfg;
    fs::path out_dir = ".";
    std::ostream& out;
    std::ostream& err;
};

inline int cmd_synth(Context& ctx) {
    const auto& cfg = ctx.cfg;
    ArtifactSet art;
    ensure_dir(ctx.out_dir, art);
    ensure_dir(ctx.out_dir / "crops", art);
    const auto opt = cfg.dataset_options();
    const auto samples = generate_dataset(cfg.synth.real, cfg.synth.spoof, cfg.seed, opt);

    std::string manifest, cases;
    std::size_t n_real = 0, n_spoof = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        char name[64];
        std::snprintf(name, sizeof name, "crops/%s_%04zu.pgm", s.label ? "real" : "spoof", i);
        art.write(ctx.out_dir / name, encode_pgm(s.depth_crop));
        manifest += json{{"path", name}, {"label", s.label}, {"scene", scene_json(s.scene)}}.dump() + "\n";

        // Real faces belong to person1..personK; spoofs are printed photos of
        // the same people and must be rejected outright.
        const std::size_t person = 1 + i % cfg.synth.identities;
        const std::string id = "person" + std::to_string(person);
        const std::string face = id + "#" + (s.label ? "live" : "print") + std::to_string(i);
        cases += json{{"depth_crop", name}, {"face", face}, {"truth", s.label ? id : std::string(kNoneLabel)}}.dump() + "\n";
        (s.label ? n_real : n_spoof) += 1;
    }
    art.write(ctx.out_dir / "manifest.jsonl", manifest);
    art.write(ctx.out_dir / "cases.jsonl", cases);
    art.write(ctx.out_dir / "synth.config.json", config_sidecar_text(cfg, "synth"));
    art.commit();
    ctx.out << "wrote " << samples.size() << " samples (" << n_real << " real, " << n_spoof << " spoof) to "
            << ctx.out_dir.string() << "\n";
    return kOk;
}

inline int cmd_depth(Context& ctx, const fs::path& left_path, const fs::path& right_path, bool time_it) {
    const auto& cfg = ctx.cfg;
    auto left = read_pgm(left_path);
    auto right = read_pgm(right_path);
    const auto t0 = std::chrono::steady_clock::now();
    const StereoPair pair(std::move(left), std::move(right), cfg.rig);
    const auto dmap = compute_disparity(pair, cfg.match);
    const auto depth = enhance_depth(dmap, static_cast<double>(cfg.match.d_min), static_cast<double>(cfg.match.d_max), cfg.gamma);
    const auto t1 = std::chrono::steady_clock::now();

    ArtifactSet art;
    ensure_dir(ctx.out_dir, art);
    art.write(ctx.out_dir / "depth.pgm", encode_pgm(depth));
    art.write(ctx.out_dir / "disparity.sdm", encode_sdm(dmap));
    art.write(ctx.out_dir / "depth.config.json", config_sidecar_text(cfg, "depth"));
    art.commit();
    ctx.out << "depth map " << depth.width() << "x" << depth.height() << ", " << dmap.valid_count() << " valid pixels\n";
    if (time_it)
        ctx.out << "elapsed_ms " << std::chrono::duration<double, std::milli>(t1 - t0).count() << "\n";
    return kOk;
}

inline int cmd_train(Context& ctx, const fs::path& data_dir) {
    const auto& cfg = ctx.cfg;
    const auto samples = load_samples(data_dir);
    const auto result = train(samples, cfg.train_config(), [&](const EpochStats& s) {
        ctx.out << "epoch " << s.epoch << " train_loss " << s.train_loss << " val_loss " << s.val_loss << " train_acc "
                << s.train_acc << " val_acc " << s.val_acc << "\n";
    });
    ArtifactSet art;
    ensure_dir(ctx.out_dir, art);
    const fs::path weights = ctx.out_dir / "model.slnn";
    art.write(weights, nn::encode_weights(result.model));
    art.write(classifier_sidecar(weights), json{{"threshold", cfg.depth_threshold.value_or(0.5)}}.dump(2) + "\n");
    art.write(ctx.out_dir / "train_stats.csv", epoch_stats_csv(result.history));
    art.write(ctx.out_dir / "train.config.json", config_sidecar_text(cfg, "train"));
    art.commit();
    ctx.out << "wrote " << weights.string() << "\n";
    return kOk;
}

inline int cmd_sweep(Context& ctx, const fs::path& data_dir, const fs::path& model_path) {
    const auto& cfg = ctx.cfg;
    const auto samples = load_samples(data_dir);
    auto clf = load_classifier(model_path);
    const auto split = split_dataset(samples.size(), cfg.train.val_fraction, cfg.seed);
    std::vector<Sample> val;
    for (std::size_t i : split.val) val.push_back(samples[i]);
    const auto sweep = sweep_thresholds(clf.model, val, cfg.sweep.grid);
    const auto chosen = select_threshold(sweep, cfg.sweep.max_fpr);
    if (!chosen) throw NoThresholdError("no swept threshold has FPR <= " + std::to_string(cfg.sweep.max_fpr));

    ArtifactSet art;
    ensure_dir(ctx.out_dir, art);
    art.write(ctx.out_dir / "sweep.csv", sweep_csv(sweep));
    art.write(ctx.out_dir / "sweep.config.json", config_sidecar_text(cfg, "sweep"));
    clf.threshold = *chosen;
    fs::path staged = classifier_sidecar(model_path);
    staged += ".tmp";
    art.write(staged, json{{"threshold", clf.threshold}}.dump(2) + "\n");
    fs::rename(staged, classifier_sidecar(model_path));
    art.commit();
    const auto it = std::find_if(sweep.begin(), sweep.end(), [&](const SweepPoint& p) { return p.threshold == *chosen; });
    char line[160];
    std::snprintf(line, sizeof line, "threshold %.17g accuracy %.6g fpr %.6g fnr %.6g\n", *chosen, it->accuracy, it->fpr, it->fnr);
    ctx.out << line;
    return kOk;
}

inline int cmd_enroll(Context& ctx, const fs::path& gallery_path, const std::string& name, const std::string& face) {
    const auto provider = stub_provider(ctx.cfg.seed);
    Gallery g = fs::exists(gallery_path) ? load_gallery(gallery_path) : Gallery(provider.dim());
    g = enroll(g, name, FaceRef{face}, provider);
    ArtifactSet art;
    if (gallery_path.has_parent_path()) ensure_dir(gallery_path.parent_path(), art);
    const auto backup = fs::exists(gallery_path) ? std::optional<std::string>(read_text(gallery_path)) : std::nullopt;
    try {
        save_gallery(gallery_path, g);
        fs::path side = gallery_path;
        side += ".config.json";
        art.write(side, config_sidecar_text(ctx.cfg, "enroll"));
    } catch (...) {
        if (backup) write_text(gallery_path, *backup);
        throw;
    }
    art.commit();
    ctx.out << "enrolled " << name << " (" << g.size() << " identities)\n";
    return kOk;
}

inline PipelineConfig pipeline_config(const RunConfig& cfg, const DepthClassifier& clf) {
    return PipelineConfig{cfg.depth_threshold.value_or(clf.threshold), cfg.match_threshold};
}

inline int cmd_eval(Context& ctx, const fs::path& cases_path, const fs::path& model_path, const fs::path& gallery_path) {
    const auto clf = load_classifier(model_path);
    const auto gallery = load_gallery(gallery_path);
    const auto provider = stub_provider(ctx.cfg.seed);
    std::vector<EvalCase> cases;
    for (const auto& j : read_jsonl(cases_path)) {
        if (!j.contains("depth_crop") || !j.contains("face") || !j.contains("truth") || !j["depth_crop"].is_string() ||
            !j["face"].is_string() || !j["truth"].is_string())
            throw DecodeError("'" + cases_path.string() + "': record lacks depth_crop/face/truth", 0);
        cases.push_back({read_pgm(cases_path.parent_path() / j["depth_crop"].get<std::string>()), FaceRef{j["face"].get<std::string>()},
                         j["truth"].get<std::string>()});
    }
    const auto report = evaluate_pipeline(cases, clf, provider, gallery, pipeline_config(ctx.cfg, clf));

    ArtifactSet art;
    ensure_dir(ctx.out_dir, art);
    art.write(ctx.out_dir / "metrics.json", metrics_json(report.matrix, report.metrics).dump(2) + "\n");
    art.write(ctx.out_dir / "eval.config.json", config_sidecar_text(ctx.cfg, "eval"));
    art.commit();
    char line[200];
    std::snprintf(line, sizeof line, "cases %zu macro_precision %.4f macro_recall %.4f mean_f1 %.4f\n", cases.size(),
                  report.metrics.macro_precision, report.metrics.macro_recall, report.metrics.mean_f1);
    ctx.out << line;
    return kOk;
}

inline int cmd_auth(Context& ctx, const fs::path& crop_path, const std::string& face, const fs::path& model_path,
                    const fs::path& gallery_path) {
    const auto clf = load_classifier(model_path);
    const auto gallery = load_gallery(gallery_path);
    const auto provider = stub_provider(ctx.cfg.seed);
    const auto crop = read_pgm(crop_path);
    const auto r = authenticate(crop, FaceRef{face}, clf, provider, gallery, pipeline_config(ctx.cfg, clf));
    char line[64];
    std::snprintf(line, sizeof line, "depth_confidence %.6f\n", r.depth_confidence);
    ctx.out << r.decision.display() << "\n" << line;
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Stereo depth-map face liveness toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    auto* opt_config = app.add_option("--config", config_path, "JSON config file (flags override it)");
    auto* opt_seed = app.add_option("--seed", seed, "Seed for data generation, weight init, shuffles and the stub recognizer (u64)");
    app.add_option("--out", out_dir, "Output directory (default: current directory)");

    // flag storage
    std::size_t real = 0, spoof = 0, identities = 0, width = 0, height = 0;
    std::string left, right, data_dir, model, gallery, name, face, cases, crop;
    bool time_it = false;
    std::size_t epochs = 0, batch = 0, grid = 0, block_radius = 0, d_min = 0, d_max = 0;
    double lr = 0, val_fraction = 0, max_fpr = 0, gamma = 0, depth_threshold = 0, match_threshold = 0;
    double focal = 0, baseline = 0, uniqueness = 0, texture = 0;

    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
    const auto bind = [&](CLI::Option* o, std::function<void(RunConfig&)> apply) { overrides.emplace_back(o, std::move(apply)); };

    const auto add_match_flags = [&](CLI::App* sc) {
        bind(sc->add_option("--block-radius", block_radius, "Matching window radius r in pixels (window is (2r+1)^2)"),
             [&](RunConfig& c) { c.match.block_radius = block_radius; });
        bind(sc->add_option("--d-min", d_min, "Smallest disparity searched, pixels"), [&](RunConfig& c) { c.match.d_min = d_min; });
        bind(sc->add_option("--d-max", d_max, "Largest disparity searched, pixels"), [&](RunConfig& c) { c.match.d_max = d_max; });
        bind(sc->add_option("--uniqueness", uniqueness, "Uniqueness ratio (>= 1, dimensionless)"),
             [&](RunConfig& c) { c.match.uniqueness_ratio = uniqueness; });
        bind(sc->add_option("--texture", texture, "Minimum block intensity variance (intensity^2, intensities in [0,1])"),
             [&](RunConfig& c) { c.match.texture_threshold = texture; });
        bind(sc->add_option("--focal", focal, "Focal length, pixels"), [&](RunConfig& c) { c.rig.focal_length = focal; });
        bind(sc->add_option("--baseline", baseline, "Stereo baseline, meters"), [&](RunConfig& c) { c.rig.baseline = baseline; });
        bind(sc->add_option("--gamma", gamma, "Power-law exponent applied to the depth map (> 0, dimensionless)"),
             [&](RunConfig& c) { c.gamma = gamma; });
    };
    const auto add_pipeline_flags = [&](CLI::App* sc) {
        bind(sc->add_option("--depth-threshold", depth_threshold,
                            "Depth confidence needed to run recognition, in (0,1) (default: model sidecar threshold)"),
             [&](RunConfig& c) { c.depth_threshold = depth_threshold; });
        bind(sc->add_option("--match-threshold", match_threshold, "Maximum embedding distance for an ID match (Euclidean units)"),
             [&](RunConfig& c) { c.match_threshold = match_threshold; });
    };

    auto* synth = app.add_subcommand("synth", "Render a labeled synthetic depth-crop dataset");
    bind(synth->add_option("--real", real, "Number of real-face samples (count)"), [&](RunConfig& c) { c.synth.real = real; });
    bind(synth->add_option("--spoof", spoof, "Number of printed-photo samples (count)"), [&](RunConfig& c) { c.synth.spoof = spoof; });
    bind(synth->add_option("--identities", identities, "Identities cycled through cases.jsonl (count)"),
         [&](RunConfig& c) { c.synth.identities = identities; });
    bind(synth->add_option("--width", width, "Rendered scene width, pixels"), [&](RunConfig& c) { c.synth.width = width; });
    bind(synth->add_option("--height", height, "Rendered scene height, pixels"), [&](RunConfig& c) { c.synth.height = height; });
    add_match_flags(synth);

    auto* depth = app.add_subcommand("depth", "Compute a contrast-enhanced depth map from a rectified PGM pair");
    depth->add_option("--left", left, "Left image, binary PGM")->required();
    depth->add_option("--right", right, "Right image, binary PGM")->required();
    depth->add_flag("--time", time_it, "Print wall-clock matching time in milliseconds");
    add_match_flags(depth);

    auto* train_cmd = app.add_subcommand("train", "Train the liveness network on a synth dataset");
    train_cmd->add_option("--data", data_dir, "Dataset directory containing manifest.jsonl")->required();
    bind(train_cmd->add_option("--epochs", epochs, "Training epochs (count)"), [&](RunConfig& c) { c.train.epochs = epochs; });
    bind(train_cmd->add_option("--batch", batch, "Mini-batch size (samples)"), [&](RunConfig& c) { c.train.batch_size = batch; });
    bind(train_cmd->add_option("--lr", lr, "Adam learning rate"), [&](RunConfig& c) { c.train.lr = lr; });
    bind(train_cmd->add_option("--val-fraction", val_fraction, "Held-out validation fraction, in (0,1)"),
         [&](RunConfig& c) { c.train.val_fraction = val_fraction; });
    bind(train_cmd->add_option("--depth-threshold", depth_threshold, "Initial threshold stored in the model sidecar, in (0,1)"),
         [&](RunConfig& c) { c.depth_threshold = depth_threshold; });

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep decision thresholds on the validation split and pick one");
    sweep_cmd->add_option("--data", data_dir, "Dataset directory containing manifest.jsonl")->required();
    sweep_cmd->add_option("--model", model, "Weight file (its .json sidecar receives the threshold)")->required();
    bind(sweep_cmd->add_option("--grid", grid, "Number of thresholds in (0,1) (count, >= 2)"), [&](RunConfig& c) { c.sweep.grid = grid; });
    bind(sweep_cmd->add_option("--max-fpr", max_fpr, "Largest tolerated spoof acceptance rate, fraction in [0,1]"),
         [&](RunConfig& c) { c.sweep.max_fpr = max_fpr; });
    bind(sweep_cmd->add_option("--val-fraction", val_fraction, "Validation fraction used at training time, in (0,1)"),
         [&](RunConfig& c) { c.train.val_fraction = val_fraction; });

    auto* eval_cmd = app.add_subcommand("eval", "Run the gated recognizer over labeled cases and write metrics");
    eval_cmd->add_option("--cases", cases, "JSON-lines cases file {depth_crop, face, truth}")->required();
    eval_cmd->add_option("--model", model, "Weight file")->required();
    eval_cmd->add_option("--gallery", gallery, "Gallery JSON")->required();
    add_pipeline_flags(eval_cmd);

    auto* auth_cmd = app.add_subcommand("auth", "Authenticate one face: prints ID <name>, Unknown or None");
    auth_cmd->add_option("--depth-crop", crop, "96x96 depth crop, binary PGM")->required();
    auth_cmd->add_option("--face", face, "Face reference (path or identity#instance tag)")->required();
    auth_cmd->add_option("--model", model, "Weight file")->required();
    auth_cmd->add_option("--gallery", gallery, "Gallery JSON")->required();
    add_pipeline_flags(auth_cmd);

    auto* enroll_cmd = app.add_subcommand("enroll", "Add or replace an identity in a gallery file");
    enroll_cmd->add_option("--gallery", gallery, "Gallery JSON (created if absent)")->required();
    enroll_cmd->add_option("--name", name, "Identity name")->required();
    enroll_cmd->add_option("--face", face, "Face reference (path or identity#instance tag)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    Context ctx{RunConfig{}, fs::path(out_dir), out, err};
    try {
        if (*opt_config) apply_config_json(ctx.cfg, [&] {
                auto j = json::parse(read_text(config_path), nullptr, false);
                if (j.is_discarded()) throw DecodeError("config '" + config_path + "' is not valid JSON", 0);
                return j;
            }());
        if (*opt_seed) ctx.cfg.seed = seed;
        for (auto& [opt, apply] : overrides)
            if (opt->count() > 0) apply(ctx.cfg);
        ctx.cfg.validate();

        if (synth->parsed()) return cmd_synth(ctx);
        if (depth->parsed()) return cmd_depth(ctx, left, right, time_it);
        if (train_cmd->parsed()) return cmd_train(ctx, data_dir);
        if (sweep_cmd->parsed()) return cmd_sweep(ctx, data_dir, model);
        if (eval_cmd->parsed()) return cmd_eval(ctx, cases, model, gallery);
        if (auth_cmd->parsed()) return cmd_auth(ctx, crop, face, model, gallery);
        if (enroll_cmd->parsed()) return cmd_enroll(ctx, gallery, name, face);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const DecodeError& e) {
        err << "error: " << e.what() << "\n";
        return kCorrupt;
    } catch (const ProviderError& e) {
        err << "error: " << e.what() << "\n";
        return kProvider;
    } catch (const NoThresholdError& e) {
        err << "error: " << e.what() << "\n";
        return kNoThreshold;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}

}  // namespace stereolive::cli
