#pragma once

// Deterministic synthetic stereo scenes with exact ground-truth disparity,
// and labeled 96x96 depth-crop datasets built from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "imaging.hpp"
#include "random.hpp"
#include "stereo.hpp"

namespace stereolive {

enum class SceneKind { face_bump, flat_photo };
enum class TiltAxis { yaw, pitch };

inline const char* to_string(SceneKind k) { return k == SceneKind::face_bump ? "face_bump" : "flat_photo"; }
inline const char* to_string(TiltAxis a) { return a == TiltAxis::yaw ? "yaw" : "pitch"; }

/// Scene geometry in camera coordinates of the left camera.
///
/// The base surface is a plane through (0, 0, distance) rotated by `tilt`
/// about the vertical (yaw) or horizontal (pitch) axis. A folded plane uses
/// |tilt| mirrored about the image center line, forming a V. `face_bump`
/// subtracts an ellipsoidal cap of height `bump_depth` centered in the frame
/// with semi-axes 0.28 and 0.38 of min(width, height).
struct SceneSpec {
    SceneKind kind = SceneKind::face_bump;
    double distance = 1.0;
    double tilt = 0.0;
    TiltAxis tilt_axis = TiltAxis::yaw;
    bool folded = false;
    double bump_depth = 0.05;
    std::uint64_t texture_seed = 0;
    CameraRig rig{};
    std::size_t width = 640;
    std::size_t height = 480;

    void validate() const {
        rig.validate();
        detail::require(width >= 1 && height >= 1, "SceneSpec: empty frame");
        detail::require(std::isfinite(distance) && std::isfinite(bump_depth) && std::isfinite(tilt),
                        "SceneSpec: non-finite geometry");
        detail::require(bump_depth >= 0.0 && distance > bump_depth, "SceneSpec: need distance > bump_depth >= 0");
        detail::require(std::abs(tilt) < std::numbers::pi / 3.0, "SceneSpec: |tilt| must be < pi/3");
    }

    double center_x() const noexcept { return (static_cast<double>(width) - 1.0) / 2.0; }
    double center_y() const noexcept { return (static_cast<double>(height) - 1.0) / 2.0; }

    /// Surface depth seen through left pixel (u, v); non-positive means the
    /// ray misses the plane in front of the camera.
    double depth_at(double u, double v) const noexcept {
        double s = tilt_axis == TiltAxis::yaw ? u - center_x() : v - center_y();
        if (folded) s = std::abs(s);
        const double denom = 1.0 - std::tan(tilt) * s / rig.focal_length;
        if (denom <= 0.0) return -1.0;
        double z = distance / denom;
        if (kind == SceneKind::face_bump && bump_depth > 0.0) {
            const double m = static_cast<double>(std::min(width, height));
            const double ex = (u - center_x()) / (0.28 * m);
            const double ey = (v - center_y()) / (0.38 * m);
            const double rho2 = ex * ex + ey * ey;
            if (rho2 < 1.0) z -= bump_depth * std::sqrt(1.0 - rho2);
        }
        return z;
    }

    double disparity_at(double u, double v) const noexcept {
        const double z = depth_at(u, v);
        return z > 0.0 ? rig.focal_length * rig.baseline / z : -1.0;
    }
};

namespace detail {

/// Two-octave value noise (lattice spacing 6 px and 3 px) with smoothstep
/// interpolation; continuous, defined on the whole plane, values in [0, 1].
class ValueNoise {
public:
    explicit ValueNoise(std::uint64_t seed) : seed_(seed) {}

    double operator()(double x, double y) const noexcept {
        return 0.7 * octave(x / 6.0, y / 6.0, 1) + 0.3 * octave(x / 3.0, y / 3.0, 2);
    }

private:
    double lattice(std::int64_t i, std::int64_t j, std::uint64_t oct) const noexcept {
        const auto h = hash_combine(hash_combine(seed_ ^ (oct * 0xA24BAED4963EE407ULL), static_cast<std::uint64_t>(i)),
                                    static_cast<std::uint64_t>(j));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }

    static double smooth(double t) noexcept { return t * t * (3.0 - 2.0 * t); }

    double octave(double x, double y, std::uint64_t oct) const noexcept {
        const double fx = std::floor(x), fy = std::floor(y);
        const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy);
        const double tx = smooth(x - fx), ty = smooth(y - fy);
        const double a = lattice(i, j, oct), b = lattice(i + 1, j, oct);
        const double c = lattice(i, j + 1, oct), d = lattice(i + 1, j + 1, oct);
        return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }

    std::uint64_t seed_;
};

}  // namespace detail

struct RenderedScene {
    StereoPair pair;
    DisparityMap truth;  // valid everywhere
};

/// Renders a rectified pair and its exact disparity field.
///
/// The left image is value-noise texture in left pixel coordinates. A right
/// pixel xr sees the surface point whose left coordinate xl solves
/// xl - d(xl) = xr; the texture is sampled there, which makes
/// right(x - d(x, y), y) == left(x, y) up to resampling error.
inline RenderedScene render_stereo(const SceneSpec& scene) {
    scene.validate();
    const std::size_t W = scene.width, H = scene.height;
    DisparityMap truth(W, H);
    double d_peak = 0.0;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const double d = scene.disparity_at(static_cast<double>(x), static_cast<double>(y));
            detail::require(d > 0.0, "render_stereo: surface behind the camera at some pixel");
            truth.set(x, y, d);
            d_peak = std::max(d_peak, d);
        }
    detail::require(d_peak < static_cast<double>(W),
                    "render_stereo: ground-truth disparity " + std::to_string(d_peak) + " >= image width");

    const detail::ValueNoise noise(scene.texture_seed);
    const auto shade = [&](double x, double y) { return 0.1 + 0.8 * noise(x, y); };

    std::vector<double> left(W * H), right(W * H);
    for (std::size_t y = 0; y < H; ++y) {
        const double fy = static_cast<double>(y);
        for (std::size_t x = 0; x < W; ++x) {
            const double xr = static_cast<double>(x);
            left[y * W + x] = shade(xr, fy);
            double xl = xr + truth.at(x, y);
            for (int it = 0; it < 32; ++it) {
                const double next = xr + scene.disparity_at(xl, fy);
                if (std::abs(next - xl) < 1e-9) {
                    xl = next;
                    break;
                }
                xl = next;
            }
            right[y * W + x] = shade(xl, fy);
        }
    }
    return {StereoPair(GrayImage(W, H, std::move(left)), GrayImage(W, H, std::move(right)), scene.rig), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Datasets

inline constexpr std::size_t kCropSize = 96;

struct Sample {
    GrayImage depth_crop;
    int label = 0;  // 1 = real face, 0 = spoof
    SceneSpec scene;
};

/// Parameters of the synthetic dataset distribution.
struct DatasetOptions {
    std::size_t width = 288;
    std::size_t height = 160;
    CameraRig rig{};
    MatchParams match{};
    double gamma = 0.4;
    double distance_min = 0.5, distance_max = 1.5;
    double spoof_tilt_max = 0.3;
    double face_tilt_max = 0.15;
    double bump_min = 0.03, bump_max = 0.08;
    double fold_probability = 0.3;
};

/// The liveness input chain on a disparity map: gray mapping over the
/// matcher's search range, min-max stretch, power law, then the central
/// square that the matcher fully covers, resized to 96x96.
inline GrayImage face_depth_crop(const DisparityMap& dmap, const MatchParams& match, double gamma) {
    const std::size_t margin_x = match.block_radius + match.d_max;
    const std::size_t margin_y = match.block_radius;
    detail::require(dmap.width > 2 * margin_x && dmap.height > 2 * margin_y, "face_depth_crop: frame too small for matcher margins");
    const std::size_t side = std::min(dmap.width - 2 * margin_x, dmap.height - 2 * margin_y);
    const std::size_t x0 = (dmap.width - side) / 2;
    const std::size_t y0 = (dmap.height - side) / 2;
    DisparityMap region(side, side);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            if (dmap.is_valid(x0 + x, y0 + y)) region.set(x, y, dmap.at(x0 + x, y0 + y));
    const auto enhanced = enhance_depth(region, static_cast<double>(match.d_min), static_cast<double>(match.d_max), gamma);
    return resize_bilinear(enhanced, kCropSize, kCropSize);
}

/// Randomized scene for dataset slot `index`; a pure function of
/// (seed, index, label, options).
inline SceneSpec random_scene(std::uint64_t seed, std::size_t index, int label, const DatasetOptions& opt) {
    Rng rng(hash_combine(seed, index));
    SceneSpec s;
    s.rig = opt.rig;
    s.width = opt.width;
    s.height = opt.height;
    s.distance = rng.uniform(opt.distance_min, opt.distance_max);
    s.tilt_axis = rng.bernoulli(0.5) ? TiltAxis::yaw : TiltAxis::pitch;
    s.texture_seed = rng.next_u64();
    if (label == 1) {
        s.kind = SceneKind::face_bump;
        s.tilt = rng.uniform(-opt.face_tilt_max, opt.face_tilt_max);
        s.bump_depth = rng.uniform(opt.bump_min, opt.bump_max);
    } else {
        s.kind = SceneKind::flat_photo;
        s.tilt = rng.uniform(-opt.spoof_tilt_max, opt.spoof_tilt_max);
        s.bump_depth = 0.0;
        s.folded = rng.bernoulli(opt.fold_probability);
    }
    return s;
}

/// Renders one labeled sample through the full stereo path.
inline Sample make_sample(const SceneSpec& scene, int label, const DatasetOptions& opt) {
    const auto rendered = render_stereo(scene);
    const auto dmap = compute_disparity(rendered.pair, opt.match);
    return {face_depth_crop(dmap, opt.match, opt.gamma), label, scene};
}

/// n_real face scenes (slots 0..n_real-1) followed by n_spoof photo scenes.
inline std::vector<Sample> generate_dataset(std::size_t n_real, std::size_t n_spoof, std::uint64_t seed,
                                            const DatasetOptions& opt = {}) {
    std::vector<Sample> out;
    out.reserve(n_real + n_spoof);
    for (std::size_t i = 0; i < n_real + n_spoof; ++i) {
        const int label = i < n_real ? 1 : 0;
        out.push_back(make_sample(random_scene(seed, i, label, opt), label, opt));
    }
    return out;
}

}  // namespace stereolive
