#pragma once

// Block-matching disparity along horizontal epipolar lines, depth from
// disparity (z = f*T/d) and gray renderings of disparity maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "binary_io.hpp"
#include "errors.hpp"
#include "imaging.hpp"

namespace stereolive {

inline constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

/// Per-pixel scalar map with a validity mask. Invalid pixels hold NaN.
struct ScalarMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    ScalarMap() = default;
    ScalarMap(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, kInvalid), valid(w * h, 0) {}

    bool is_valid(std::size_t x, std::size_t y) const noexcept { return valid[y * width + x] != 0; }
    double at(std::size_t x, std::size_t y) const noexcept { return values[y * width + x]; }

    void set(std::size_t x, std::size_t y, double v) noexcept {
        values[y * width + x] = v;
        valid[y * width + x] = 1;
    }

    std::size_t valid_count() const noexcept {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
    }
};

/// Disparity in pixels, d >= 0.
struct DisparityMap : ScalarMap {
    using ScalarMap::ScalarMap;
};

/// Metric depth in meters, z > 0.
struct DepthMap : ScalarMap {
    using ScalarMap::ScalarMap;
};

struct MatchParams {
    std::size_t block_radius = 4;  // window is (2r+1)^2
    std::size_t d_min = 0;
    std::size_t d_max = 64;
    double uniqueness_ratio = 1.0;
    double texture_threshold = 1e-4;  // minimum block intensity variance

    void validate() const {
        detail::require(d_min < d_max, "MatchParams: d_min must be < d_max");
        detail::require(std::isfinite(uniqueness_ratio) && uniqueness_ratio >= 1.0,
                        "MatchParams: uniqueness_ratio must be >= 1");
        detail::require(std::isfinite(texture_threshold) && texture_threshold >= 0.0,
                        "MatchParams: texture_threshold must be >= 0");
    }

    void validate_for(std::size_t width, std::size_t height) const {
        validate();
        detail::require(d_max < width, "MatchParams: d_max must be < image width");
        const std::size_t window = 2 * block_radius + 1;
        detail::require(window <= width && window <= height, "MatchParams: block larger than image");
    }
};

/// Sum-of-absolute-differences block matching along image rows.
///
/// For each left pixel (x, y) the candidate set is d in [d_min, d_max], the
/// right block being centered at (x - d, y). A pixel is invalid when
///  - the block at any candidate leaves either image (x < r + d_max, or too
///    close to the right/top/bottom border),
///  - the left block variance is below `texture_threshold`,
///  - best * uniqueness_ratio > second, where `second` is the lowest cost
///    among candidates more than one pixel away from the winner.
/// Equal costs resolve to the smallest d.
inline DisparityMap compute_disparity(const StereoPair& pair, const MatchParams& params) {
    const std::size_t W = pair.left.width(), H = pair.left.height();
    params.validate_for(W, H);
    const std::size_t r = params.block_radius;
    const std::size_t n_d = params.d_max - params.d_min + 1;
    const double window_area = static_cast<double>((2 * r + 1) * (2 * r + 1));

    DisparityMap out(W, H);
    const auto L = pair.left.data();
    const auto R = pair.right.data();

    const std::size_t x_begin = r + params.d_max;
    if (x_begin + r >= W) return out;
    const std::size_t x_end = W - r;  // exclusive

    std::vector<double> colsum(W);
    std::vector<double> cost(W * n_d);  // cost[x * n_d + k]
    std::vector<double> col_i(W), col_i2(W);

    for (std::size_t y = r; y + r < H; ++y) {
        // left-block texture statistics
        std::fill(col_i.begin(), col_i.end(), 0.0);
        std::fill(col_i2.begin(), col_i2.end(), 0.0);
        for (std::size_t yy = y - r; yy <= y + r; ++yy) {
            const double* row = L.data() + yy * W;
            for (std::size_t x = x_begin - r; x < W; ++x) {
                col_i[x] += row[x];
                col_i2[x] += row[x] * row[x];
            }
        }

        for (std::size_t k = 0; k < n_d; ++k) {
            const std::size_t d = params.d_min + k;
            const std::size_t cx0 = x_begin - r;
            std::fill(colsum.begin() + cx0, colsum.end(), 0.0);
            for (std::size_t yy = y - r; yy <= y + r; ++yy) {
                const double* lrow = L.data() + yy * W + cx0;
                const double* rrow = R.data() + yy * W + cx0 - d;
                double* cs = colsum.data() + cx0;
                for (std::size_t i = 0; i < W - cx0; ++i) cs[i] += std::abs(lrow[i] - rrow[i]);
            }
            for (std::size_t x = x_begin; x < x_end; ++x) {
                double s = 0.0;
                for (std::size_t xx = x - r; xx <= x + r; ++xx) s += colsum[xx];
                cost[x * n_d + k] = s;
            }
        }

        for (std::size_t x = x_begin; x < x_end; ++x) {
            double si = 0.0, si2 = 0.0;
            for (std::size_t xx = x - r; xx <= x + r; ++xx) {
                si += col_i[xx];
                si2 += col_i2[xx];
            }
            const double mean = si / window_area;
            const double variance = std::max(0.0, si2 / window_area - mean * mean);
            if (variance < params.texture_threshold) continue;

            const double* c = cost.data() + x * n_d;
            std::size_t best = 0;
            for (std::size_t k = 1; k < n_d; ++k)
                if (c[k] < c[best]) best = k;
            double second = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n_d; ++k) {
                const std::size_t gap = k > best ? k - best : best - k;
                if (gap > 1) second = std::min(second, c[k]);
            }
            if (c[best] * params.uniqueness_ratio > second) continue;
            out.set(x, y, static_cast<double>(params.d_min + best));
        }
    }
    return out;
}

inline constexpr double kDisparityEpsilon = 1e-6;

/// z = f*T/d for every valid pixel; d <= 1e-6 becomes invalid.
inline DepthMap disparity_to_depth(const DisparityMap& dmap, const CameraRig& rig) {
    rig.validate();
    DepthMap out(dmap.width, dmap.height);
    const double fT = rig.focal_length * rig.baseline;
    for (std::size_t i = 0; i < dmap.values.size(); ++i) {
        if (!dmap.valid[i]) continue;
        const double d = dmap.values[i];
        if (!(d > kDisparityEpsilon)) continue;
        out.values[i] = fT / d;
        out.valid[i] = 1;
    }
    return out;
}

/// Linear map of disparity onto [0, 1]: d_lo -> 0, d_hi -> 1, clamped.
/// Nearer surfaces (larger d) are brighter. Invalid pixels are black.
inline GrayImage depth_to_gray(const DisparityMap& dmap, double d_lo, double d_hi) {
    detail::require(std::isfinite(d_lo) && std::isfinite(d_hi) && d_lo < d_hi, "depth_to_gray: need d_lo < d_hi");
    std::vector<double> out(dmap.values.size(), 0.0);
    const double span = d_hi - d_lo;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (dmap.valid[i]) out[i] = std::clamp((dmap.values[i] - d_lo) / span, 0.0, 1.0);
    return GrayImage(dmap.width, dmap.height, std::move(out));
}

/// Contrast-enhanced depth rendering: gray mapping, min-max stretch, then
/// the power-law transform.
inline GrayImage enhance_depth(const DisparityMap& dmap, double d_lo, double d_hi, double gamma) {
    return power_law(normalize_minmax(depth_to_gray(dmap, d_lo, d_hi)), gamma);
}

// ---------------------------------------------------------------------------
// SDM1 raw map files: "SDM1", u32 width, u32 height, width*height f64 LE.

inline Bytes encode_sdm(const ScalarMap& map) {
    detail::LeWriter w;
    w.bytes("SDM1");
    w.u32(static_cast<std::uint32_t>(map.width));
    w.u32(static_cast<std::uint32_t>(map.height));
    for (std::size_t i = 0; i < map.values.size(); ++i) w.f64(map.valid[i] ? map.values[i] : kInvalid);
    return w.take();
}

inline DisparityMap decode_sdm(std::span<const std::uint8_t> bytes) {
    detail::LeReader rd(bytes);
    rd.expect_magic("SDM1", "SDM1");
    const std::size_t w = rd.u32("SDM1 width");
    const std::size_t h = rd.u32("SDM1 height");
    if (w == 0 || h == 0) throw DecodeError("SDM1: zero dimension", 4);
    DisparityMap out(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
        const double v = rd.f64("SDM1 payload");
        if (!std::isnan(v)) {
            out.values[i] = v;
            out.valid[i] = 1;
        }
    }
    if (!rd.at_end()) throw DecodeError("SDM1: trailing bytes", rd.offset());
    return out;
}

}  // namespace stereolive
