#pragma once

// Grayscale rasters, binary PGM I/O and the intensity transforms applied to
// depth maps before classification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "errors.hpp"

namespace stereolive {

/// Row-major grayscale raster with real intensities in [0, 1].
class GrayImage {
public:
    GrayImage() = default;

    /// Zero-filled image.
    GrayImage(std::size_t width, std::size_t height) : GrayImage(width, height, std::vector<double>(width * height, 0.0)) {}

    GrayImage(std::size_t width, std::size_t height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        detail::require(width_ >= 1 && height_ >= 1, "GrayImage: dimensions must be >= 1");
        detail::require(data_.size() == width_ * height_, "GrayImage: data length must equal width*height");
        for (double v : data_)
            detail::require(v >= 0.0 && v <= 1.0, "GrayImage: intensity outside [0,1]");
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double at(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// Pinhole stereo rig: focal length in pixels, baseline in meters.
struct CameraRig {
    double focal_length = 400.0;
    double baseline = 0.06;

    void validate() const {
        detail::require(std::isfinite(focal_length) && focal_length > 0.0, "CameraRig: focal_length must be finite and > 0");
        detail::require(std::isfinite(baseline) && baseline > 0.0, "CameraRig: baseline must be finite and > 0");
    }

    friend bool operator==(const CameraRig&, const CameraRig&) = default;
};

/// Rectified image pair; rows are epipolar lines.
struct StereoPair {
    GrayImage left;
    GrayImage right;
    CameraRig rig;

    StereoPair(GrayImage l, GrayImage r, CameraRig g) : left(std::move(l)), right(std::move(r)), rig(g) {
        detail::require(left.width() == right.width() && left.height() == right.height(),
                        "StereoPair: left is " + std::to_string(left.width()) + "x" + std::to_string(left.height()) +
                            " but right is " + std::to_string(right.width()) + "x" + std::to_string(right.height()));
        rig.validate();
    }
};

// ---------------------------------------------------------------------------
// PGM (P5)

namespace detail {

class PnmHeaderParser {
public:
    explicit PnmHeaderParser(std::span<const std::uint8_t> b) : b_(b) {}

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            const auto c = b_[pos_];
            if (c == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::uint64_t number(const char* field) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        last_start_ = start;
        std::uint64_t v = 0;
        while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
            v = v * 10 + (b_[pos_] - '0');
            if (v > 0xFFFFFFFFULL) throw DecodeError(std::string("PGM: ") + field + " too large", start);
            ++pos_;
        }
        if (pos_ == start) throw DecodeError(std::string("PGM: expected ") + field, start);
        return v;
    }

    std::size_t pos_ = 0;
    std::size_t last_start_ = 0;
    std::span<const std::uint8_t> b_;
};

inline std::uint8_t quantize8(double v) noexcept {
    // round-half-away-from-zero; v*255 is never negative here
    return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

}  // namespace detail

/// Decodes a binary P5 PGM. Samples are 1 byte when maxval < 256, otherwise
/// 2 bytes big-endian.
inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw DecodeError("PGM: bad magic, expected 'P5'", 0);
    detail::PnmHeaderParser p(bytes);
    p.pos_ = 2;
    const auto width = p.number("width");
    if (width == 0) throw DecodeError("PGM: zero dimension", p.last_start_);
    const auto height = p.number("height");
    if (height == 0) throw DecodeError("PGM: zero dimension", p.last_start_);
    const auto maxval = p.number("maxval");
    const std::size_t mv_at = p.last_start_;
    if (maxval == 0) throw DecodeError("PGM: maxval is 0", mv_at);
    if (maxval > 65535) throw DecodeError("PGM: maxval exceeds 65535", mv_at);
    if (p.pos_ >= bytes.size()) throw DecodeError("PGM: missing whitespace after maxval", p.pos_);
    ++p.pos_;  // exactly one whitespace byte precedes the raster

    const std::size_t bps = maxval < 256 ? 1 : 2;
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - p.pos_ < n * bps) throw DecodeError("PGM: truncated payload", bytes.size());

    std::vector<double> data(n);
    const double scale = static_cast<double>(maxval);
    const std::uint8_t* src = bytes.data() + p.pos_;
    for (std::size_t i = 0; i < n; ++i) {
        unsigned v = bps == 1 ? src[i] : (unsigned{src[2 * i]} << 8) | src[2 * i + 1];
        if (v > maxval) throw DecodeError("PGM: sample exceeds maxval", p.pos_ + i * bps);
        data[i] = v / scale;
    }
    return GrayImage(width, height, std::move(data));
}

/// Encodes as "P5\n<w> <h>\n255\n" followed by one byte per pixel.
inline Bytes encode_pgm(const GrayImage& img) {
    const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    Bytes out(header.begin(), header.end());
    out.reserve(header.size() + img.size());
    for (double v : img.data()) out.push_back(detail::quantize8(v));
    return out;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file(path, encode_pgm(img)); }

// ---------------------------------------------------------------------------
// Intensity transforms

/// out = in^gamma per pixel.
inline GrayImage power_law(const GrayImage& img, double gamma) {
    detail::require(std::isfinite(gamma) && gamma > 0.0, "power_law: gamma must be finite and > 0");
    std::vector<double> out(img.data().begin(), img.data().end());
    if (gamma != 1.0)
        for (double& v : out) v = std::pow(v, gamma);
    return GrayImage(img.width(), img.height(), std::move(out));
}

/// Stretches intensities to span [0, 1]. A constant image maps to all zeros.
inline GrayImage normalize_minmax(const GrayImage& img) {
    const auto [lo_it, hi_it] = std::minmax_element(img.data().begin(), img.data().end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(img.size(), 0.0);
    if (hi > lo) {
        const double span = hi - lo;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp((img.data()[i] - lo) / span, 0.0, 1.0);
    }
    return GrayImage(img.width(), img.height(), std::move(out));
}

/// Bilinear resampling on a corner-aligned grid: output pixel 0 and
/// out-1 land exactly on input pixel 0 and in-1.
inline GrayImage resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
    detail::require(out_w >= 1 && out_h >= 1, "resize_bilinear: target dimensions must be >= 1");
    if (out_w == img.width() && out_h == img.height()) return img;

    const auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
        return n_out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
    };
    std::vector<double> out(out_w * out_h);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        const double sy = coord(oy, out_h, img.height());
        const auto y0 = std::min(static_cast<std::size_t>(sy), img.height() - 1);
        const auto y1 = std::min(y0 + 1, img.height() - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double sx = coord(ox, out_w, img.width());
            const auto x0 = std::min(static_cast<std::size_t>(sx), img.width() - 1);
            const auto x1 = std::min(x0 + 1, img.width() - 1);
            const double fx = sx - static_cast<double>(x0);
            const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
            const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
            out[oy * out_w + ox] = std::clamp(top * (1.0 - fy) + bot * fy, 0.0, 1.0);
        }
    }
    return GrayImage(out_w, out_h, std::move(out));
}

/// Axis-aligned sub-image [x, x+w) x [y, y+h).
inline GrayImage crop(const GrayImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
    detail::require(w >= 1 && h >= 1, "crop: empty region");
    detail::require(x + w <= img.width() && y + h <= img.height(), "crop: region exceeds image bounds");
    std::vector<double> out;
    out.reserve(w * h);
    for (std::size_t r = y; r < y + h; ++r) {
        const auto row = img.data().subspan(r * img.width() + x, w);
        out.insert(out.end(), row.begin(), row.end());
    }
    return GrayImage(w, h, std::move(out));
}

}  // namespace stereolive
