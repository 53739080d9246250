#include <gtest/gtest.h>

#include <cmath>

#include "stereolive/imaging.hpp"
#include "test_util.hpp"

using namespace stereolive;
using stereolive::testing::bytes_of;
using stereolive::testing::random_image;

TEST(DecodePgm, EndpointMapping) {
    const auto img = decode_pgm(bytes_of("P5 2 1 255\n", {0, 255}));
    ASSERT_EQ(img.width(), 2u);
    ASSERT_EQ(img.height(), 1u);
    EXPECT_EQ(img.at(0, 0), 0.0);
    EXPECT_EQ(img.at(1, 0), 1.0);
}

TEST(DecodePgm, ToleratesCommentsAndWhitespace) {
    const auto img = decode_pgm(bytes_of("P5\n# made by hand\n 2\t\n# another\n1\n255\n", {51, 102}));
    EXPECT_DOUBLE_EQ(img.at(0, 0), 0.2);
    EXPECT_DOUBLE_EQ(img.at(1, 0), 0.4);
}

TEST(DecodePgm, SixteenBitBigEndian) {
    const auto img = decode_pgm(bytes_of("P5\n1 2\n65535\n", {0xFF, 0xFF, 0x80, 0x00}));
    EXPECT_EQ(img.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(img.at(0, 1), 32768.0 / 65535.0);
}

TEST(DecodePgm, RejectsWrongMagic) {
    try {
        decode_pgm(bytes_of("P6\n1 1\n255\n", {0, 0, 0}));
        FAIL() << "expected DecodeError";
    } catch (const DecodeError& e) {
        EXPECT_EQ(e.offset(), 0u);
        EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
    }
}

TEST(DecodePgm, RejectsTruncatedPayload) {
    EXPECT_THROW(decode_pgm(bytes_of("P5\n3 1\n255\n", {1, 2})), DecodeError);
}

TEST(DecodePgm, RejectsZeroDimension) {
    EXPECT_THROW(decode_pgm(bytes_of("P5\n0 4\n255\n", {})), DecodeError);
}

TEST(DecodePgm, RejectsZeroMaxval) {
    try {
        decode_pgm(bytes_of("P5\n1 1\n0\n", {0}));
        FAIL() << "expected DecodeError";
    } catch (const DecodeError& e) {
        EXPECT_EQ(e.offset(), 7u);
    }
}

TEST(DecodePgm, RejectsSampleAboveMaxval) {
    EXPECT_THROW(decode_pgm(bytes_of("P5\n1 1\n100\n", {101})), DecodeError);
}

TEST(EncodePgm, ExactLayoutAndRounding) {
    const auto bytes = encode_pgm(GrayImage(2, 1, {0.5, 0.0}));
    const auto expected = bytes_of("P5\n2 1\n255\n", {128, 0});
    EXPECT_EQ(bytes, expected);
}

TEST(EncodePgm, RoundHalfAwayFromZero) {
    // 0.5/255 sits exactly between codes 0 and 1
    const auto bytes = encode_pgm(GrayImage(1, 1, {0.5 / 255.0}));
    EXPECT_EQ(bytes.back(), 1);
}

TEST(PgmProperty, EightBitRoundTripIsByteIdentical) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t w = 1 + rng.below(40), h = 1 + rng.below(40);
        std::vector<std::uint8_t> payload(w * h);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng.below(256));
        const auto bytes = bytes_of("P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n", payload);
        EXPECT_EQ(encode_pgm(decode_pgm(bytes)), bytes);
    }
}

TEST(PgmProperty, QuantizationErrorBounded) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(rng, 1 + rng.below(30), 1 + rng.below(30));
        const auto back = decode_pgm(encode_pgm(img));
        for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.data()[i] - img.data()[i]), 1.0 / 510.0 + 1e-15);
    }
}

TEST(GrayImage, RejectsOutOfRangeIntensity) {
    EXPECT_THROW(GrayImage(1, 1, {1.5}), ArgumentError);
    EXPECT_THROW(GrayImage(2, 1, {0.1}), ArgumentError);
    EXPECT_THROW(GrayImage(0, 1, {}), ArgumentError);
}

TEST(StereoPair, RejectsSizeMismatch) {
    EXPECT_THROW(StereoPair(GrayImage(4, 4), GrayImage(5, 4), CameraRig{}), ArgumentError);
    EXPECT_THROW(StereoPair(GrayImage(4, 4), GrayImage(4, 4), CameraRig{0.0, 0.1}), ArgumentError);
}

TEST(PowerLaw, Examples) {
    const GrayImage img(3, 1, {0.5, 0.25, 1.0});
    EXPECT_EQ(power_law(img, 1.0), img);
    EXPECT_DOUBLE_EQ(power_law(img, 2.0).at(0, 0), 0.25);
    EXPECT_NEAR(power_law(img, 0.4).at(1, 0), 0.5743491774985174, 1e-12);
}

TEST(PowerLaw, RejectsBadGamma) {
    const GrayImage img(1, 1);
    EXPECT_THROW(power_law(img, 0.0), ArgumentError);
    EXPECT_THROW(power_law(img, -1.0), ArgumentError);
    EXPECT_THROW(power_law(img, std::nan("")), ArgumentError);
    EXPECT_THROW(power_law(img, INFINITY), ArgumentError);
}

TEST(PowerLaw, InverseExponentRecoversInput) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const double g = rng.uniform(0.2, 5.0);
        auto img = random_image(rng, 8, 8);
        std::vector<double> d(img.data().begin(), img.data().end());
        for (double& v : d) v = std::max(v, 1e-3);
        img = GrayImage(8, 8, d);
        const auto back = power_law(power_law(img, g), 1.0 / g);
        for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(back.data()[i], d[i], 1e-12);
    }
}

TEST(NormalizeMinmax, Examples) {
    const auto out = normalize_minmax(GrayImage(2, 1, {0.2, 0.6}));
    EXPECT_EQ(out.at(0, 0), 0.0);
    EXPECT_EQ(out.at(1, 0), 1.0);
    EXPECT_EQ(normalize_minmax(GrayImage(2, 1, {0.7, 0.7})), GrayImage(2, 1, {0.0, 0.0}));
    const GrayImage full(3, 1, {0.0, 0.3, 1.0});
    EXPECT_EQ(normalize_minmax(full), full);
}

TEST(NormalizeMinmax, Idempotent) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto once = normalize_minmax(random_image(rng, 1 + rng.below(20), 1 + rng.below(20)));
        const auto twice = normalize_minmax(once);
        for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice.data()[i], once.data()[i], 1e-15);
    }
}

TEST(ResizeBilinear, Examples) {
    Rng rng(5);
    const auto img = random_image(rng, 7, 5);
    EXPECT_EQ(resize_bilinear(img, 7, 5), img);

    const auto c = resize_bilinear(GrayImage(3, 2, std::vector<double>(6, 0.3)), 11, 4);
    for (double v : c.data()) EXPECT_NEAR(v, 0.3, 1e-15);

    const auto mid = resize_bilinear(GrayImage(2, 1, {0.0, 1.0}), 3, 1);
    EXPECT_EQ(mid, GrayImage(3, 1, {0.0, 0.5, 1.0}));
}

TEST(ResizeBilinear, ProducesRequestedSizeAndRejectsZero) {
    Rng rng(6);
    const auto img = random_image(rng, 13, 9);
    const auto out = resize_bilinear(img, 96, 96);
    EXPECT_EQ(out.width(), 96u);
    EXPECT_EQ(out.height(), 96u);
    EXPECT_EQ(out.at(0, 0), img.at(0, 0));
    EXPECT_EQ(out.at(95, 95), img.at(12, 8));
    EXPECT_THROW(resize_bilinear(img, 0, 3), ArgumentError);
}

TEST(Crop, ExtractsRegion) {
    const GrayImage img(3, 2, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
    EXPECT_EQ(crop(img, 1, 0, 2, 2), GrayImage(2, 2, {0.1, 0.2, 0.4, 0.5}));
    EXPECT_THROW(crop(img, 2, 0, 2, 1), ArgumentError);
}
