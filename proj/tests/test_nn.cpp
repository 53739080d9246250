#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "stereolive/nn.hpp"
#include "test_util.hpp"

using namespace stereolive;
using namespace stereolive::nn;

namespace {

ConvLayer conv_ones(std::size_t k, std::size_t pad) {
    return ConvLayer{Tensor({k, k, 1, 1}, 1.0), Tensor({1}), 1, pad};
}

/// conv 3x3 (1->2) | pool 2 | dense 8->3 | dense 3->1 on 4x4 inputs.
ModelParams tiny_model(std::uint64_t seed) {
    Rng rng(seed);
    ConvLayer c{Tensor({3, 3, 1, 2}), Tensor({2}), 1, 1};
    DenseLayer d1{Tensor({8, 3}), Tensor({3})};
    DenseLayer d2{Tensor({3, 1}), Tensor({1})};
    ModelParams p;
    for (auto* t : {&c.kernels, &c.bias, &d1.weights, &d1.bias, &d2.weights, &d2.bias})
        for (double& v : t->data) v = rng.uniform(-0.8, 0.8);
    p.layers = {c, PoolLayer{2, 2}, d1, d2};
    return p;
}

double loss_of(const ModelParams& p, const GrayImage& img, int label) { return bce_loss(predict(p, img), label).loss; }

}  // namespace

TEST(Conv2d, OnesKernelCountsNeighbours) {
    const Tensor in({3, 3, 1}, 1.0);
    const auto out = conv2d(in, conv_ones(3, 1));
    ASSERT_EQ(out.shape, (Shape{3, 3, 1}));
    EXPECT_EQ(out.data, (std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST(Conv2d, BiasAndChannels) {
    // 1x1 kernel mapping 2 input channels to 1: out = 2*a - b + 0.5
    ConvLayer c{Tensor({1, 1, 2, 1}, std::vector<double>{2.0, -1.0}), Tensor({1}, std::vector<double>{0.5}), 1, 0};
    const Tensor in({1, 2, 2}, std::vector<double>{1.0, 3.0, 4.0, 1.0});
    EXPECT_EQ(conv2d(in, c).data, (std::vector<double>{-0.5, 7.5}));
}

TEST(MaxPool, ExamplesAndTieRule) {
    const Tensor in({2, 2, 1}, std::vector<double>{1, 3, 3, 2});
    std::vector<std::uint32_t> arg;
    const auto out = maxpool(in, 2, 2, &arg);
    EXPECT_EQ(out.data, (std::vector<double>{3}));
    ASSERT_EQ(arg.size(), 1u);
    EXPECT_EQ(arg[0], 1u);  // first maximum in scan order
    const auto back = maxpool_backward(in.shape, arg, Tensor({1, 1, 1}, 5.0));
    EXPECT_EQ(back.data, (std::vector<double>{0, 5, 0, 0}));
}

TEST(MaxPool, NinetySixToThirtyTwo) {
    Rng rng(3);
    Tensor in({96, 96, 8});
    for (double& v : in.data) v = rng.uniform();
    const auto out = maxpool(in, 3, 3);
    EXPECT_EQ(out.shape, (Shape{32, 32, 8}));
    // oracle: brute-force window max
    for (std::size_t oy = 0; oy < 32; oy += 5)
        for (std::size_t ox = 0; ox < 32; ox += 3)
            for (std::size_t c = 0; c < 8; ++c) {
                double m = -1.0;
                for (std::size_t ky = 0; ky < 3; ++ky)
                    for (std::size_t kx = 0; kx < 3; ++kx) m = std::max(m, in.data[((oy * 3 + ky) * 96 + ox * 3 + kx) * 8 + c]);
                EXPECT_EQ(out.data[(oy * 32 + ox) * 8 + c], m);
            }
}

TEST(MaxPool, RejectsIndivisibleInput) {
    EXPECT_THROW(maxpool(Tensor({5, 5, 1}), 2, 2), ArgumentError);
}

TEST(Dense, Example) {
    DenseLayer d{Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}), Tensor({2}, std::vector<double>{0.5, -1})};
    EXPECT_EQ(dense(Tensor({2}, std::vector<double>{1, 2}), d).data, (std::vector<double>{7.5, 9}));
}

TEST(Activations, ReluAndSigmoid) {
    EXPECT_EQ(relu(-2.0), 0.0);
    EXPECT_EQ(relu(3.0), 3.0);
    EXPECT_EQ(relu_grad(0.0), 0.0);
    EXPECT_EQ(sigmoid(0.0), 0.5);
    EXPECT_NEAR(sigmoid(2.0), 0.8807970779778823, 1e-15);
    EXPECT_EQ(sigmoid(1000.0), kSigmoidCeil);
    EXPECT_EQ(sigmoid(-1000.0), kSigmoidFloor);
    EXPECT_GT(sigmoid(-1000.0), 0.0);
    EXPECT_LT(sigmoid(1000.0), 1.0);
}

TEST(BceLoss, Examples) {
    EXPECT_NEAR(bce_loss(0.5, 1).loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_loss(0.5, 0).loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_loss(0.9, 1).loss, 0.10536051565782628, 1e-14);
    EXPECT_NEAR(bce_loss(0.9, 0).loss, 2.302585092994046, 1e-12);
    EXPECT_NEAR(bce_loss(0.9, 1).dloss_dp, -1.0 / 0.9, 1e-14);
    EXPECT_NEAR(bce_loss(0.0, 1).loss, -std::log(1e-12), 1e-9);
    EXPECT_EQ(bce_loss(0.0, 1).dloss_dp, 0.0);
    EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0).loss));
    EXPECT_THROW(bce_loss(0.5, 2), ArgumentError);
}

TEST(Backward, MatchesFiniteDifferences) {
    Rng rng(17);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto p = tiny_model(seed);
        const auto img = stereolive::testing::random_image(rng, 4, 4);
        const int label = static_cast<int>(seed % 2);
        auto grads = zeros_like(p);
        loss_and_gradient(p, img, label, grads);

        auto probe = p;
        auto pt = parameter_tensors(probe);
        const auto gt = parameter_tensors(grads);
        const double h = 1e-6;
        for (std::size_t k = 0; k < pt.size(); ++k)
            for (std::size_t i = 0; i < pt[k]->size(); ++i) {
                const double orig = pt[k]->data[i];
                pt[k]->data[i] = orig + h;
                const double up = loss_of(probe, img, label);
                pt[k]->data[i] = orig - h;
                const double down = loss_of(probe, img, label);
                pt[k]->data[i] = orig;
                const double fd = (up - down) / (2 * h);
                EXPECT_NEAR(gt[k]->data[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "tensor " << k << " index " << i;
            }
    }
}

TEST(Backward, ScaleIsLinear) {
    Rng rng(4);
    const auto p = tiny_model(9);
    const auto img = stereolive::testing::random_image(rng, 4, 4);
    auto g1 = zeros_like(p), g2 = zeros_like(p);
    loss_and_gradient(p, img, 1, g1, 1.0);
    loss_and_gradient(p, img, 1, g2, 0.25);
    const auto a = parameter_tensors(g1), b = parameter_tensors(g2);
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k]->size(); ++i) EXPECT_NEAR(b[k]->data[i], 0.25 * a[k]->data[i], 1e-15);
}

TEST(BuildModel, ParameterCountAndDeterminism) {
    const auto a = build_model(7);
    EXPECT_EQ(parameter_count(a), 272449u);
    EXPECT_NO_THROW(validate_architecture(a));
    EXPECT_EQ(a, build_model(7));
    EXPECT_NE(a, build_model(8));
    const auto& fc3 = std::get<DenseLayer>(a.layers.back());
    for (double b : fc3.bias.data) EXPECT_EQ(b, 0.0);
    const double limit = std::sqrt(6.0 / 33.0);
    for (double w : fc3.weights.data) EXPECT_LE(std::abs(w), limit);
}

TEST(BuildModel, OutputInOpenUnitInterval) {
    const auto m = build_model(3);
    Rng rng(2);
    for (int i = 0; i < 5; ++i) {
        const double p = predict(m, stereolive::testing::random_image(rng, 96, 96));
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
    EXPECT_THROW(predict(m, stereolive::testing::random_image(rng, 64, 64)), ArgumentError);
}

namespace {

ModelParams scalar_model(double theta) {
    ModelParams p;
    p.layers = {DenseLayer{Tensor({1, 1}, std::vector<double>{theta}), Tensor({1})}};
    return p;
}

double& weight(ModelParams& p) { return std::get<DenseLayer>(p.layers[0]).weights.data[0]; }

}  // namespace

TEST(Adam, FirstStepIsLearningRateTimesSign) {
    for (double g : {1e-3, 0.5, -7.0}) {
        auto p = scalar_model(1.0);
        auto grads = zeros_like(p);
        weight(grads) = g;
        auto st = AdamState::for_model(p, 0.01);
        adam_step(p, grads, st);
        EXPECT_NEAR(weight(p), 1.0 - 0.01 * (g > 0 ? 1 : -1), 1e-6);
        // bias untouched by a zero gradient
        EXPECT_EQ(std::get<DenseLayer>(p.layers[0]).bias.data[0], 0.0);
    }
}

TEST(Adam, ZeroLearningRateIsIdentity) {
    auto p = tiny_model(1);
    const auto before = p;
    auto grads = tiny_model(2);
    auto st = AdamState::for_model(p, 0.0);
    for (int i = 0; i < 3; ++i) adam_step(p, grads, st);
    EXPECT_EQ(p, before);
}

TEST(Adam, MatchesScalarOracleOnQuadratic) {
    // minimize theta^2 for 100 steps against an independent scalar Adam
    double theta = 1.0, m = 0.0, v = 0.0;
    const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    auto p = scalar_model(1.0);
    auto st = AdamState::for_model(p, lr);
    for (int t = 1; t <= 100; ++t) {
        const double g = 2.0 * theta;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);

        auto grads = zeros_like(p);
        weight(grads) = 2.0 * weight(p);
        adam_step(p, grads, st);
    }
    EXPECT_NEAR(weight(p), theta, 1e-12);
    EXPECT_LT(std::abs(theta), 1.0);
}

TEST(Adam, RejectsMismatchedGradients) {
    auto p = tiny_model(1);
    auto st = AdamState::for_model(p);
    EXPECT_THROW(adam_step(p, scalar_model(0.0), st), ArgumentError);
}

TEST(Weights, BitwiseRoundTrip) {
    auto m = build_model(5);
    std::get<DenseLayer>(m.layers.back()).bias.data[0] = -0.1234567890123;
    const auto bytes = encode_weights(m);
    EXPECT_EQ(decode_weights(bytes), m);
    EXPECT_EQ(encode_weights(decode_weights(bytes)), bytes);

    const auto path = std::filesystem::temp_directory_path() / "stereolive_test_weights.slnn";
    save_weights(path, m);
    EXPECT_EQ(load_weights(path), m);
    std::filesystem::remove(path);
}

TEST(Weights, CorruptFilesAreRejected) {
    const auto good = encode_weights(build_model(5));
    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(decode_weights(bad), DecodeError);
    bad = good;
    bad[4] = 2;  // version
    EXPECT_THROW(decode_weights(bad), DecodeError);
    bad = Bytes(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() / 2));
    EXPECT_THROW(decode_weights(bad), DecodeError);
    bad = good;
    bad.push_back(0);
    EXPECT_THROW(decode_weights(bad), DecodeError);
    EXPECT_THROW(decode_weights(encode_weights(tiny_model(1))), DecodeError);
    EXPECT_THROW(load_weights("/nonexistent/model.slnn"), IoError);
}
