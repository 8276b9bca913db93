#include "disrank/error.hpp"
#include "disrank/optim.hpp"
#include "disrank/rng.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace disrank;
using namespace disrank::optim;

namespace {

GradientSet random_grads(SplitMix64& rng) {
    GradientSet g(1 + rng.below(4));
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (auto& t : g) {
        t.resize(1 + rng.below(20));
        for (auto& v : t) v = scale * rng.normal();
    }
    return g;
}

std::vector<nn::ParamTensor> tensors(std::vector<std::vector<double>>& storage,
                                     std::vector<bool> decay) {
    std::vector<nn::ParamTensor> out;
    for (std::size_t i = 0; i < storage.size(); ++i) {
        out.push_back({"t" + std::to_string(i), storage[i], decay[i]});
    }
    return out;
}

AdamWConfig scalar_config(double lr, double wd) {
    AdamWConfig c;
    c.learning_rate = lr;
    c.weight_decay = wd;
    return c;
}

} // namespace

TEST(Clip, Examples) {
    GradientSet g{{3.0, 4.0}};
    auto r = clip_gradients(g, {2.5});
    EXPECT_EQ(r.norm, 5.0);
    EXPECT_EQ(g[0], (std::vector{1.5, 2.0}));

    GradientSet h{{0.0, 2.0}};
    clip_gradients(h, {5.0});
    EXPECT_EQ(h[0], (std::vector{0.0, 2.0}));

    GradientSet z{{0.0, 0.0}, {0.0}};
    r = clip_gradients(z, {1.0});
    EXPECT_EQ(r.scale, 1.0);
    EXPECT_EQ(z, (GradientSet{{0.0, 0.0}, {0.0}}));
}

TEST(Clip, NonFiniteIsRejected) {
    GradientSet g{{1.0, std::numeric_limits<double>::infinity()}};
    EXPECT_THROW(clip_gradients(g, {1.0}), ValidationError);
    GradientSet n{{std::nan("")}};
    EXPECT_THROW(clip_gradients(n, {1.0}), ValidationError);
}

TEST(Clip, BoundDirectionIdempotence) {
    SplitMix64 rng(314);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto original = random_grads(rng);
        const double max_norm = rng.uniform(0.01, 10.0);
        auto once = original;
        clip_gradients(once, {max_norm});
        EXPECT_LE(global_norm(once), max_norm + 1e-12);

        // Direction: every component is the same nonnegative multiple of the original.
        const double s = global_norm(once) / global_norm(original);
        for (std::size_t t = 0; t < once.size(); ++t) {
            for (std::size_t k = 0; k < once[t].size(); ++k) {
                EXPECT_NEAR(once[t][k], s * original[t][k], 1e-12 * std::abs(original[t][k]) + 1e-300);
            }
        }

        auto twice = once;
        clip_gradients(twice, {max_norm});
        for (std::size_t t = 0; t < once.size(); ++t) {
            for (std::size_t k = 0; k < once[t].size(); ++k) {
                EXPECT_NEAR(twice[t][k], once[t][k], 1e-14 * std::abs(once[t][k]));
            }
        }
    }
}

TEST(AdamW, SingleStepExamples) {
    std::vector<std::vector<double>> theta{{1.0}};
    AdamW opt(scalar_config(0.1, 0.0));
    opt.step(tensors(theta, {true}), {{1.0}});
    EXPECT_NEAR(theta[0][0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(theta[0][0], 0.900000001, 1e-15);

    theta = {{1.0}};
    AdamW still(scalar_config(0.1, 0.0));
    still.step(tensors(theta, {true}), {{0.0}});
    EXPECT_EQ(theta[0][0], 1.0);

    theta = {{1.0}};
    AdamW decay(scalar_config(0.1, 0.01));
    decay.step(tensors(theta, {true}), {{0.0}});
    EXPECT_NEAR(theta[0][0], 0.999, 1e-15);
}

TEST(AdamW, MatchesScalarReferenceOver100Steps) {
    for (double wd : {0.0, 0.01}) {
        SplitMix64 rng(11);
        std::vector<std::vector<double>> theta{{rng.normal(), rng.normal()}};
        oracle::ScalarAdam ref0{.lr = 1e-3, .wd = wd};
        oracle::ScalarAdam ref1{.lr = 1e-3, .wd = wd};
        double r0 = theta[0][0];
        double r1 = theta[0][1];
        AdamW opt(scalar_config(1e-3, wd));
        for (int t = 0; t < 100; ++t) {
            const double g0 = rng.normal();
            const double g1 = rng.normal();
            opt.step(tensors(theta, {true}), {{g0, g1}});
            r0 = ref0.step(r0, g0);
            r1 = ref1.step(r1, g1);
            ASSERT_NEAR(theta[0][0], r0, 1e-12);
            ASSERT_NEAR(theta[0][1], r1, 1e-12);
        }
        EXPECT_EQ(opt.state().step_count, 100u);
    }
}

TEST(AdamW, DecayOnlyOnFlaggedTensors) {
    std::vector<std::vector<double>> theta{{2.0}, {2.0}};
    AdamW opt(scalar_config(0.1, 0.5));
    opt.step(tensors(theta, {true, false}), {{0.0}, {0.0}});
    EXPECT_NEAR(theta[0][0], 2.0 - 0.1 * 0.5 * 2.0, 1e-15);
    EXPECT_EQ(theta[1][0], 2.0);
}

TEST(AdamW, ShapeMismatch) {
    std::vector<std::vector<double>> theta{{1.0, 2.0}};
    AdamW opt(scalar_config(0.1, 0.0));
    EXPECT_THROW(opt.step(tensors(theta, {true}), {{1.0}}), ValidationError);
    EXPECT_THROW(opt.step(tensors(theta, {true}), {{1.0, 1.0}, {1.0}}), ValidationError);
    opt.step(tensors(theta, {true}), {{1.0, 1.0}});
    std::vector<std::vector<double>> other{{1.0, 2.0, 3.0}};
    EXPECT_THROW(opt.step(tensors(other, {true}), {{1.0, 1.0, 1.0}}), ValidationError);
}

TEST(AdamW, ConvergesOnQuadratic) {
    SplitMix64 rng(2024);
    const std::size_t n = 10;
    std::vector<std::vector<double>> theta{std::vector<double>(n)};
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        theta[0][i] = rng.uniform(-1.0, 1.0);
        c[i] = rng.uniform(-1.0, 1.0);
    }
    AdamW opt(scalar_config(0.01, 0.0));
    auto distance = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (theta[0][i] - c[i]) * (theta[0][i] - c[i]);
        return std::sqrt(s);
    };
    int steps = 0;
    while (distance() >= 1e-3 && steps < 2000) {
        GradientSet g{std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) g[0][i] = 2.0 * (theta[0][i] - c[i]);
        opt.step(tensors(theta, {true}), g);
        ++steps;
    }
    EXPECT_LT(distance(), 1e-3) << "after " << steps << " steps";
}

TEST(Plateau, MonotoneImprovementKeepsLr) {
    PlateauScheduler s({});
    double lr = 1e-4;
    for (double loss : {1.0, 0.9, 0.8}) {
        lr = s.observe(loss, lr);
        EXPECT_EQ(lr, 1e-4);
    }
}

TEST(Plateau, HalvesOnFourthNonImprovingEpoch) {
    PlateauScheduler s({});
    double lr = 1e-4;
    lr = s.observe(1.0, lr);
    // Within threshold of the best: not an improvement.
    const double plateau = 1.0 - 0.5e-8;
    std::vector<double> seen;
    for (int i = 0; i < 4; ++i) {
        lr = s.observe(plateau, lr);
        seen.push_back(lr);
    }
    EXPECT_EQ(seen, (std::vector{1e-4, 1e-4, 1e-4, 0.5e-4}));
    EXPECT_EQ(s.bad_epochs(), 0);
    EXPECT_EQ(s.best_loss(), 1.0);
}

TEST(Plateau, FloorAtMinLr) {
    PlateauScheduler s({});
    double lr = 1e-6;
    for (int i = 0; i < 20; ++i) {
        lr = s.observe(1.0, lr);
        EXPECT_EQ(lr, 1e-6);
    }
    PlateauScheduler t({});
    lr = 1.5e-6;
    for (int i = 0; i < 20; ++i) lr = t.observe(1.0, lr);
    EXPECT_EQ(lr, 1e-6);
}

TEST(Plateau, NonFiniteLossRejected) {
    PlateauScheduler s({});
    EXPECT_THROW(s.observe(std::nan(""), 1e-4), ValidationError);
}

TEST(Plateau, LrSequenceNeverIncreases) {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        PlateauScheduler s({});
        double lr = rng.uniform(1e-6, 1e-2);
        for (int e = 0; e < 60; ++e) {
            const double next = s.observe(rng.uniform(0.0, 1.0), lr);
            EXPECT_LE(next, lr);
            EXPECT_GE(next, std::min(lr, 1e-6));
            lr = next;
        }
    }
}
