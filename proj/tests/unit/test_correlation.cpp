// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "cultdiff/correlation.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/rng.hpp"

using namespace cultdiff;

namespace {

std::vector<double> random_array(Rng& rng, std::size_t n, bool ties) {
    std::vector<double> v(n);
    for (auto& x : v) x = ties ? static_cast<double>(rng.index(4)) : rng.normal();
    return v;
}

void expect_matches_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = correlate("m", x, y);
    auto check = [](const std::optional<double>& got, double want) {
        if (std::isnan(want)) {
            EXPECT_FALSE(got.has_value());
        } else {
            ASSERT_TRUE(got.has_value());
            EXPECT_NEAR(*got, want, 1e-9);
        }
    };
    check(r.pearson, oracle::pearson(x, y));
    check(r.spearman, oracle::spearman(x, y));
    check(r.kendall_tau_b, oracle::tau_b(x, y));
    check(r.kendall_tau_c, oracle::tau_c(x, y));
}

}  // namespace

TEST(Correlation, IdenticalArraysArePerfect) {
    const std::vector<double> x{3.0, 1.0, 4.0, 1.5, 5.0, 9.0};
    const auto r = correlate("self", x, x);
    EXPECT_DOUBLE_EQ(*r.spearman, 1.0);
    EXPECT_DOUBLE_EQ(*r.pearson, 1.0);
    EXPECT_DOUBLE_EQ(*r.kendall_tau_b, 1.0);
    // n distinct values: m = n, so tau_c = 2 * n0 / (n^2 (n-1)/n) = 1.
    EXPECT_DOUBLE_EQ(*r.kendall_tau_c, 1.0);
}

TEST(Correlation, ReversedArraysAreInverted) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6, 7};
    const std::vector<double> y{7, 6, 5, 4, 3, 2, 1};
    const auto r = correlate("rev", x, y);
    EXPECT_DOUBLE_EQ(*r.spearman, -1.0);
    EXPECT_DOUBLE_EQ(*r.kendall_tau_b, -1.0);
    EXPECT_NEAR(*r.pearson, -1.0, 1e-15);
}

TEST(Correlation, TiesMatchBruteForceOracle) {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(11);
        const bool ties = trial % 2 == 0;
        expect_matches_oracle(random_array(rng, n, ties), random_array(rng, n, ties));
    }
}

TEST(Correlation, NoTiesTauBIsNormalisedScore) {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.index(30);
        const auto x = random_array(rng, n, false);
        const auto y = random_array(rng, n, false);
        const auto c = oracle::pair_counts(x, y);
        const double expected = static_cast<double>(c.concordant - c.discordant) / (n * (n - 1) / 2.0);
        EXPECT_NEAR(*kendall_tau_b(x, y), expected, 1e-12);
    }
}

TEST(Correlation, SpearmanIsPearsonOnMidranks) {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_array(rng, 15, trial % 3 == 0);
        const auto y = random_array(rng, 15, trial % 2 == 0);
        const auto s = spearman(x, y);
        const auto p = pearson(midranks(x), midranks(y));
        ASSERT_EQ(s.has_value(), p.has_value());
        if (s) EXPECT_DOUBLE_EQ(*s, *p);
    }
}

TEST(Correlation, InvariantUnderMonotoneTransforms) {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = random_array(rng, 20, trial % 2 == 0);
        const auto y = random_array(rng, 20, false);
        std::vector<double> x_mono(x.size()), x_affine(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x_mono[i] = std::exp(x[i]) + x[i] * x[i] * x[i];
            x_affine[i] = 3.5 * x[i] - 2.0;
        }
        const auto base = correlate("x", x, y);
        const auto mono = correlate("x", x_mono, y);
        const auto affine = correlate("x", x_affine, y);
        EXPECT_NEAR(*base.spearman, *mono.spearman, 1e-12);
        EXPECT_NEAR(*base.kendall_tau_b, *mono.kendall_tau_b, 1e-12);
        EXPECT_NEAR(*base.kendall_tau_c, *mono.kendall_tau_c, 1e-12);
        EXPECT_NEAR(*base.pearson, *affine.pearson, 1e-12);
    }
}

TEST(Correlation, ZeroVarianceIsReportedNotZero) {
    const std::vector<double> flat{2, 2, 2, 2};
    const std::vector<double> y{1, 2, 3, 4};
    const auto r = correlate("flat", flat, y);
    EXPECT_FALSE(r.pearson.has_value());
    EXPECT_FALSE(r.spearman.has_value());
    EXPECT_FALSE(r.kendall_tau_b.has_value());
    EXPECT_FALSE(r.kendall_tau_c.has_value());
    EXPECT_EQ(r.undefined.size(), 4u);
    EXPECT_TRUE(r.to_json()["pearson"].is_null());
}

TEST(Correlation, InputValidation) {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{1, 2};
    try {
        correlate("m", a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
    }
    const std::vector<double> one{1};
    EXPECT_THROW(correlate("m", one, one), Error);
    const std::vector<double> bad{1, NAN, 3};
    try {
        correlate("m", bad, a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
    }
}

TEST(Correlation, LargeInputUsesSubquadraticKendall) {
    Rng rng(1);
    std::vector<double> x(20000), y(20000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(rng.index(5));
        y[i] = x[i] + rng.normal();
    }
    const auto r = correlate("big", x, y);
    ASSERT_TRUE(r.kendall_tau_b.has_value());
    EXPECT_GT(*r.kendall_tau_b, 0.5);
    EXPECT_EQ(r.tau_c_m, 5);
}
