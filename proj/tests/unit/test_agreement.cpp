// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "cultdiff/agreement.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/rng.hpp"

using namespace cultdiff;

namespace {

CountMatrix random_counts(Rng& rng, std::size_t items, int raters, std::size_t categories) {
    CountMatrix m(items, std::vector<int>(categories, 0));
    for (auto& row : m)
        for (int r = 0; r < raters; ++r) ++row[rng.index(categories)];
    return m;
}

ErrorCode code_of(const CountMatrix& m) {
    try {
        fleiss_kappa(m);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Io;
}

}  // namespace

TEST(FleissKappa, PerfectAgreementIsExactlyOne) {
    CountMatrix m;
    for (int i = 0; i < 10; ++i) {
        std::vector<int> row(5, 0);
        row[i % 5] = 3;
        m.push_back(row);
    }
    EXPECT_EQ(fleiss_kappa(m), 1.0);
    EXPECT_EQ(fleiss_kappa({{2, 0}, {0, 2}}), 1.0);
}

TEST(FleissKappa, SmallWorkedExample) {
    // Oracle value: P_bar = 2/3, P_e = 1/2, kappa = 1/3.
    const CountMatrix m{{2, 1}, {1, 2}, {3, 0}, {0, 3}};
    EXPECT_NEAR(oracle::fleiss_kappa(m), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(fleiss_kappa(m), 1.0 / 3.0, 1e-9);
}

TEST(FleissKappa, MatchesDefinitionOracle) {
    Rng rng(314);
    for (int trial = 0; trial < 100; ++trial) {
        const auto items = 2 + rng.index(20);
        const int raters = 2 + static_cast<int>(rng.index(5));
        const auto cats = 2 + rng.index(4);
        const auto m = random_counts(rng, items, raters, cats);
        double got;
        try {
            got = fleiss_kappa(m);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DegenerateAgreement);
            continue;
        }
        EXPECT_NEAR(got, oracle::fleiss_kappa(m), 1e-9);
    }
}

TEST(FleissKappa, InvariantUnderRowAndColumnPermutation) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto m = random_counts(rng, 12, 3, 5);
        const double base = fleiss_kappa(m);
        rng.shuffle(std::span(m));
        std::vector<std::size_t> perm{4, 2, 0, 3, 1};
        CountMatrix permuted = m;
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < 5; ++j) permuted[i][j] = m[i][perm[j]];
        EXPECT_NEAR(fleiss_kappa(permuted), base, 1e-12);
    }
}

TEST(FleissKappa, RandomRatingsConvergeToZero) {
    Rng rng(12345);
    const auto m = random_counts(rng, 10000, 3, 5);
    EXPECT_LT(std::abs(fleiss_kappa(m)), 0.05);
}

TEST(FleissKappa, ErrorPaths) {
    EXPECT_EQ(code_of({{2, 1}, {1, 1}}), ErrorCode::UnequalRaterCounts);
    EXPECT_EQ(code_of({{3, 0}, {3, 0}}), ErrorCode::DegenerateAgreement);
    EXPECT_EQ(code_of({{1, 0}, {0, 1}}), ErrorCode::UnequalRaterCounts);  // one rater
    EXPECT_EQ(code_of({{2, 1}}), ErrorCode::OutOfRange);
}

TEST(FleissKappa, NeverExceedsOne) {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_counts(rng, 2 + rng.index(8), 2 + static_cast<int>(rng.index(3)), 3);
        try {
            EXPECT_LE(fleiss_kappa(m), 1.0);
        } catch (const Error&) {
        }
    }
}
