// Copyright 2026 The ivos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "ivos/metrics.hpp"
#include "ivos/util.hpp"

namespace ivos {
namespace {

using testing::random_blob_mask;
using testing::random_mask;
using testing::rect_mask;

TEST(Jaccard, Conventions) {
    BinaryMask a(3, 3);
    a.set(1, 1);
    EXPECT_DOUBLE_EQ(jaccard(a, a), 1.0);
    const BinaryMask empty(3, 3);
    EXPECT_DOUBLE_EQ(jaccard(empty, empty), 1.0);
    EXPECT_DOUBLE_EQ(jaccard(a, empty), 0.0);
    EXPECT_DOUBLE_EQ(jaccard(empty, a), 0.0);
}

TEST(Jaccard, OverlappingSquares) {
    // pred rows 0-1 x cols 0-1, gt rows 1-2 x cols 1-2: one shared pixel,
    // seven in the union.
    const BinaryMask pred = rect_mask(4, 4, 0, 0, 1, 1);
    const BinaryMask gt = rect_mask(4, 4, 1, 1, 2, 2);
    EXPECT_DOUBLE_EQ(jaccard(pred, gt), 1.0 / 7.0);
    EXPECT_DOUBLE_EQ(dice_coefficient(pred, gt), 0.25);
}

TEST(Jaccard, ResolutionMismatch) {
    EXPECT_THROW(jaccard(BinaryMask(2, 2), BinaryMask(2, 3)),
                 ResolutionMismatch);
}

TEST(Dice, Conventions) {
    BinaryMask a(2, 2), b(2, 2);
    a.set(0, 0);
    b.set(1, 1);
    EXPECT_DOUBLE_EQ(dice_coefficient(a, a), 1.0);
    EXPECT_DOUBLE_EQ(dice_coefficient(a, b), 0.0);
    const BinaryMask empty(2, 2);
    EXPECT_DOUBLE_EQ(dice_coefficient(empty, empty), 1.0);
}

TEST(BoundaryF, Conventions) {
    const BinaryMask square = rect_mask(8, 8, 2, 2, 5, 5);
    EXPECT_DOUBLE_EQ(boundary_f(square, square, 0.008), 1.0);
    const BinaryMask empty(8, 8);
    EXPECT_DOUBLE_EQ(boundary_f(empty, square, 0.008), 0.0);
    EXPECT_DOUBLE_EQ(boundary_f(square, empty, 0.008), 0.0);
    EXPECT_DOUBLE_EQ(boundary_f(empty, empty, 0.008), 1.0);
}

TEST(BoundaryF, ShiftedSquareFixture) {
    // 8x8, pred = 3x3 square at the origin, gt = same square shifted by
    // (1,1), tolerance 0.008 of the diagonal => radius 1. Expected value
    // 0.875 was computed with the exhaustive distance matcher below, which
    // stays the authority here.
    const BinaryMask pred = rect_mask(8, 8, 0, 0, 2, 2);
    const BinaryMask gt = rect_mask(8, 8, 1, 1, 3, 3);
    const double expected = testing::oracle_boundary_f(pred, gt, 0.008);
    EXPECT_DOUBLE_EQ(expected, 0.875);
    EXPECT_DOUBLE_EQ(boundary_f(pred, gt, 0.008), 0.875);
}

TEST(BoundaryF, MatchRadius) {
    EXPECT_EQ(boundary_match_radius(8, 8, 0.008), 1);
    EXPECT_EQ(boundary_match_radius(720, 1280, 0.008), 12);
}

TEST(BoundaryF, NonDecreasingInTolerance) {
    Rng rng(3u);
    for (int i = 0; i < 40; ++i) {
        const int h = 4 + static_cast<int>(rng.bounded(20));
        const int w = 4 + static_cast<int>(rng.bounded(20));
        const BinaryMask a = random_blob_mask(rng, h, w);
        const BinaryMask b = random_blob_mask(rng, h, w);
        double prev = 0.0;
        for (double tol : {0.01, 0.05, 0.1, 0.3}) {
            const double f = boundary_f(a, b, tol);
            EXPECT_GE(f, prev - 1e-12);
            prev = f;
        }
    }
}

TEST(Metrics, SymmetryUnderSwap) {
    Rng rng(5u);
    for (int i = 0; i < 100; ++i) {
        const int h = 1 + static_cast<int>(rng.bounded(24));
        const int w = 1 + static_cast<int>(rng.bounded(24));
        const BinaryMask a = random_mask(rng, h, w);
        const BinaryMask b = random_blob_mask(rng, h, w);
        EXPECT_DOUBLE_EQ(jaccard(a, b), jaccard(b, a));
        EXPECT_DOUBLE_EQ(boundary_f(a, b, 0.02), boundary_f(b, a, 0.02));
    }
}

TEST(Metrics, JaccardNeverExceedsDice) {
    Rng rng(13u);
    for (int i = 0; i < 300; ++i) {
        const int h = 1 + static_cast<int>(rng.bounded(24));
        const int w = 1 + static_cast<int>(rng.bounded(24));
        const BinaryMask a = random_mask(rng, h, w);
        const BinaryMask b = random_mask(rng, h, w);
        EXPECT_LE(jaccard(a, b), dice_coefficient(a, b) + 1e-15);
    }
}

TEST(Metrics, OracleEquivalenceOnRandomPairs) {
    Rng rng(17u);
    for (int i = 0; i < 1000; ++i) {
        const int h = 1 + static_cast<int>(rng.bounded(32));
        const int w = 1 + static_cast<int>(rng.bounded(32));
        const BinaryMask a = (i % 2 == 0) ? random_mask(rng, h, w)
                                          : random_blob_mask(rng, h, w);
        const BinaryMask b = (i % 3 == 0) ? random_mask(rng, h, w)
                                          : random_blob_mask(rng, h, w);
        ASSERT_NEAR(jaccard(a, b), testing::oracle_jaccard(a, b), 1e-12);
        ASSERT_NEAR(dice_coefficient(a, b), testing::oracle_dice(a, b),
                    1e-12);
        ASSERT_NEAR(boundary_f(a, b, 0.02),
                    testing::oracle_boundary_f(a, b, 0.02), 1e-12);
    }
}

TEST(JfScore, ReportedRowsAndZero) {
    EXPECT_DOUBLE_EQ(jf_score(53.8, 57.7), 55.75);
    EXPECT_DOUBLE_EQ(round_half_even(jf_score(53.8, 57.7), 1), 55.8);
    EXPECT_DOUBLE_EQ(round_half_even(jf_score(49.4, 50.8), 1), 50.1);
    EXPECT_DOUBLE_EQ(jf_score(0.0, 0.0), 0.0);
}

TEST(PixelwiseBce, UniformHalf) {
    Rng rng(19u);
    const BinaryMask gt = random_mask(rng, 4, 4);
    const std::vector<double> half(16, 0.5);
    EXPECT_NEAR(pixelwise_bce(half, gt), std::log(2.0), 1e-12);
}

TEST(PixelwiseBce, PerfectPredictionIsClampScale) {
    BinaryMask gt(2, 2);
    gt.set(0, 0);
    std::vector<double> probs{1.0, 0.0, 0.0, 0.0};
    const double loss = pixelwise_bce(probs, gt);
    EXPECT_GT(loss, 0.0);
    EXPECT_LT(loss, 2e-7);
}

TEST(PixelwiseBce, MatchesDirectSummation) {
    Rng rng(29u);
    const BinaryMask gt = random_mask(rng, 4, 4);
    std::vector<double> probs(16);
    for (auto& p : probs) p = rng.unit();
    double expected = 0.0;
    for (int i = 0; i < 16; ++i) {
        const double p = std::min(1.0 - 1e-7, std::max(1e-7, probs[i]));
        expected += gt.bits[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    expected /= 16.0;
    EXPECT_NEAR(pixelwise_bce(probs, gt), expected, 1e-12);
    EXPECT_THROW(pixelwise_bce(std::vector<double>(4, 0.5), gt),
                 ResolutionMismatch);
}

TEST(ExpressionScore, JfIsExactMean) {
    const ExpressionScore s = make_expression_score(0.25, 0.75, 3);
    EXPECT_DOUBLE_EQ(s.jf, 0.5);
    EXPECT_EQ(s.frame_count, 3);
}

}  // namespace
}  // namespace ivos
