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

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ivos/mask.hpp"

namespace ivos {

// Fraction of the image diagonal used as the boundary-matching tolerance.
inline constexpr double kDefaultToleranceRatio = 0.008;

struct FrameScore {
    double j = 0.0;
    double f = 0.0;
};

struct ExpressionScore {
    double j_mean = 0.0;
    double f_mean = 0.0;
    double jf = 0.0;
    int frame_count = 0;
};

inline ExpressionScore make_expression_score(double j_mean, double f_mean,
                                             int frame_count) {
    return ExpressionScore{j_mean, f_mean, (j_mean + f_mean) / 2.0,
                           frame_count};
}

// Region similarity: |pred ∩ gt| / |pred ∪ gt|. Two empty masks agree
// perfectly and score 1.0.
inline double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    check_same_resolution(pred, gt);
    std::int64_t inter = 0;
    std::int64_t uni = 0;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        inter += pred.bits[i] & gt.bits[i];
        uni += pred.bits[i] | gt.bits[i];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double dice_coefficient(const BinaryMask& pred, const BinaryMask& gt) {
    check_same_resolution(pred, gt);
    std::int64_t inter = 0;
    std::int64_t total = 0;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        inter += pred.bits[i] & gt.bits[i];
        total += pred.bits[i] + gt.bits[i];
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

inline int boundary_match_radius(int height, int width,
                                 double tolerance_ratio) {
    const double diagonal = std::sqrt(static_cast<double>(height) * height +
                                      static_cast<double>(width) * width);
    return static_cast<int>(std::ceil(tolerance_ratio * diagonal));
}

// Contour accuracy: F-measure of boundary precision and recall where a
// boundary pixel matches if it lies within the tolerance radius of the other
// mask's boundary.
inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt,
                         double tolerance_ratio = kDefaultToleranceRatio) {
    check_same_resolution(pred, gt);
    if (tolerance_ratio <= 0.0) {
        throw std::invalid_argument("tolerance_ratio must be > 0");
    }
    const BinaryMask bp = boundary_pixels(pred);
    const BinaryMask bg = boundary_pixels(gt);
    const std::int64_t np = bp.area();
    const std::int64_t ng = bg.area();
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;

    const int radius =
        boundary_match_radius(pred.height, pred.width, tolerance_ratio);
    const BinaryMask gt_zone = dilate_disc(bg, radius);
    const BinaryMask pred_zone = dilate_disc(bp, radius);

    std::int64_t matched_pred = 0;
    std::int64_t matched_gt = 0;
    for (std::size_t i = 0; i < bp.bits.size(); ++i) {
        matched_pred += bp.bits[i] & gt_zone.bits[i];
        matched_gt += bg.bits[i] & pred_zone.bits[i];
    }
    const double precision =
        static_cast<double>(matched_pred) / static_cast<double>(np);
    const double recall =
        static_cast<double>(matched_gt) / static_cast<double>(ng);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

// Arithmetic mean of region similarity and contour accuracy. Works on any
// uniform scale (unit interval or percentages).
inline double jf_score(double j, double f) { return (j + f) / 2.0; }

// Mean binary cross-entropy between per-pixel probabilities (row-major,
// height*width values) and a ground-truth mask. Probabilities are clamped to
// [epsilon, 1-epsilon] before taking logs.
inline double pixelwise_bce(const std::vector<double>& pred_probs,
                            const BinaryMask& gt, double epsilon = 1e-7) {
    if (pred_probs.size() != gt.bits.size()) {
        throw ResolutionMismatch("probability map has " +
                                 std::to_string(pred_probs.size()) +
                                 " entries, mask has " +
                                 std::to_string(gt.bits.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred_probs.size(); ++i) {
        const double p =
            std::clamp(pred_probs[i], epsilon, 1.0 - epsilon);
        sum += gt.bits[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred_probs.size());
}

}  // namespace ivos
