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

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ivos/dataset.hpp"
#include "ivos/mask.hpp"
#include "ivos/util.hpp"

namespace ivos::testing {

// Independent brute-force oracles. These deliberately avoid the library's
// set-arithmetic implementations: everything below enumerates pixels and
// pairwise distances directly.

inline std::int64_t oracle_count(const BinaryMask& m,
                                 bool (*pred)(bool, bool),
                                 const BinaryMask& other) {
    std::int64_t n = 0;
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            if (pred(m.at(r, c) != 0, other.at(r, c) != 0)) ++n;
        }
    }
    return n;
}

inline double oracle_jaccard(const BinaryMask& pred, const BinaryMask& gt) {
    std::int64_t inter = 0, uni = 0;
    for (int r = 0; r < pred.height; ++r) {
        for (int c = 0; c < pred.width; ++c) {
            const bool a = pred.at(r, c) != 0;
            const bool b = gt.at(r, c) != 0;
            if (a && b) ++inter;
            if (a || b) ++uni;
        }
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double oracle_dice(const BinaryMask& pred, const BinaryMask& gt) {
    std::int64_t inter = 0, total = 0;
    for (int r = 0; r < pred.height; ++r) {
        for (int c = 0; c < pred.width; ++c) {
            const bool a = pred.at(r, c) != 0;
            const bool b = gt.at(r, c) != 0;
            if (a && b) ++inter;
            total += (a ? 1 : 0) + (b ? 1 : 0);
        }
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

// Boundary via direct 4-neighbour enumeration.
inline std::vector<std::pair<int, int>> oracle_boundary(const BinaryMask& m) {
    std::vector<std::pair<int, int>> out;
    auto fg = [&](int r, int c) {
        if (r < 0 || r >= m.height || c < 0 || c >= m.width) return false;
        return m.at(r, c) != 0;
    };
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            if (!fg(r, c)) continue;
            if (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) ||
                !fg(r, c + 1)) {
                out.emplace_back(r, c);
            }
        }
    }
    return out;
}

// Exhaustive boundary matcher: a boundary pixel matches when some boundary
// pixel of the other mask lies within Euclidean distance <= radius.
inline double oracle_boundary_f(const BinaryMask& pred, const BinaryMask& gt,
                                double tolerance_ratio) {
    const auto bp = oracle_boundary(pred);
    const auto bg = oracle_boundary(gt);
    if (bp.empty() && bg.empty()) return 1.0;
    if (bp.empty() || bg.empty()) return 0.0;
    const double diagonal =
        std::sqrt(static_cast<double>(pred.height) * pred.height +
                  static_cast<double>(pred.width) * pred.width);
    const std::int64_t radius =
        static_cast<std::int64_t>(std::ceil(tolerance_ratio * diagonal));
    const std::int64_t r2 = radius * radius;
    auto matched = [&](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
        std::int64_t n = 0;
        for (const auto& [r, c] : from) {
            for (const auto& [rr, cc] : to) {
                const std::int64_t dr = r - rr;
                const std::int64_t dc = c - cc;
                if (dr * dr + dc * dc <= r2) {
                    ++n;
                    break;
                }
            }
        }
        return n;
    };
    const double precision = static_cast<double>(matched(bp, bg)) /
                             static_cast<double>(bp.size());
    const double recall = static_cast<double>(matched(bg, bp)) /
                          static_cast<double>(bg.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

inline bool oracle_dilate_hit(const BinaryMask& m, int r, int c, int radius) {
    const std::int64_t r2 =
        static_cast<std::int64_t>(radius) * static_cast<std::int64_t>(radius);
    for (int rr = 0; rr < m.height; ++rr) {
        for (int cc = 0; cc < m.width; ++cc) {
            if (!m.at(rr, cc)) continue;
            const std::int64_t dr = r - rr;
            const std::int64_t dc = c - cc;
            if (dr * dr + dc * dc <= r2) return true;
        }
    }
    return false;
}

inline BinaryMask random_mask(Rng& rng, int height, int width,
                              double density = 0.35) {
    BinaryMask m(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (rng.unit() < density) m.set(r, c);
        }
    }
    return m;
}

// Blob-style masks exercise boundary logic better than salt-and-pepper noise.
inline BinaryMask random_blob_mask(Rng& rng, int height, int width) {
    BinaryMask m(height, width);
    const int blobs = 1 + static_cast<int>(rng.bounded(3));
    for (int b = 0; b < blobs; ++b) {
        const int cr = static_cast<int>(rng.bounded(height));
        const int cc = static_cast<int>(rng.bounded(width));
        const int radius = 1 + static_cast<int>(rng.bounded(
                                   static_cast<std::uint64_t>(
                                       std::max(2, std::min(height, width) /
                                                       3))));
        for (int r = std::max(0, cr - radius);
             r <= std::min(height - 1, cr + radius); ++r) {
            for (int c = std::max(0, cc - radius);
                 c <= std::min(width - 1, cc + radius); ++c) {
                const int dr = r - cr;
                const int dc = c - cc;
                if (dr * dr + dc * dc <= radius * radius) m.set(r, c);
            }
        }
    }
    return m;
}

inline BinaryMask rect_mask(int height, int width, int r0, int c0, int r1,
                            int c1) {
    BinaryMask m(height, width);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) m.set(r, c);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Shared dataset fixtures

inline ObjectAnnotation make_object(const std::string& oid, int label,
                                    const std::string& category, int frames,
                                    int h, int w,
                                    const std::map<int, BinaryMask>& masks) {
    ObjectAnnotation obj;
    obj.object_id = oid;
    obj.index_label = label;
    obj.category = category;
    obj.appearance = "the " + category + " " + std::to_string(label);
    obj.motion = "the " + category + " moving";
    obj.track.frame_count = frames;
    obj.track.height = h;
    obj.track.width = w;
    for (const auto& [frame, mask] : masks) {
        obj.track.masks[frame] = rle_encode(mask);
    }
    return obj;
}

// vid_a: 4x4, 2 frames, two objects, two plain referring expressions with
// hand-enumerable per-frame overlaps.
inline VideoMeta make_video_a() {
    VideoMeta v;
    v.video_id = "vid_a";
    v.frame_count = 2;
    v.height = 4;
    v.width = 4;
    v.frame_names = {"00000.jpg", "00001.jpg"};
    v.objects["a0"] = make_object(
        "a0", 0, "cat", 2, 4, 4,
        {{0, rect_mask(4, 4, 0, 0, 1, 1)}, {1, rect_mask(4, 4, 0, 0, 1, 1)}});
    v.objects["a1"] = make_object("a1", 1, "dog", 2, 4, 4,
                                  {{0, rect_mask(4, 4, 2, 2, 3, 3)}});

    Expression e0;
    e0.expression_id = "a_e0";
    e0.text = "the cat moving left";
    e0.type = ExpressionType::SingleMotion;
    e0.object_ids = {"a0"};
    v.expressions["a_e0"] = e0;

    Expression e1;
    e1.expression_id = "a_e1";
    e1.text = "the two pets";
    e1.type = ExpressionType::MultiInstance;
    e1.object_ids = {"a0", "a1"};
    v.expressions["a_e1"] = e1;
    return v;
}

// vid_b: 16x16, 2 frames, disjoint actor/target squares, a unidirectional
// pair, a bidirectional interaction and one single-object expression.
inline VideoMeta make_video_b() {
    VideoMeta v;
    v.video_id = "vid_b";
    v.frame_count = 2;
    v.height = 16;
    v.width = 16;
    v.frame_names = {"00000.jpg", "00001.jpg"};
    const BinaryMask child = rect_mask(16, 16, 1, 1, 3, 3);
    const BinaryMask wall = rect_mask(16, 16, 8, 8, 11, 11);
    v.objects["b0"] =
        make_object("b0", 0, "child", 2, 16, 16, {{0, child}, {1, child}});
    v.objects["b1"] =
        make_object("b1", 1, "wall", 2, 16, 16, {{0, wall}, {1, wall}});

    Expression fwd;
    fwd.expression_id = "b_e0";
    fwd.text = "the child leaning against the wall";
    fwd.type = ExpressionType::Interaction;
    fwd.object_ids = {"b0", "b1"};
    fwd.interaction = InteractionInfo{InteractionDirection::Unidirectional,
                                      {"b0"},
                                      {"b1"},
                                      std::string("b_e1"),
                                      InteractionLevel::ClassLevel};
    v.expressions["b_e0"] = fwd;

    Expression rev;
    rev.expression_id = "b_e1";
    rev.text = "the wall being leaned on by the child";
    rev.type = ExpressionType::Interaction;
    rev.object_ids = {"b0", "b1"};
    rev.interaction = InteractionInfo{InteractionDirection::Unidirectional,
                                      {"b1"},
                                      {"b0"},
                                      std::string("b_e0"),
                                      InteractionLevel::ClassLevel};
    v.expressions["b_e1"] = rev;

    Expression both;
    both.expression_id = "b_e2";
    both.text = "the child and the wall side by side";
    both.type = ExpressionType::Interaction;
    both.object_ids = {"b0", "b1"};
    both.interaction = InteractionInfo{InteractionDirection::Bidirectional,
                                       {"b0", "b1"},
                                       {},
                                       std::nullopt,
                                       InteractionLevel::ClassLevel};
    v.expressions["b_e2"] = both;

    Expression single;
    single.expression_id = "b_e3";
    single.text = "the wall";
    single.type = ExpressionType::SingleAppearance;
    single.object_ids = {"b1"};
    v.expressions["b_e3"] = single;
    return v;
}

// vid_c: minimal one-object video.
inline VideoMeta make_video_c() {
    VideoMeta v;
    v.video_id = "vid_c";
    v.frame_count = 1;
    v.height = 4;
    v.width = 4;
    v.frame_names = {"00000.jpg"};
    v.objects["c0"] = make_object("c0", 0, "bird", 1, 4, 4,
                                  {{0, rect_mask(4, 4, 0, 0, 0, 0)}});
    Expression e;
    e.expression_id = "c_e0";
    e.text = "the small bird hopping";
    e.type = ExpressionType::SingleAppearanceMotion;
    e.object_ids = {"c0"};
    v.expressions["c_e0"] = e;
    return v;
}

inline DatasetMeta make_synthetic_dataset() {
    DatasetMeta meta;
    for (VideoMeta v : {make_video_a(), make_video_b(), make_video_c()}) {
        meta.videos.emplace(v.video_id, std::move(v));
    }
    return meta;
}

}  // namespace ivos::testing
