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

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "ivos/errors.hpp"

namespace ivos {

// Per-frame foreground mask, row-major, one byte per pixel (0 or 1).
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int h, int w) : height(h), width(w) {
        if (h < 1 || w < 1) {
            throw std::invalid_argument("mask dimensions must be positive");
        }
        bits.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
                    0);
    }

    std::uint8_t at(int row, int col) const {
        return bits[static_cast<std::size_t>(row) *
                        static_cast<std::size_t>(width) +
                    static_cast<std::size_t>(col)];
    }
    void set(int row, int col, bool on = true) {
        bits[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
             static_cast<std::size_t>(col)] = on ? 1 : 0;
    }

    std::int64_t area() const {
        std::int64_t n = 0;
        for (std::uint8_t b : bits) n += b;
        return n;
    }
    bool is_empty() const {
        for (std::uint8_t b : bits) {
            if (b) return false;
        }
        return true;
    }
    bool same_resolution(const BinaryMask& other) const {
        return height == other.height && width == other.width;
    }

    bool operator==(const BinaryMask&) const = default;
};

// Run-length encoding in column-major pixel order. The first count covers
// background pixels; runs alternate background/foreground from there. A zero
// count is legal only at position 0 (mask starting with foreground).
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<std::int64_t> counts;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) *
               static_cast<std::int64_t>(width);
    }
    std::int64_t foreground_area() const {
        std::int64_t area = 0;
        for (std::size_t i = 1; i < counts.size(); i += 2) area += counts[i];
        return area;
    }
    bool is_canonical() const {
        for (std::size_t i = 1; i < counts.size(); ++i) {
            if (counts[i] <= 0) return false;
        }
        return !counts.empty() && counts[0] >= 0;
    }

    bool operator==(const RleMask&) const = default;
};

inline void check_same_resolution(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_resolution(b)) {
        throw ResolutionMismatch(a.height, a.width, b.height, b.width);
    }
}

inline RleMask rle_encode(const BinaryMask& mask) {
    RleMask rle;
    rle.height = mask.height;
    rle.width = mask.width;
    std::uint8_t value = 0;
    std::int64_t run = 0;
    for (int col = 0; col < mask.width; ++col) {
        for (int row = 0; row < mask.height; ++row) {
            const std::uint8_t v = mask.at(row, col) ? 1 : 0;
            if (v != value) {
                rle.counts.push_back(run);
                run = 0;
                value = v;
            }
            ++run;
        }
    }
    rle.counts.push_back(run);
    return rle;
}

inline BinaryMask rle_decode(const RleMask& rle) {
    std::int64_t total = 0;
    for (std::int64_t c : rle.counts) {
        if (c < 0) {
            throw CountSumMismatch("negative run length in RLE counts");
        }
        total += c;
    }
    if (total != rle.pixel_count()) {
        throw CountSumMismatch(
            "RLE counts sum to " + std::to_string(total) + ", expected " +
            std::to_string(rle.pixel_count()) + " for " +
            std::to_string(rle.height) + "x" + std::to_string(rle.width));
    }
    BinaryMask mask(rle.height, rle.width);
    std::int64_t pos = 0;
    bool foreground = false;
    for (std::int64_t c : rle.counts) {
        if (foreground) {
            for (std::int64_t k = 0; k < c; ++k) {
                const std::int64_t p = pos + k;
                const int col = static_cast<int>(p / rle.height);
                const int row = static_cast<int>(p % rle.height);
                mask.set(row, col);
            }
        }
        pos += c;
        foreground = !foreground;
    }
    return mask;
}

// {"size": [height, width], "counts": [int, ...]}
inline nlohmann::json rle_to_json(const RleMask& rle) {
    return nlohmann::json{{"size", {rle.height, rle.width}},
                          {"counts", rle.counts}};
}

inline RleMask rle_from_json(const nlohmann::json& j) {
    RleMask rle;
    try {
        const auto& size = j.at("size");
        rle.height = size.at(0).get<int>();
        rle.width = size.at(1).get<int>();
        rle.counts = j.at("counts").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad RLE object: ") + e.what());
    }
    return rle;
}

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
    check_same_resolution(a, b);
    BinaryMask out(a.height, a.width);
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        out.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
    }
    return out;
}

inline BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
    check_same_resolution(a, b);
    BinaryMask out(a.height, a.width);
    for (std::size_t i = 0; i < out.bits.size(); ++i) {
        out.bits[i] = (a.bits[i] & b.bits[i]) ? 1 : 0;
    }
    return out;
}

// Foreground pixels with at least one 4-neighbour that is background or lies
// outside the image.
inline BinaryMask boundary_pixels(const BinaryMask& mask) {
    BinaryMask out(mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            const bool edge = r == 0 || r == mask.height - 1 || c == 0 ||
                              c == mask.width - 1;
            if (edge || !mask.at(r - 1, c) || !mask.at(r + 1, c) ||
                !mask.at(r, c - 1) || !mask.at(r, c + 1)) {
                out.set(r, c);
            }
        }
    }
    return out;
}

// Exact Euclidean disc dilation: output pixel is set iff some foreground
// pixel lies within distance <= radius.
inline BinaryMask dilate_disc(const BinaryMask& mask, int radius) {
    if (radius < 0) throw std::invalid_argument("dilation radius < 0");
    if (radius == 0) return mask;

    std::vector<std::pair<int, int>> offsets;
    const std::int64_t r2 =
        static_cast<std::int64_t>(radius) * static_cast<std::int64_t>(radius);
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            if (static_cast<std::int64_t>(dr) * dr +
                    static_cast<std::int64_t>(dc) * dc <=
                r2) {
                offsets.emplace_back(dr, dc);
            }
        }
    }

    BinaryMask out(mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            for (const auto& [dr, dc] : offsets) {
                const int rr = r + dr;
                const int cc = c + dc;
                if (rr >= 0 && rr < mask.height && cc >= 0 &&
                    cc < mask.width) {
                    out.set(rr, cc);
                }
            }
        }
    }
    return out;
}

// Temporal sequence of per-frame masks for one object or prediction. A frame
// index absent from `masks` denotes an empty mask.
struct MaskTrack {
    int frame_count = 0;
    int height = 0;
    int width = 0;
    std::map<int, RleMask> masks;

    BinaryMask mask_at(int frame) const {
        auto it = masks.find(frame);
        if (it == masks.end()) return BinaryMask(height, width);
        return rle_decode(it->second);
    }
    bool has_frame(int frame) const { return masks.count(frame) > 0; }

    bool operator==(const MaskTrack&) const = default;
};

}  // namespace ivos
