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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ivos/image.hpp"
#include "ivos/mask.hpp"

namespace ivos {

// Twelve maximally-separated hues, assigned to objects by index label.
inline const std::array<Rgb, 12>& overlay_palette() {
    static const std::array<Rgb, 12> palette = {{
        {255, 0, 0},    {255, 128, 0},  {255, 255, 0},  {128, 255, 0},
        {0, 255, 0},    {0, 255, 128},  {0, 255, 255},  {0, 128, 255},
        {0, 0, 255},    {128, 0, 255},  {255, 0, 255},  {255, 0, 128},
    }};
    return palette;
}

inline Rgb overlay_color(int index_label) {
    return overlay_palette()[static_cast<std::size_t>(index_label) % 12];
}

struct OverlayMode {
    bool all_objects = true;
    int single_index = -1;

    static OverlayMode all() { return {true, -1}; }
    static OverlayMode single(int index) { return {false, index}; }
};

namespace detail {

// 5x7 digit bitmaps, row-major, bit 4 = leftmost column.
inline const std::array<std::array<std::uint8_t, 7>, 10>& digit_font() {
    static const std::array<std::array<std::uint8_t, 7>, 10> font = {{
        {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
        {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
        {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
        {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
        {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
        {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
        {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
        {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
        {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
    }};
    return font;
}

constexpr int kGlyphHeight = 7;
constexpr int kGlyphWidth = 5;
constexpr int kGlyphSpacing = 1;

inline int label_text_width(const std::string& text) {
    if (text.empty()) return 0;
    return static_cast<int>(text.size()) * kGlyphWidth +
           (static_cast<int>(text.size()) - 1) * kGlyphSpacing;
}

inline void draw_label(RgbImage& frame, const std::string& text,
                       int center_row, int center_col) {
    const int total_width = label_text_width(text);
    int col = center_col - total_width / 2;
    const int row0 = center_row - kGlyphHeight / 2;
    for (char ch : text) {
        if (ch >= '0' && ch <= '9') {
            const auto& glyph = digit_font()[static_cast<std::size_t>(
                ch - '0')];
            for (int r = 0; r < kGlyphHeight; ++r) {
                for (int c = 0; c < kGlyphWidth; ++c) {
                    if (!(glyph[static_cast<std::size_t>(r)] &
                          (1 << (kGlyphWidth - 1 - c)))) {
                        continue;
                    }
                    const int rr = row0 + r;
                    const int cc = col + c;
                    if (rr >= 0 && rr < frame.height && cc >= 0 &&
                        cc < frame.width) {
                        frame.set(rr, cc, {255, 255, 255});
                    }
                }
            }
        }
        col += kGlyphWidth + kGlyphSpacing;
    }
}

}  // namespace detail

// Alpha-blend each object's mask onto the frames (alpha 0.5) and stamp its
// index label at the mask centroid whenever the mask is large enough to hold
// the glyphs.
inline std::vector<RgbImage> render_overlay(
    const std::vector<RgbImage>& frames,
    const std::map<int, MaskTrack>& tracks, OverlayMode mode) {
    if (!mode.all_objects && !tracks.count(mode.single_index)) {
        throw UnknownIndex(mode.single_index);
    }
    std::vector<RgbImage> out;
    out.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        RgbImage frame = frames[f];
        for (const auto& [label, track] : tracks) {
            if (!mode.all_objects && label != mode.single_index) continue;
            if (track.height != frame.height || track.width != frame.width) {
                throw ResolutionMismatch(track.height, track.width,
                                         frame.height, frame.width);
            }
            if (!track.has_frame(static_cast<int>(f))) continue;
            const BinaryMask mask = track.mask_at(static_cast<int>(f));
            const Rgb color = overlay_color(label);
            std::int64_t area = 0;
            std::int64_t row_sum = 0;
            std::int64_t col_sum = 0;
            for (int r = 0; r < mask.height; ++r) {
                for (int c = 0; c < mask.width; ++c) {
                    if (!mask.at(r, c)) continue;
                    const Rgb px = frame.at(r, c);
                    frame.set(r, c,
                              {static_cast<std::uint8_t>((px.r + color.r) / 2),
                               static_cast<std::uint8_t>((px.g + color.g) / 2),
                               static_cast<std::uint8_t>((px.b + color.b) /
                                                         2)});
                    ++area;
                    row_sum += r;
                    col_sum += c;
                }
            }
            if (area == 0) continue;
            const std::string text = std::to_string(label);
            const std::int64_t glyph_area =
                static_cast<std::int64_t>(detail::label_text_width(text)) *
                detail::kGlyphHeight;
            if (area >= glyph_area && glyph_area > 0) {
                detail::draw_label(frame, text,
                                   static_cast<int>(row_sum / area),
                                   static_cast<int>(col_sum / area));
            }
        }
        out.push_back(std::move(frame));
    }
    return out;
}

// Evenly spaced frame indices used when attaching video evidence to a
// vision request.
inline std::vector<std::size_t> subsample_indices(std::size_t frame_count,
                                                  std::size_t max_frames) {
    std::vector<std::size_t> indices;
    if (frame_count == 0 || max_frames == 0) return indices;
    if (frame_count <= max_frames) {
        for (std::size_t i = 0; i < frame_count; ++i) indices.push_back(i);
        return indices;
    }
    if (max_frames == 1) return {0};
    for (std::size_t j = 0; j < max_frames; ++j) {
        indices.push_back(j * (frame_count - 1) / (max_frames - 1));
    }
    return indices;
}

}  // namespace ivos
