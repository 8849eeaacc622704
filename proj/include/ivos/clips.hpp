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
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivos/errors.hpp"

namespace ivos {

struct ClipSpec {
    std::string source_id;
    std::int64_t start_frame = 0;
    std::int64_t length = 0;

    bool operator==(const ClipSpec&) const = default;
};

// Cut a long source into annotation-ready clips: split the frame range into
// non-overlapping bins, take the first and last bin, and keep each bin's
// leading frames. Short tail clips below min_len are dropped.
inline std::vector<ClipSpec> extract_clips(const std::string& source_id,
                                           std::int64_t source_frame_count,
                                           std::int64_t bin_size = 1000,
                                           std::int64_t clip_len = 500,
                                           std::int64_t min_len = 100) {
    if (bin_size < 1 || clip_len < 1 || min_len < 1) {
        throw std::invalid_argument("bin_size, clip_len, min_len must be >= 1");
    }
    std::vector<ClipSpec> clips;
    if (source_frame_count < 1) return clips;

    const std::int64_t bin_count =
        (source_frame_count + bin_size - 1) / bin_size;
    std::vector<std::int64_t> candidates{0};
    if (bin_count > 1) candidates.push_back(bin_count - 1);

    for (std::int64_t bin : candidates) {
        const std::int64_t start = bin * bin_size;
        const std::int64_t population =
            std::min(bin_size, source_frame_count - start);
        const std::int64_t length = std::min(clip_len, population);
        if (length < min_len) continue;
        clips.push_back({source_id, start, length});
    }
    return clips;
}

// Materialize a clip from an in-memory frame list, preserving order.
template <typename Frame>
std::vector<Frame> materialize_clip(const ClipSpec& spec,
                                    const std::vector<Frame>& frames) {
    if (spec.start_frame < 0 || spec.length < 1 ||
        spec.start_frame + spec.length >
            static_cast<std::int64_t>(frames.size())) {
        throw FrameReadError(spec.start_frame + spec.length - 1,
                             "clip exceeds source of " +
                                 std::to_string(frames.size()) + " frames");
    }
    return std::vector<Frame>(
        frames.begin() + static_cast<std::ptrdiff_t>(spec.start_frame),
        frames.begin() +
            static_cast<std::ptrdiff_t>(spec.start_frame + spec.length));
}

// Materialize through a frame reader callback; the reader reports failures
// by throwing, which is wrapped with the offending frame index.
template <typename Frame>
std::vector<Frame> materialize_clip(
    const ClipSpec& spec, std::int64_t source_frame_count,
    const std::function<Frame(std::int64_t)>& read_frame) {
    if (spec.start_frame < 0 || spec.length < 1 ||
        spec.start_frame + spec.length > source_frame_count) {
        throw FrameReadError(spec.start_frame + spec.length - 1,
                             "clip exceeds source of " +
                                 std::to_string(source_frame_count) +
                                 " frames");
    }
    std::vector<Frame> out;
    out.reserve(static_cast<std::size_t>(spec.length));
    for (std::int64_t i = 0; i < spec.length; ++i) {
        const std::int64_t frame = spec.start_frame + i;
        try {
            out.push_back(read_frame(frame));
        } catch (const FrameReadError&) {
            throw;
        } catch (const std::exception& e) {
            throw FrameReadError(frame, e.what());
        }
    }
    return out;
}

inline nlohmann::json clip_to_json(const ClipSpec& spec) {
    return nlohmann::json{{"source_id", spec.source_id},
                          {"start_frame", spec.start_frame},
                          {"length", spec.length}};
}

inline ClipSpec clip_from_json(const nlohmann::json& j) {
    try {
        return ClipSpec{j.at("source_id").get<std::string>(),
                        j.at("start_frame").get<std::int64_t>(),
                        j.at("length").get<std::int64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad clip record: ") + e.what());
    }
}

}  // namespace ivos
