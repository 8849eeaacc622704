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

#include <numeric>

#include "ivos/clips.hpp"
#include "ivos/util.hpp"

namespace ivos {
namespace {

TEST(ExtractClips, TwoAndAHalfThousandFrames) {
    const auto clips = extract_clips("src", 2500);
    ASSERT_EQ(clips.size(), 2u);
    EXPECT_EQ(clips[0], (ClipSpec{"src", 0, 500}));
    EXPECT_EQ(clips[1], (ClipSpec{"src", 2000, 500}));
}

TEST(ExtractClips, SingleBinYieldsSingleClip) {
    const auto clips = extract_clips("src", 1000);
    ASSERT_EQ(clips.size(), 1u);
    EXPECT_EQ(clips[0], (ClipSpec{"src", 0, 500}));
}

TEST(ExtractClips, ShortTailDroppedByMinLen) {
    const auto kept = extract_clips("src", 1200, 1000, 500, 100);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0], (ClipSpec{"src", 0, 500}));
    EXPECT_EQ(kept[1], (ClipSpec{"src", 1000, 200}));

    const auto dropped = extract_clips("src", 1200, 1000, 500, 300);
    ASSERT_EQ(dropped.size(), 1u);
    EXPECT_EQ(dropped[0], (ClipSpec{"src", 0, 500}));
}

TEST(ExtractClips, FuzzInvariants) {
    Rng rng(77u);
    for (int i = 0; i < 2000; ++i) {
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.bounded(10000));
        const auto clips = extract_clips("s", n);
        const auto again = extract_clips("s", n);
        ASSERT_EQ(clips, again) << "must be deterministic";
        ASSERT_LE(clips.size(), 2u);
        for (const auto& c : clips) {
            ASSERT_GE(c.length, 100);
            ASSERT_LE(c.length, 500);
            ASSERT_GE(c.start_frame, 0);
            ASSERT_LE(c.start_frame + c.length, n);
        }
        if (clips.size() == 2) {
            ASSERT_LE(clips[0].start_frame + clips[0].length,
                      clips[1].start_frame)
                << "clips must not overlap";
        }
    }
}

TEST(MaterializeClip, VectorSource) {
    std::vector<int> frames(600);
    std::iota(frames.begin(), frames.end(), 0);
    const ClipSpec one{"s", 7, 1};
    EXPECT_EQ(materialize_clip(one, frames), std::vector<int>{7});

    std::vector<int> five_hundred(500);
    std::iota(five_hundred.begin(), five_hundred.end(), 0);
    const ClipSpec whole{"s", 0, 500};
    EXPECT_EQ(materialize_clip(whole, five_hundred), five_hundred);

    const ClipSpec bad{"s", 300, 400};
    EXPECT_THROW(materialize_clip(bad, five_hundred), FrameReadError);
}

TEST(MaterializeClip, ReaderCallback) {
    const ClipSpec spec{"s", 10, 5};
    std::function<int(std::int64_t)> reader = [](std::int64_t i) {
        return static_cast<int>(i * 2);
    };
    const auto frames = materialize_clip(spec, 100, reader);
    EXPECT_EQ(frames, (std::vector<int>{20, 22, 24, 26, 28}));

    std::function<int(std::int64_t)> failing = [](std::int64_t i) -> int {
        throw std::runtime_error("disk gone");
    };
    try {
        materialize_clip(spec, 100, failing);
        FAIL() << "expected FrameReadError";
    } catch (const FrameReadError& e) {
        EXPECT_NE(std::string(e.what()).find("frame 10"), std::string::npos);
    }
}

TEST(ClipJson, Roundtrip) {
    const ClipSpec spec{"video_7", 2000, 500};
    EXPECT_EQ(clip_from_json(clip_to_json(spec)), spec);
    EXPECT_THROW(clip_from_json(nlohmann::json{{"length", 3}}), ParseError);
}

}  // namespace
}  // namespace ivos
