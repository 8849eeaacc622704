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

#include <filesystem>

#include "helpers.hpp"
#include "ivos/dataset.hpp"

namespace ivos {
namespace {

namespace fs = std::filesystem;

using testing::make_synthetic_dataset;
using testing::make_video_b;
using testing::rect_mask;

fs::path temp_dir() {
    const fs::path dir =
        fs::temp_directory_path() /
        ("ivos_dataset_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

const char* kMinimalMeta = R"({
  "videos": {
    "v1": {
      "frame_count": 1,
      "height": 2,
      "width": 2,
      "frames": ["00000.jpg"],
      "objects": {
        "o1": {
          "index_label": 0,
          "category": "cat",
          "appearance": "a small cat",
          "motion": "sitting still",
          "track": {"0": {"size": [2, 2], "counts": [0, 4]}}
        }
      },
      "expressions": {
        "e1": {
          "exp": "the small cat",
          "type": "single_appearance",
          "obj_ids": ["o1"],
          "interaction": null
        }
      }
    }
  }
})";

TEST(MetaIo, MinimalFileLoads) {
    const fs::path path = temp_dir() / "minimal.json";
    write_file_atomic(path, kMinimalMeta);
    const DatasetMeta meta = load_meta(path);
    ASSERT_EQ(meta.videos.size(), 1u);
    const VideoMeta& v = meta.videos.at("v1");
    EXPECT_EQ(v.frame_count, 1);
    EXPECT_EQ(v.objects.at("o1").track.mask_at(0).area(), 4);
    EXPECT_EQ(v.expressions.at("e1").type, ExpressionType::SingleAppearance);
}

TEST(MetaIo, DanglingPairIdRejected) {
    DatasetMeta meta;
    meta.videos["vid_b"] = make_video_b();
    meta.videos.at("vid_b")
        .expressions.at("b_e0")
        .interaction->pair_id = "nope";
    const fs::path path = temp_dir() / "dangling.json";
    save_meta(meta, path);
    EXPECT_THROW(load_meta(path), SchemaViolation);
    const auto violations = validate_meta(meta);
    ASSERT_TRUE(has_errors(violations));
    bool found = false;
    for (const auto& v : violations) {
        if (v.rule == "pair_id unresolved") found = true;
    }
    EXPECT_TRUE(found);
}

TEST(MetaIo, ParseErrorCarriesLocation) {
    const fs::path path = temp_dir() / "broken.json";
    write_file_atomic(path, "{\"videos\": {");
    try {
        load_meta(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("broken.json"),
                  std::string::npos);
    }
}

TEST(MetaIo, LosslessRoundtripAndCanonicalBytes) {
    const DatasetMeta meta = make_synthetic_dataset();
    const fs::path path = temp_dir() / "roundtrip.json";
    save_meta(meta, path);
    const DatasetMeta reloaded = load_meta(path);
    EXPECT_EQ(reloaded, meta);

    const std::string first = read_file(path);
    save_meta(reloaded, path);
    EXPECT_EQ(read_file(path), first);
}

TEST(MetaIo, MatchesGoldenFile) {
    const fs::path golden = fs::path(IVOS_TEST_DATA_DIR) / "golden_meta.json";
    const std::string expected = read_file(golden);
    EXPECT_EQ(meta_to_canonical_string(make_synthetic_dataset()), expected);
    const DatasetMeta reloaded = load_meta(golden);
    EXPECT_EQ(reloaded, make_synthetic_dataset());
}

TEST(Validate, CleanFixtureHasNoViolations) {
    EXPECT_TRUE(validate_meta(make_synthetic_dataset()).empty());
}

TEST(Validate, OverlappingUniRoles) {
    DatasetMeta meta;
    meta.videos["vid_b"] = make_video_b();
    auto& info = *meta.videos.at("vid_b").expressions.at("b_e0").interaction;
    info.target_ids.insert("b0");  // now overlaps actor set
    const auto violations = validate_meta(meta);
    bool found = false;
    for (const auto& v : violations) {
        if (v.rule == "uni roles disjoint") found = true;
    }
    EXPECT_TRUE(found);
}

TEST(Validate, PairRoleSwapMutationCaught) {
    DatasetMeta meta;
    meta.videos["vid_b"] = make_video_b();
    auto& rev = *meta.videos.at("vid_b").expressions.at("b_e1").interaction;
    // Mutate the reversed expression so its roles no longer swap.
    rev.actor_ids = {"b0"};
    rev.target_ids = {"b1"};
    const auto violations = validate_meta(meta);
    bool found = false;
    for (const auto& v : violations) {
        if (v.rule == "pair role swap") found = true;
    }
    EXPECT_TRUE(found);
}

TEST(Validate, DuplicateIndexLabel) {
    DatasetMeta meta;
    meta.videos["vid_b"] = make_video_b();
    meta.videos.at("vid_b").objects.at("b1").index_label = 0;
    const auto violations = validate_meta(meta);
    bool found = false;
    for (const auto& v : violations) {
        if (v.rule == "index_label unique") found = true;
    }
    EXPECT_TRUE(found);
}

TEST(Validate, PairInvolutionHoldsOnFixture) {
    const DatasetMeta meta = make_synthetic_dataset();
    for (const auto& [vid, video] : meta.videos) {
        for (const auto& [eid, expr] : video.expressions) {
            if (!expr.interaction || !expr.interaction->pair_id) continue;
            const Expression& peer =
                video.expressions.at(*expr.interaction->pair_id);
            ASSERT_TRUE(peer.interaction);
            EXPECT_EQ(peer.interaction->actor_ids,
                      expr.interaction->target_ids);
            EXPECT_EQ(peer.interaction->target_ids,
                      expr.interaction->actor_ids);
            EXPECT_EQ(*peer.interaction->pair_id, eid);
        }
    }
}

TEST(MergedTrack, SingleObjectPassesThrough) {
    const DatasetMeta meta = make_synthetic_dataset();
    const MaskTrack track = merged_gt_track(meta, "a_e0");
    EXPECT_EQ(track, meta.videos.at("vid_a").objects.at("a0").track);
}

TEST(MergedTrack, DisjointUnionAndAbsentFrames) {
    const DatasetMeta meta = make_synthetic_dataset();
    const MaskTrack track = merged_gt_track(meta, "a_e1");
    // Frame 0 holds both squares, frame 1 only object a0.
    EXPECT_EQ(track.mask_at(0).area(), 8);
    EXPECT_EQ(track.mask_at(1).area(), 4);
}

TEST(MergedTrack, TwoOnePixelObjects) {
    VideoMeta v;
    v.video_id = "v";
    v.frame_count = 1;
    v.height = 3;
    v.width = 3;
    v.frame_names = {"f0"};
    v.objects["x"] = testing::make_object("x", 0, "a", 1, 3, 3,
                                          {{0, rect_mask(3, 3, 0, 0, 0, 0)}});
    v.objects["y"] = testing::make_object("y", 1, "b", 1, 3, 3,
                                          {{0, rect_mask(3, 3, 2, 2, 2, 2)}});
    Expression e;
    e.expression_id = "e";
    e.text = "both";
    e.type = ExpressionType::MultiInstance;
    e.object_ids = {"x", "y"};
    v.expressions["e"] = e;
    DatasetMeta meta;
    meta.videos["v"] = v;
    EXPECT_EQ(merged_gt_track(meta, "e").mask_at(0).area(), 2);
    EXPECT_THROW(merged_gt_track(meta, "missing"), UnknownExpression);
}

TEST(MergedTrack, FoldOrderIndependence) {
    const DatasetMeta meta = make_synthetic_dataset();
    const VideoMeta& video = meta.videos.at("vid_a");
    const MaskTrack ab = merged_track_for_ids(video, {"a0", "a1"});
    // Union the tracks by hand in the opposite order.
    BinaryMask manual(4, 4);
    manual = mask_union(video.objects.at("a1").track.mask_at(0),
                        video.objects.at("a0").track.mask_at(0));
    EXPECT_EQ(ab.mask_at(0), manual);
}

TEST(MergedTrack, InteractionMergesBothRoles) {
    const DatasetMeta meta = make_synthetic_dataset();
    const MaskTrack track = merged_gt_track(meta, "b_e0");
    EXPECT_EQ(track.mask_at(0).area(), 9 + 16);
}

}  // namespace
}  // namespace ivos
