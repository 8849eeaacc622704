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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ivos/dataset.hpp"
#include "ivos/llm.hpp"
#include "ivos/overlay.hpp"

namespace ivos {

// ---------------------------------------------------------------------------
// Stage outputs

struct Stage1Entry {
    std::string category;
    std::string appearance;
    std::string motion;

    bool operator==(const Stage1Entry&) const = default;
};

struct Stage1Output {
    std::map<int, Stage1Entry> objects;  // keyed by index label

    bool operator==(const Stage1Output&) const = default;
};

struct Stage2Entry {
    std::string appearance_only;
    std::string motion_only;
    std::string combined;

    bool operator==(const Stage2Entry&) const = default;
};

struct MergeGroup {
    std::set<int> object_indices;
    std::string expression;

    bool operator==(const MergeGroup&) const = default;
};

struct Stage2Output {
    std::map<int, Stage2Entry> objects;
    std::vector<MergeGroup> merge_groups;

    bool operator==(const Stage2Output&) const = default;
};

struct InteractionRecord {
    InteractionDirection direction = InteractionDirection::Unidirectional;
    std::set<int> actor_indices;
    std::set<int> target_indices;
    std::string forward_caption;
    std::optional<std::string> reversed_caption;

    bool operator==(const InteractionRecord&) const = default;
};

struct Stage3Output {
    std::vector<InteractionRecord> interactions;

    bool operator==(const Stage3Output&) const = default;
};

struct Stage4Caption {
    int interaction_index = 0;
    bool reversed = false;
    std::string class_level_text;
    std::string appearance_level_text;
    std::set<int> actor_indices;
    std::set<int> target_indices;
    bool fallback = false;

    bool operator==(const Stage4Caption&) const = default;
};

struct Stage4Output {
    std::vector<Stage4Caption> captions;

    bool operator==(const Stage4Output&) const = default;
};

struct PipelineConfig {
    int overlay_frame_count = 8;
};

// ---------------------------------------------------------------------------
// Pure text operations

// Swap actor/target roles and exchange the forward/reversed captions.
inline InteractionRecord reverse_roles(const InteractionRecord& record) {
    if (record.direction != InteractionDirection::Unidirectional) {
        throw NotUnidirectional();
    }
    InteractionRecord out = record;
    std::swap(out.actor_indices, out.target_indices);
    if (record.reversed_caption) {
        out.forward_caption = *record.reversed_caption;
        out.reversed_caption = record.forward_caption;
    }
    return out;
}

// Replace every bracketed index token "[k]" with its bound description.
inline std::string substitute_indices(
    const std::string& text, const std::map<int, std::string>& bindings) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('[', pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        const std::size_t close = text.find(']', open + 1);
        const std::string inner =
            close == std::string::npos
                ? ""
                : text.substr(open + 1, close - open - 1);
        const bool digits =
            !inner.empty() &&
            inner.find_first_not_of("0123456789") == std::string::npos;
        if (!digits) {
            out.append(text, pos, open - pos + 1);
            pos = open + 1;
            continue;
        }
        const int index = std::stoi(inner);
        auto it = bindings.find(index);
        if (it == bindings.end()) throw MissingBinding(inner);
        out.append(text, pos, open - pos);
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

inline bool has_residual_index_token(const std::string& text) {
    std::size_t pos = 0;
    while ((pos = text.find('[', pos)) != std::string::npos) {
        const std::size_t close = text.find(']', pos + 1);
        if (close == std::string::npos) return false;
        const std::string inner = text.substr(pos + 1, close - pos - 1);
        if (!inner.empty() &&
            inner.find_first_not_of("0123456789") == std::string::npos) {
            return true;
        }
        pos = pos + 1;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Reply parsers

namespace detail {

inline std::optional<std::string> reply_field(const std::string& text,
                                              const std::string& key) {
    for (const auto& raw : split_lines(text)) {
        const std::string line = trim(raw);
        if (line.rfind(key + ":", 0) == 0) {
            const std::string value = trim(line.substr(key.size() + 1));
            if (!value.empty()) return value;
        }
    }
    return std::nullopt;
}

inline std::optional<std::set<int>> parse_index_list(
    const std::string& text) {
    std::set<int> out;
    std::string current;
    for (char ch : text + ",") {
        if (ch == ',' || ch == ' ') {
            if (!current.empty()) {
                if (current.find_first_not_of("0123456789") !=
                    std::string::npos) {
                    return std::nullopt;
                }
                out.insert(std::stoi(current));
                current.clear();
            }
        } else {
            current.push_back(ch);
        }
    }
    if (out.empty()) return std::nullopt;
    return out;
}

inline std::optional<Stage1Entry> parse_stage1_reply(
    const std::string& text) {
    const auto category = reply_field(text, "CATEGORY");
    const auto appearance = reply_field(text, "APPEARANCE");
    const auto motion = reply_field(text, "MOTION");
    if (!category || !appearance || !motion) return std::nullopt;
    return Stage1Entry{*category, *appearance, *motion};
}

inline std::optional<Stage2Entry> parse_stage2_single_reply(
    const std::string& text) {
    const auto appearance = reply_field(text, "APPEARANCE_ONLY");
    const auto motion = reply_field(text, "MOTION_ONLY");
    const auto combined = reply_field(text, "COMBINED");
    if (!appearance || !motion || !combined) return std::nullopt;
    return Stage2Entry{*appearance, *motion, *combined};
}

inline std::optional<std::vector<MergeGroup>> parse_stage2_merge_reply(
    const std::string& text, const std::set<int>& valid_indices) {
    const auto decision = reply_field(text, "MERGE");
    if (!decision) return std::nullopt;
    const std::string lowered = lowercase(*decision);
    if (lowered == "no") return std::vector<MergeGroup>{};
    if (lowered != "yes") return std::nullopt;

    std::vector<MergeGroup> groups;
    std::set<int> used;
    for (const auto& raw : split_lines(text)) {
        const std::string line = trim(raw);
        if (line.rfind("GROUP:", 0) != 0) continue;
        const std::string payload = trim(line.substr(6));
        const std::size_t bar = payload.find('|');
        if (bar == std::string::npos) return std::nullopt;
        const auto indices = parse_index_list(trim(payload.substr(0, bar)));
        const std::string expression = trim(payload.substr(bar + 1));
        if (!indices || indices->size() < 2 || expression.empty()) {
            return std::nullopt;
        }
        for (int index : *indices) {
            if (!valid_indices.count(index)) return std::nullopt;
            if (!used.insert(index).second) return std::nullopt;
        }
        groups.push_back({*indices, expression});
    }
    if (groups.empty()) return std::nullopt;
    return groups;
}

// Detection lines: "UNI actor=0 target=2" / "BI participants=0,1" / "NONE".
inline std::optional<std::vector<InteractionRecord>>
parse_stage3_detect_reply(const std::string& text,
                          const std::set<int>& valid_indices) {
    std::vector<InteractionRecord> records;
    bool saw_any_line = false;
    for (const auto& raw : split_lines(text)) {
        const std::string line = trim(raw);
        if (line.empty()) continue;
        saw_any_line = true;
        if (line == "NONE") {
            return std::vector<InteractionRecord>{};
        }
        auto parse_assignment =
            [&line](const std::string& key) -> std::optional<std::set<int>> {
            const std::size_t at = line.find(key + "=");
            if (at == std::string::npos) return std::nullopt;
            std::size_t end = line.find(' ', at);
            if (end == std::string::npos) end = line.size();
            return parse_index_list(
                line.substr(at + key.size() + 1, end - at - key.size() - 1));
        };
        if (line.rfind("UNI", 0) == 0) {
            const auto actors = parse_assignment("actor");
            const auto targets = parse_assignment("target");
            if (!actors || !targets) return std::nullopt;
            InteractionRecord record;
            record.direction = InteractionDirection::Unidirectional;
            record.actor_indices = *actors;
            record.target_indices = *targets;
            for (int i : record.actor_indices) {
                if (!valid_indices.count(i) ||
                    record.target_indices.count(i)) {
                    return std::nullopt;
                }
            }
            for (int i : record.target_indices) {
                if (!valid_indices.count(i)) return std::nullopt;
            }
            records.push_back(std::move(record));
        } else if (line.rfind("BI", 0) == 0) {
            const auto participants = parse_assignment("participants");
            if (!participants || participants->size() < 2) {
                return std::nullopt;
            }
            for (int i : *participants) {
                if (!valid_indices.count(i)) return std::nullopt;
            }
            InteractionRecord record;
            record.direction = InteractionDirection::Bidirectional;
            record.actor_indices = *participants;
            records.push_back(std::move(record));
        } else {
            return std::nullopt;
        }
    }
    if (!saw_any_line) return std::nullopt;
    return records;
}

struct Stage4Reply {
    std::string expression;
    std::set<int> actor_indices;
    std::set<int> target_indices;
};

inline std::optional<Stage4Reply> parse_stage4_reply(
    const std::string& text, bool unidirectional,
    const std::set<int>& valid_indices) {
    const auto expression = reply_field(text, "EXPRESSION");
    if (!expression || has_residual_index_token(*expression)) {
        return std::nullopt;
    }
    Stage4Reply reply;
    reply.expression = *expression;
    if (unidirectional) {
        const auto actor = reply_field(text, "ACTOR");
        const auto target = reply_field(text, "TARGET");
        if (!actor || !target) return std::nullopt;
        const auto actors = parse_index_list(*actor);
        const auto targets = parse_index_list(*target);
        if (!actors || !targets) return std::nullopt;
        for (int i : *actors) {
            if (!valid_indices.count(i) || targets->count(i)) {
                return std::nullopt;
            }
        }
        for (int i : *targets) {
            if (!valid_indices.count(i)) return std::nullopt;
        }
        reply.actor_indices = *actors;
        reply.target_indices = *targets;
    }
    return reply;
}

inline constexpr const char* kFormatReminder =
    "REMINDER: the previous reply did not follow the required response "
    "format. Reply again following the response format exactly, with no "
    "extra commentary.";

// One reprompt with a format reminder is allowed before giving up.
template <typename Parser>
auto complete_parsed(LlmClient& client, const LlmRequest& request,
                     Parser&& parse, const std::string& context) {
    const LlmResponse first = client.complete(request);
    if (auto parsed = parse(first.text)) return *parsed;
    LlmRequest reminder = request;
    reminder.user_prompt += std::string("\n\n") + kFormatReminder;
    const LlmResponse second = client.complete(reminder);
    if (auto parsed = parse(second.text)) return *parsed;
    throw ParseFailure(context, second.text);
}

inline std::string join_indices(const std::set<int>& indices) {
    std::string out;
    for (int i : indices) {
        if (!out.empty()) out += ", ";
        out += std::to_string(i);
    }
    return out;
}

inline std::vector<std::string> encode_overlay_frames(
    const std::vector<RgbImage>& frames,
    const std::map<int, MaskTrack>& tracks, OverlayMode mode,
    int max_frames) {
    const auto indices = subsample_indices(
        frames.size(), static_cast<std::size_t>(std::max(1, max_frames)));
    std::vector<RgbImage> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(frames[i]);
    // Track frame indices follow the original video, so overlay per frame.
    std::vector<std::string> encoded;
    encoded.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        std::vector<RgbImage> one{frames[indices[k]]};
        std::map<int, MaskTrack> shifted;
        for (const auto& [label, track] : tracks) {
            MaskTrack t;
            t.frame_count = 1;
            t.height = track.height;
            t.width = track.width;
            auto it = track.masks.find(static_cast<int>(indices[k]));
            if (it != track.masks.end()) t.masks[0] = it->second;
            shifted[label] = std::move(t);
        }
        const auto rendered = render_overlay(one, shifted, mode);
        encoded.push_back(encode_png_rgb(rendered[0]));
    }
    return encoded;
}

inline std::map<int, MaskTrack> tracks_by_label(const VideoMeta& video) {
    std::map<int, MaskTrack> tracks;
    for (const auto& [oid, obj] : video.objects) {
        tracks[obj.index_label] = obj.track;
    }
    return tracks;
}

inline std::set<int> label_set(const VideoMeta& video) {
    std::set<int> labels;
    for (const auto& [oid, obj] : video.objects) {
        labels.insert(obj.index_label);
    }
    return labels;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage runners

inline constexpr const char* kAnnotatorSystemPrompt =
    "You are a precise video annotation assistant. Follow the requested "
    "response format exactly.";

// Object-centric captions from single-object overlays.
inline Stage1Output run_stage1(const VideoMeta& video,
                               const std::vector<RgbImage>& frames,
                               LlmClient& client, const PromptLibrary& prompts,
                               const PipelineConfig& config = {}) {
    Stage1Output out;
    if (video.objects.empty()) return out;
    const auto tracks = detail::tracks_by_label(video);
    for (const auto& [label, track] : tracks) {
        LlmRequest request;
        request.kind = RequestKind::VisionChat;
        request.system_prompt = kAnnotatorSystemPrompt;
        request.user_prompt = prompts.render(
            "stage1_object_caption",
            {{"object_index", std::to_string(label)}});
        request.images = detail::encode_overlay_frames(
            frames, tracks, OverlayMode::single(label),
            config.overlay_frame_count);
        out.objects[label] = detail::complete_parsed(
            client, request, detail::parse_stage1_reply,
            "stage1 object " + std::to_string(label));
    }
    return out;
}

// Referring expressions per object plus motion-similarity merge groups.
inline Stage2Output run_stage2(const Stage1Output& stage1, LlmClient& client,
                               const PromptLibrary& prompts) {
    Stage2Output out;
    for (const auto& [label, entry] : stage1.objects) {
        LlmRequest request;
        request.kind = RequestKind::TextChat;
        request.system_prompt = kAnnotatorSystemPrompt;
        request.user_prompt = prompts.render(
            "stage2_single_expressions",
            {{"object_index", std::to_string(label)},
             {"category", entry.category},
             {"appearance", entry.appearance},
             {"motion", entry.motion}});
        out.objects[label] = detail::complete_parsed(
            client, request, detail::parse_stage2_single_reply,
            "stage2 object " + std::to_string(label));
    }
    if (stage1.objects.size() < 2) return out;

    std::set<int> valid;
    std::string motion_lines;
    for (const auto& [label, entry] : stage1.objects) {
        valid.insert(label);
        motion_lines +=
            std::to_string(label) + ": " + entry.motion + "\n";
    }
    LlmRequest request;
    request.kind = RequestKind::TextChat;
    request.system_prompt = kAnnotatorSystemPrompt;
    request.user_prompt =
        prompts.render("stage2_merge_decision",
                       {{"object_count",
                         std::to_string(stage1.objects.size())},
                        {"motion_lines", motion_lines}});
    out.merge_groups = detail::complete_parsed(
        client, request,
        [&valid](const std::string& text) {
            return detail::parse_stage2_merge_reply(text, valid);
        },
        "stage2 merge decision");
    return out;
}

// Interaction discovery over the all-objects overlay: a detection pass then
// one description pass per detected interaction.
inline Stage3Output run_stage3(const VideoMeta& video,
                               const std::vector<RgbImage>& frames,
                               LlmClient& client, const PromptLibrary& prompts,
                               const PipelineConfig& config = {}) {
    Stage3Output out;
    if (video.objects.size() < 2) return out;
    const auto tracks = detail::tracks_by_label(video);
    const auto valid = detail::label_set(video);
    const auto images = detail::encode_overlay_frames(
        frames, tracks, OverlayMode::all(), config.overlay_frame_count);

    std::string index_list;
    for (int label : valid) {
        if (!index_list.empty()) index_list += ", ";
        index_list += "[" + std::to_string(label) + "]";
    }

    LlmRequest detect;
    detect.kind = RequestKind::VisionChat;
    detect.system_prompt = kAnnotatorSystemPrompt;
    detect.user_prompt = prompts.render("stage3_interaction_detect",
                                        {{"object_indices", index_list}});
    detect.images = images;
    std::vector<InteractionRecord> detected = detail::complete_parsed(
        client, detect,
        [&valid](const std::string& text) {
            return detail::parse_stage3_detect_reply(text, valid);
        },
        "stage3 detection");

    for (std::size_t i = 0; i < detected.size(); ++i) {
        InteractionRecord& record = detected[i];
        const bool uni =
            record.direction == InteractionDirection::Unidirectional;
        std::string roles_block;
        if (uni) {
            roles_block =
                "direction: uni\nactor indices: " +
                detail::join_indices(record.actor_indices) +
                "\ntarget indices: " +
                detail::join_indices(record.target_indices);
        } else {
            roles_block = "direction: bi\nparticipants: " +
                          detail::join_indices(record.actor_indices);
        }
        LlmRequest describe;
        describe.kind = RequestKind::VisionChat;
        describe.system_prompt = kAnnotatorSystemPrompt;
        describe.user_prompt = prompts.render("stage3_interaction_describe",
                                              {{"roles_block", roles_block}});
        describe.images = images;
        if (uni) {
            const auto captions = detail::complete_parsed(
                client, describe,
                [](const std::string& text)
                    -> std::optional<std::pair<std::string, std::string>> {
                    const auto forward =
                        detail::reply_field(text, "FORWARD");
                    const auto reversed =
                        detail::reply_field(text, "REVERSED");
                    if (!forward || !reversed) return std::nullopt;
                    return std::make_pair(*forward, *reversed);
                },
                "stage3 description " + std::to_string(i));
            record.forward_caption = captions.first;
            record.reversed_caption = captions.second;
        } else {
            record.forward_caption = detail::complete_parsed(
                client, describe,
                [](const std::string& text) {
                    return detail::reply_field(text, "CAPTION");
                },
                "stage3 description " + std::to_string(i));
        }
        out.interactions.push_back(std::move(record));
    }
    return out;
}

// Enrich index-based interaction captions at class and appearance level.
// After the allowed reprompt fails, the deterministic substitution keeps the
// pipeline total and flags the caption as a fallback.
inline Stage4Output run_stage4(const Stage1Output& stage1,
                               const Stage2Output& stage2,
                               const Stage3Output& stage3, LlmClient& client,
                               const PromptLibrary& prompts) {
    Stage4Output out;
    std::set<int> valid;
    std::map<int, std::string> class_map;
    std::map<int, std::string> appearance_map;
    for (const auto& [label, entry] : stage1.objects) {
        valid.insert(label);
        class_map[label] = entry.category;
    }
    for (const auto& [label, entry] : stage2.objects) {
        appearance_map[label] = entry.appearance_only;
    }

    auto enrich = [&](const std::string& caption, bool uni,
                      const std::set<int>& actors,
                      const std::set<int>& targets,
                      const std::map<int, std::string>& descriptions,
                      bool& used_fallback) -> detail::Stage4Reply {
        std::string bindings_block;
        for (const auto& [index, description] : descriptions) {
            bindings_block += "[" + std::to_string(index) + "] = " +
                              description + "\n";
        }
        std::map<std::string, std::string> bindings{
            {"caption", caption}, {"bindings_block", bindings_block}};
        if (uni) {
            bindings["actor_indices"] = detail::join_indices(actors);
            bindings["target_indices"] = detail::join_indices(targets);
        }
        LlmRequest request;
        request.kind = RequestKind::TextChat;
        request.system_prompt = kAnnotatorSystemPrompt;
        request.user_prompt = prompts.render(
            uni ? "stage4_unidirectional" : "stage4_bidirectional", bindings);
        try {
            return detail::complete_parsed(
                client, request,
                [uni, &valid](const std::string& text) {
                    return detail::parse_stage4_reply(text, uni, valid);
                },
                "stage4 caption");
        } catch (const ParseFailure&) {
            used_fallback = true;
            detail::Stage4Reply reply;
            reply.expression = substitute_indices(caption, descriptions);
            reply.actor_indices = actors;
            reply.target_indices = targets;
            return reply;
        }
    };

    for (std::size_t i = 0; i < stage3.interactions.size(); ++i) {
        const InteractionRecord& record = stage3.interactions[i];
        const bool uni =
            record.direction == InteractionDirection::Unidirectional;
        std::vector<std::pair<bool, std::string>> captions;
        captions.emplace_back(false, record.forward_caption);
        if (uni && record.reversed_caption) {
            captions.emplace_back(true, *record.reversed_caption);
        }
        for (const auto& [reversed, caption] : captions) {
            Stage4Caption result;
            result.interaction_index = static_cast<int>(i);
            result.reversed = reversed;
            const std::set<int>& actors =
                reversed ? record.target_indices : record.actor_indices;
            const std::set<int>& targets =
                reversed ? record.actor_indices : record.target_indices;
            bool fallback = false;
            const detail::Stage4Reply class_reply =
                enrich(caption, uni, actors, targets, class_map, fallback);
            const detail::Stage4Reply appearance_reply = enrich(
                caption, uni, actors, targets, appearance_map, fallback);
            result.class_level_text = class_reply.expression;
            result.appearance_level_text = appearance_reply.expression;
            if (uni) {
                result.actor_indices = class_reply.actor_indices;
                result.target_indices = class_reply.target_indices;
            } else {
                result.actor_indices = record.actor_indices;
            }
            result.fallback = fallback;
            out.captions.push_back(std::move(result));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly

// Builds the final per-video annotation from the four stage outputs. The
// result always passes validation; any inconsistency surfaces as a
// SchemaViolation naming the offending stage.
inline VideoMeta assemble_dataset(const VideoMeta& video,
                                  const Stage1Output& stage1,
                                  const Stage2Output& stage2,
                                  const Stage3Output& stage3,
                                  const Stage4Output& stage4) {
    VideoMeta out = video;
    out.expressions.clear();

    std::map<int, std::string> oid_by_label;
    for (const auto& [oid, obj] : out.objects) {
        oid_by_label[obj.index_label] = oid;
    }
    auto oid_for = [&oid_by_label](int label,
                                   const char* stage) -> const std::string& {
        auto it = oid_by_label.find(label);
        if (it == oid_by_label.end()) {
            throw SchemaViolation(std::string(stage) +
                                  " references unknown object index " +
                                  std::to_string(label));
        }
        return it->second;
    };

    for (auto& [oid, obj] : out.objects) {
        auto it = stage1.objects.find(obj.index_label);
        if (it == stage1.objects.end()) {
            throw SchemaViolation("stage1 output misses object index " +
                                  std::to_string(obj.index_label));
        }
        obj.category = it->second.category;
        obj.appearance = it->second.appearance;
        obj.motion = it->second.motion;
    }

    int counter = 0;
    auto next_id = [&counter, &out]() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "_e%04d", counter++);
        return out.video_id + buf;
    };

    // Single-object expressions, ordered by index label.
    std::map<int, std::string> label_order;
    for (const auto& [label, oid] : oid_by_label) label_order[label] = oid;
    for (const auto& [label, oid] : label_order) {
        auto it = stage2.objects.find(label);
        if (it == stage2.objects.end()) {
            throw SchemaViolation("stage2 output misses object index " +
                                  std::to_string(label));
        }
        const Stage2Entry& entry = it->second;
        const std::array<std::pair<ExpressionType, const std::string*>, 3>
            variants{{
                {ExpressionType::SingleAppearanceMotion, &entry.combined},
                {ExpressionType::SingleAppearance, &entry.appearance_only},
                {ExpressionType::SingleMotion, &entry.motion_only},
            }};
        for (const auto& [type, text] : variants) {
            Expression expr;
            expr.expression_id = next_id();
            expr.text = *text;
            expr.type = type;
            expr.object_ids = {oid};
            out.expressions.emplace(expr.expression_id, std::move(expr));
        }
    }

    // Multi-instance expressions from merge groups.
    for (const MergeGroup& group : stage2.merge_groups) {
        Expression expr;
        expr.expression_id = next_id();
        expr.text = group.expression;
        expr.type = ExpressionType::MultiInstance;
        for (int label : group.object_indices) {
            expr.object_ids.insert(oid_for(label, "stage2"));
        }
        out.expressions.emplace(expr.expression_id, std::move(expr));
    }

    // Interaction expressions: for every unidirectional caption pair, two
    // linked expressions per enrichment level; bidirectional captions yield
    // one expression per level.
    for (std::size_t i = 0; i < stage3.interactions.size(); ++i) {
        const InteractionRecord& record = stage3.interactions[i];
        const bool uni =
            record.direction == InteractionDirection::Unidirectional;
        const Stage4Caption* forward = nullptr;
        const Stage4Caption* reversed = nullptr;
        for (const Stage4Caption& caption : stage4.captions) {
            if (caption.interaction_index != static_cast<int>(i)) continue;
            (caption.reversed ? reversed : forward) = &caption;
        }
        if (!forward || (uni && !reversed)) {
            throw SchemaViolation(
                "stage4 output misses captions for interaction " +
                std::to_string(i));
        }
        auto to_oids = [&](const std::set<int>& labels) {
            std::set<std::string> oids;
            for (int label : labels) {
                oids.insert(oid_for(label, "stage4"));
            }
            return oids;
        };
        for (InteractionLevel level : {InteractionLevel::ClassLevel,
                                       InteractionLevel::AppearanceLevel}) {
            auto text_of = [&](const Stage4Caption& caption) {
                return level == InteractionLevel::ClassLevel
                           ? caption.class_level_text
                           : caption.appearance_level_text;
            };
            if (uni) {
                const std::string forward_id = next_id();
                const std::string reversed_id = next_id();
                Expression fwd;
                fwd.expression_id = forward_id;
                fwd.text = text_of(*forward);
                fwd.type = ExpressionType::Interaction;
                fwd.interaction = InteractionInfo{
                    InteractionDirection::Unidirectional,
                    to_oids(forward->actor_indices),
                    to_oids(forward->target_indices),
                    reversed_id,
                    level,
                };
                fwd.object_ids = fwd.interaction->actor_ids;
                fwd.object_ids.insert(fwd.interaction->target_ids.begin(),
                                      fwd.interaction->target_ids.end());
                Expression rev;
                rev.expression_id = reversed_id;
                rev.text = text_of(*reversed);
                rev.type = ExpressionType::Interaction;
                rev.interaction = InteractionInfo{
                    InteractionDirection::Unidirectional,
                    to_oids(reversed->actor_indices),
                    to_oids(reversed->target_indices),
                    forward_id,
                    level,
                };
                rev.object_ids = rev.interaction->actor_ids;
                rev.object_ids.insert(rev.interaction->target_ids.begin(),
                                      rev.interaction->target_ids.end());
                out.expressions.emplace(forward_id, std::move(fwd));
                out.expressions.emplace(reversed_id, std::move(rev));
            } else {
                Expression expr;
                expr.expression_id = next_id();
                expr.text = text_of(*forward);
                expr.type = ExpressionType::Interaction;
                expr.interaction = InteractionInfo{
                    InteractionDirection::Bidirectional,
                    to_oids(record.actor_indices),
                    {},
                    std::nullopt,
                    level,
                };
                expr.object_ids = expr.interaction->actor_ids;
                out.expressions.emplace(expr.expression_id, std::move(expr));
            }
        }
    }

    DatasetMeta check;
    check.videos.emplace(out.video_id, out);
    const auto violations = validate_meta(check);
    for (const auto& violation : violations) {
        if (violation.severity == Violation::Severity::Error) {
            throw SchemaViolation("assembled dataset for " + out.video_id +
                                  " violates \"" + violation.rule +
                                  "\": " + violation.message +
                                  " (check stage outputs)");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage file persistence

inline nlohmann::json stage1_to_json(const Stage1Output& s) {
    nlohmann::json objects = nlohmann::json::object();
    for (const auto& [label, e] : s.objects) {
        objects[std::to_string(label)] = {{"category", e.category},
                                          {"appearance", e.appearance},
                                          {"motion", e.motion}};
    }
    return nlohmann::json{{"objects", objects}};
}

inline Stage1Output stage1_from_json(const nlohmann::json& j) {
    Stage1Output s;
    try {
        for (const auto& [key, e] : j.at("objects").items()) {
            s.objects[std::stoi(key)] =
                Stage1Entry{e.at("category").get<std::string>(),
                            e.at("appearance").get<std::string>(),
                            e.at("motion").get<std::string>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad stage1 file: ") + e.what());
    }
    return s;
}

inline nlohmann::json stage2_to_json(const Stage2Output& s) {
    nlohmann::json objects = nlohmann::json::object();
    for (const auto& [label, e] : s.objects) {
        objects[std::to_string(label)] = {
            {"appearance_only", e.appearance_only},
            {"motion_only", e.motion_only},
            {"combined", e.combined}};
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : s.merge_groups) {
        groups.push_back(
            {{"object_indices",
              std::vector<int>(g.object_indices.begin(),
                               g.object_indices.end())},
             {"expression", g.expression}});
    }
    return nlohmann::json{{"objects", objects}, {"merge_groups", groups}};
}

inline Stage2Output stage2_from_json(const nlohmann::json& j) {
    Stage2Output s;
    try {
        for (const auto& [key, e] : j.at("objects").items()) {
            s.objects[std::stoi(key)] =
                Stage2Entry{e.at("appearance_only").get<std::string>(),
                            e.at("motion_only").get<std::string>(),
                            e.at("combined").get<std::string>()};
        }
        for (const auto& g : j.at("merge_groups")) {
            MergeGroup group;
            for (const auto& index : g.at("object_indices")) {
                group.object_indices.insert(index.get<int>());
            }
            group.expression = g.at("expression").get<std::string>();
            s.merge_groups.push_back(std::move(group));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad stage2 file: ") + e.what());
    }
    return s;
}

inline nlohmann::json stage3_to_json(const Stage3Output& s) {
    nlohmann::json interactions = nlohmann::json::array();
    for (const auto& r : s.interactions) {
        nlohmann::json record{
            {"direction",
             r.direction == InteractionDirection::Unidirectional ? "uni"
                                                                 : "bi"},
            {"actor_indices",
             std::vector<int>(r.actor_indices.begin(),
                              r.actor_indices.end())},
            {"target_indices",
             std::vector<int>(r.target_indices.begin(),
                              r.target_indices.end())},
            {"forward_caption", r.forward_caption},
        };
        record["reversed_caption"] =
            r.reversed_caption ? nlohmann::json(*r.reversed_caption)
                               : nlohmann::json(nullptr);
        interactions.push_back(record);
    }
    return nlohmann::json{{"interactions", interactions}};
}

inline Stage3Output stage3_from_json(const nlohmann::json& j) {
    Stage3Output s;
    try {
        for (const auto& r : j.at("interactions")) {
            InteractionRecord record;
            record.direction =
                r.at("direction").get<std::string>() == "uni"
                    ? InteractionDirection::Unidirectional
                    : InteractionDirection::Bidirectional;
            for (const auto& i : r.at("actor_indices")) {
                record.actor_indices.insert(i.get<int>());
            }
            for (const auto& i : r.at("target_indices")) {
                record.target_indices.insert(i.get<int>());
            }
            record.forward_caption =
                r.at("forward_caption").get<std::string>();
            if (!r.at("reversed_caption").is_null()) {
                record.reversed_caption =
                    r.at("reversed_caption").get<std::string>();
            }
            s.interactions.push_back(std::move(record));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad stage3 file: ") + e.what());
    }
    return s;
}

inline nlohmann::json stage4_to_json(const Stage4Output& s) {
    nlohmann::json captions = nlohmann::json::array();
    for (const auto& c : s.captions) {
        captions.push_back(
            {{"interaction_index", c.interaction_index},
             {"reversed", c.reversed},
             {"class_level_text", c.class_level_text},
             {"appearance_level_text", c.appearance_level_text},
             {"actor_indices",
              std::vector<int>(c.actor_indices.begin(),
                               c.actor_indices.end())},
             {"target_indices",
              std::vector<int>(c.target_indices.begin(),
                               c.target_indices.end())},
             {"fallback", c.fallback}});
    }
    return nlohmann::json{{"captions", captions}};
}

inline Stage4Output stage4_from_json(const nlohmann::json& j) {
    Stage4Output s;
    try {
        for (const auto& c : j.at("captions")) {
            Stage4Caption caption;
            caption.interaction_index = c.at("interaction_index").get<int>();
            caption.reversed = c.at("reversed").get<bool>();
            caption.class_level_text =
                c.at("class_level_text").get<std::string>();
            caption.appearance_level_text =
                c.at("appearance_level_text").get<std::string>();
            for (const auto& i : c.at("actor_indices")) {
                caption.actor_indices.insert(i.get<int>());
            }
            for (const auto& i : c.at("target_indices")) {
                caption.target_indices.insert(i.get<int>());
            }
            caption.fallback = c.at("fallback").get<bool>();
            s.captions.push_back(std::move(caption));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad stage4 file: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Orchestration

struct PipelineRunOptions {
    PipelineConfig config;
    std::set<int> stages = {1, 2, 3, 4};
    bool resume = false;
};

// Runs the requested stages for one video, persisting each stage as
// <out_dir>/<video_id>/stage{N}.json. With resume, existing stage files are
// loaded instead of recomputed. Returns the assembled annotation when stage
// 4 is included.
inline std::optional<VideoMeta> run_pipeline_for_video(
    const VideoMeta& video, const std::vector<RgbImage>& frames,
    LlmClient& client, const PromptLibrary& prompts,
    const PipelineRunOptions& options,
    const std::filesystem::path& out_dir) {
    const std::filesystem::path video_dir = out_dir / video.video_id;
    std::filesystem::create_directories(video_dir);

    auto stage_path = [&video_dir](int stage) {
        return video_dir / ("stage" + std::to_string(stage) + ".json");
    };
    auto want = [&options](int stage) {
        return options.stages.count(stage) > 0;
    };
    auto load_json = [](const std::filesystem::path& path) {
        return nlohmann::json::parse(read_file(path));
    };

    Stage1Output stage1;
    if (want(1) && !(options.resume &&
                     std::filesystem::exists(stage_path(1)))) {
        stage1 = run_stage1(video, frames, client, prompts, options.config);
        write_file_atomic(stage_path(1), stage1_to_json(stage1).dump(2) + "\n");
    } else if (std::filesystem::exists(stage_path(1))) {
        stage1 = stage1_from_json(load_json(stage_path(1)));
    } else if (want(2) || want(4)) {
        throw ConfigError("stage 1 output missing for " + video.video_id);
    }

    Stage2Output stage2;
    if (want(2) && !(options.resume &&
                     std::filesystem::exists(stage_path(2)))) {
        stage2 = run_stage2(stage1, client, prompts);
        write_file_atomic(stage_path(2), stage2_to_json(stage2).dump(2) + "\n");
    } else if (std::filesystem::exists(stage_path(2))) {
        stage2 = stage2_from_json(load_json(stage_path(2)));
    } else if (want(4)) {
        throw ConfigError("stage 2 output missing for " + video.video_id);
    }

    Stage3Output stage3;
    if (want(3) && !(options.resume &&
                     std::filesystem::exists(stage_path(3)))) {
        stage3 = run_stage3(video, frames, client, prompts, options.config);
        write_file_atomic(stage_path(3), stage3_to_json(stage3).dump(2) + "\n");
    } else if (std::filesystem::exists(stage_path(3))) {
        stage3 = stage3_from_json(load_json(stage_path(3)));
    } else if (want(4)) {
        throw ConfigError("stage 3 output missing for " + video.video_id);
    }

    if (!want(4)) return std::nullopt;
    Stage4Output stage4;
    if (!(options.resume && std::filesystem::exists(stage_path(4)))) {
        stage4 = run_stage4(stage1, stage2, stage3, client, prompts);
        write_file_atomic(stage_path(4), stage4_to_json(stage4).dump(2) + "\n");
    } else {
        stage4 = stage4_from_json(load_json(stage_path(4)));
    }
    return assemble_dataset(video, stage1, stage2, stage3, stage4);
}

}  // namespace ivos
