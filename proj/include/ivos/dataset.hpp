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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivos/mask.hpp"
#include "ivos/util.hpp"

namespace ivos {

enum class ExpressionType {
    SingleAppearanceMotion,
    SingleAppearance,
    SingleMotion,
    MultiInstance,
    Interaction,
};

enum class InteractionDirection { Unidirectional, Bidirectional };
enum class InteractionLevel { ClassLevel, AppearanceLevel };

inline std::string to_string(ExpressionType t) {
    switch (t) {
        case ExpressionType::SingleAppearanceMotion:
            return "single_appearance_motion";
        case ExpressionType::SingleAppearance:
            return "single_appearance";
        case ExpressionType::SingleMotion:
            return "single_motion";
        case ExpressionType::MultiInstance:
            return "multi_instance";
        case ExpressionType::Interaction:
            return "interaction";
    }
    return "unknown";
}

inline ExpressionType expression_type_from_string(const std::string& s) {
    if (s == "single_appearance_motion")
        return ExpressionType::SingleAppearanceMotion;
    if (s == "single_appearance") return ExpressionType::SingleAppearance;
    if (s == "single_motion") return ExpressionType::SingleMotion;
    if (s == "multi_instance") return ExpressionType::MultiInstance;
    if (s == "interaction") return ExpressionType::Interaction;
    throw ParseError("unknown expression type: " + s);
}

struct InteractionInfo {
    InteractionDirection direction = InteractionDirection::Unidirectional;
    std::set<std::string> actor_ids;
    std::set<std::string> target_ids;
    std::optional<std::string> pair_id;
    InteractionLevel level = InteractionLevel::ClassLevel;

    bool operator==(const InteractionInfo&) const = default;
};

struct Expression {
    std::string expression_id;
    std::string text;
    ExpressionType type = ExpressionType::SingleAppearanceMotion;
    std::set<std::string> object_ids;
    std::optional<InteractionInfo> interaction;

    bool operator==(const Expression&) const = default;
};

struct ObjectAnnotation {
    std::string object_id;
    int index_label = 0;
    std::string category;
    std::string appearance;
    std::string motion;
    MaskTrack track;

    bool operator==(const ObjectAnnotation&) const = default;
};

struct VideoMeta {
    std::string video_id;
    int frame_count = 0;
    int height = 0;
    int width = 0;
    std::vector<std::string> frame_names;
    std::map<std::string, ObjectAnnotation> objects;
    std::map<std::string, Expression> expressions;

    bool operator==(const VideoMeta&) const = default;
};

struct DatasetMeta {
    std::map<std::string, VideoMeta> videos;

    bool operator==(const DatasetMeta&) const = default;

    const VideoMeta* find_video_of_expression(
        const std::string& expression_id) const {
        for (const auto& [vid, video] : videos) {
            if (video.expressions.count(expression_id)) return &video;
        }
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// JSON serialization (meta_expressions.json schema)

inline nlohmann::json interaction_to_json(const InteractionInfo& info) {
    nlohmann::json j;
    j["direction"] =
        info.direction == InteractionDirection::Unidirectional ? "uni" : "bi";
    j["actor_ids"] =
        std::vector<std::string>(info.actor_ids.begin(), info.actor_ids.end());
    j["target_ids"] = std::vector<std::string>(info.target_ids.begin(),
                                               info.target_ids.end());
    if (info.pair_id) {
        j["pair_id"] = *info.pair_id;
    } else {
        j["pair_id"] = nullptr;
    }
    j["level"] =
        info.level == InteractionLevel::ClassLevel ? "class" : "appearance";
    return j;
}

inline InteractionInfo interaction_from_json(const nlohmann::json& j) {
    InteractionInfo info;
    const std::string dir = j.at("direction").get<std::string>();
    if (dir == "uni") {
        info.direction = InteractionDirection::Unidirectional;
    } else if (dir == "bi") {
        info.direction = InteractionDirection::Bidirectional;
    } else {
        throw ParseError("unknown interaction direction: " + dir);
    }
    for (const auto& id : j.at("actor_ids")) {
        info.actor_ids.insert(id.get<std::string>());
    }
    for (const auto& id : j.at("target_ids")) {
        info.target_ids.insert(id.get<std::string>());
    }
    if (j.contains("pair_id") && !j.at("pair_id").is_null()) {
        info.pair_id = j.at("pair_id").get<std::string>();
    }
    const std::string level = j.at("level").get<std::string>();
    if (level == "class") {
        info.level = InteractionLevel::ClassLevel;
    } else if (level == "appearance") {
        info.level = InteractionLevel::AppearanceLevel;
    } else {
        throw ParseError("unknown interaction level: " + level);
    }
    return info;
}

inline nlohmann::json track_to_json(const MaskTrack& track) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [frame, rle] : track.masks) {
        j[std::to_string(frame)] = rle_to_json(rle);
    }
    return j;
}

inline MaskTrack track_from_json(const nlohmann::json& j, int frame_count,
                                 int height, int width) {
    MaskTrack track;
    track.frame_count = frame_count;
    track.height = height;
    track.width = width;
    for (const auto& [key, value] : j.items()) {
        int frame = 0;
        try {
            frame = std::stoi(key);
        } catch (const std::exception&) {
            throw ParseError("bad frame index key: " + key);
        }
        track.masks[frame] = rle_from_json(value);
    }
    return track;
}

inline nlohmann::json meta_to_json(const DatasetMeta& meta) {
    nlohmann::json videos = nlohmann::json::object();
    for (const auto& [vid, video] : meta.videos) {
        nlohmann::json v;
        v["frame_count"] = video.frame_count;
        v["height"] = video.height;
        v["width"] = video.width;
        v["frames"] = video.frame_names;
        nlohmann::json objects = nlohmann::json::object();
        for (const auto& [oid, obj] : video.objects) {
            objects[oid] = nlohmann::json{
                {"index_label", obj.index_label},
                {"category", obj.category},
                {"appearance", obj.appearance},
                {"motion", obj.motion},
                {"track", track_to_json(obj.track)},
            };
        }
        v["objects"] = objects;
        nlohmann::json expressions = nlohmann::json::object();
        for (const auto& [eid, expr] : video.expressions) {
            nlohmann::json e;
            e["exp"] = expr.text;
            e["type"] = to_string(expr.type);
            e["obj_ids"] = std::vector<std::string>(expr.object_ids.begin(),
                                                    expr.object_ids.end());
            e["interaction"] = expr.interaction
                                   ? interaction_to_json(*expr.interaction)
                                   : nlohmann::json(nullptr);
            expressions[eid] = e;
        }
        v["expressions"] = expressions;
        videos[vid] = v;
    }
    return nlohmann::json{{"videos", videos}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& root) {
    DatasetMeta meta;
    try {
        for (const auto& [vid, v] : root.at("videos").items()) {
            VideoMeta video;
            video.video_id = vid;
            video.frame_count = v.at("frame_count").get<int>();
            video.height = v.at("height").get<int>();
            video.width = v.at("width").get<int>();
            video.frame_names =
                v.at("frames").get<std::vector<std::string>>();
            for (const auto& [oid, o] : v.at("objects").items()) {
                ObjectAnnotation obj;
                obj.object_id = oid;
                obj.index_label = o.at("index_label").get<int>();
                obj.category = o.at("category").get<std::string>();
                obj.appearance = o.at("appearance").get<std::string>();
                obj.motion = o.at("motion").get<std::string>();
                obj.track = track_from_json(o.at("track"), video.frame_count,
                                            video.height, video.width);
                video.objects.emplace(oid, std::move(obj));
            }
            for (const auto& [eid, e] : v.at("expressions").items()) {
                Expression expr;
                expr.expression_id = eid;
                expr.text = e.at("exp").get<std::string>();
                expr.type =
                    expression_type_from_string(e.at("type").get<std::string>());
                for (const auto& id : e.at("obj_ids")) {
                    expr.object_ids.insert(id.get<std::string>());
                }
                if (e.contains("interaction") &&
                    !e.at("interaction").is_null()) {
                    expr.interaction =
                        interaction_from_json(e.at("interaction"));
                }
                video.expressions.emplace(eid, std::move(expr));
            }
            meta.videos.emplace(vid, std::move(video));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad dataset file: ") + e.what());
    }
    return meta;
}

// Canonical writer: sorted keys, two-space indent, trailing newline. Two
// equal DatasetMeta values always serialize to identical bytes.
inline std::string meta_to_canonical_string(const DatasetMeta& meta) {
    return meta_to_json(meta).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    enum class Severity { Error, Warning };
    std::string video_id;
    std::string entity_id;  // object or expression id
    std::string rule;
    std::string message;
    Severity severity = Severity::Error;
};

inline std::vector<Violation> validate_meta(const DatasetMeta& meta) {
    std::vector<Violation> out;
    auto err = [&out](const std::string& vid, const std::string& ent,
                      const std::string& rule, const std::string& msg) {
        out.push_back({vid, ent, rule, msg, Violation::Severity::Error});
    };
    auto warn = [&out](const std::string& vid, const std::string& ent,
                       const std::string& rule, const std::string& msg) {
        out.push_back({vid, ent, rule, msg, Violation::Severity::Warning});
    };

    for (const auto& [vid, video] : meta.videos) {
        if (video.frame_count < 0 || video.height < 1 || video.width < 1) {
            err(vid, "", "video shape",
                "frame_count/height/width out of range");
        }
        std::map<int, std::string> labels_seen;
        for (const auto& [oid, obj] : video.objects) {
            auto [it, inserted] =
                labels_seen.emplace(obj.index_label, oid);
            if (!inserted) {
                err(vid, oid, "index_label unique",
                    "index label " + std::to_string(obj.index_label) +
                        " already used by " + it->second);
            }
            if (obj.track.height != video.height ||
                obj.track.width != video.width) {
                err(vid, oid, "track resolution",
                    "track resolution differs from video resolution");
            }
            for (const auto& [frame, rle] : obj.track.masks) {
                if (frame < 0 || frame >= video.frame_count) {
                    err(vid, oid, "frame index range",
                        "mask stored at frame " + std::to_string(frame));
                }
                if (rle.height != video.height ||
                    rle.width != video.width) {
                    err(vid, oid, "mask resolution",
                        "mask at frame " + std::to_string(frame) +
                            " has wrong resolution");
                }
                std::int64_t sum = 0;
                for (std::int64_t c : rle.counts) sum += c;
                if (sum != rle.pixel_count()) {
                    err(vid, oid, "rle count sum",
                        "counts at frame " + std::to_string(frame) +
                            " sum to " + std::to_string(sum));
                } else if (!rle.is_canonical()) {
                    err(vid, oid, "rle canonical",
                        "interior zero or negative count at frame " +
                            std::to_string(frame));
                }
            }
        }

        std::set<std::vector<std::string>> interaction_signatures;
        for (const auto& [eid, expr] : video.expressions) {
            for (const auto& oid : expr.object_ids) {
                if (!video.objects.count(oid)) {
                    err(vid, eid, "object ids resolve",
                        "unknown object id " + oid);
                }
            }
            const bool is_interaction =
                expr.type == ExpressionType::Interaction;
            if (is_interaction != expr.interaction.has_value()) {
                err(vid, eid, "interaction presence",
                    "type and interaction field disagree");
                continue;
            }
            switch (expr.type) {
                case ExpressionType::SingleAppearanceMotion:
                case ExpressionType::SingleAppearance:
                case ExpressionType::SingleMotion:
                    if (expr.object_ids.size() != 1) {
                        err(vid, eid, "single object arity",
                            "single expression refers to " +
                                std::to_string(expr.object_ids.size()) +
                                " objects");
                    }
                    break;
                case ExpressionType::MultiInstance:
                    if (expr.object_ids.size() < 2) {
                        err(vid, eid, "multi instance arity",
                            "multi-instance expression needs >= 2 objects");
                    }
                    break;
                case ExpressionType::Interaction:
                    break;
            }
            if (!expr.interaction) continue;
            const InteractionInfo& info = *expr.interaction;
            for (const auto& oid : info.actor_ids) {
                if (!video.objects.count(oid)) {
                    err(vid, eid, "actor ids resolve",
                        "unknown actor id " + oid);
                }
            }
            for (const auto& oid : info.target_ids) {
                if (!video.objects.count(oid)) {
                    err(vid, eid, "target ids resolve",
                        "unknown target id " + oid);
                }
            }
            if (info.direction == InteractionDirection::Unidirectional) {
                if (info.actor_ids.empty() || info.target_ids.empty()) {
                    err(vid, eid, "uni roles nonempty",
                        "unidirectional interaction needs actors and targets");
                }
                std::vector<std::string> overlap;
                std::set_intersection(
                    info.actor_ids.begin(), info.actor_ids.end(),
                    info.target_ids.begin(), info.target_ids.end(),
                    std::back_inserter(overlap));
                if (!overlap.empty()) {
                    err(vid, eid, "uni roles disjoint",
                        "actor and target sets overlap");
                }
                std::vector<std::string> signature;
                signature.insert(signature.end(), info.actor_ids.begin(),
                                 info.actor_ids.end());
                signature.push_back("->");
                signature.insert(signature.end(), info.target_ids.begin(),
                                 info.target_ids.end());
                signature.push_back(info.level ==
                                            InteractionLevel::ClassLevel
                                        ? "class"
                                        : "appearance");
                if (!interaction_signatures.insert(signature).second) {
                    warn(vid, eid, "duplicate interaction",
                         "another expression covers the same actor-target "
                         "pair at this level");
                }
            } else {
                if (!info.target_ids.empty()) {
                    err(vid, eid, "bi targets empty",
                        "bidirectional interaction must not assign targets");
                }
                if (info.actor_ids.size() < 2) {
                    err(vid, eid, "bi participants",
                        "bidirectional interaction needs >= 2 participants");
                }
            }
            if (info.pair_id) {
                auto pit = video.expressions.find(*info.pair_id);
                if (pit == video.expressions.end()) {
                    err(vid, eid, "pair_id unresolved",
                        "pair id " + *info.pair_id +
                            " not found in this video");
                } else if (!pit->second.interaction) {
                    err(vid, eid, "pair is interaction",
                        "pair " + *info.pair_id + " is not an interaction");
                } else {
                    const InteractionInfo& peer = *pit->second.interaction;
                    if (peer.actor_ids != info.target_ids ||
                        peer.target_ids != info.actor_ids) {
                        err(vid, eid, "pair role swap",
                            "pair " + *info.pair_id +
                                " does not swap actor/target roles");
                    }
                    if (!peer.pair_id || *peer.pair_id != eid) {
                        err(vid, eid, "pair reciprocity",
                            "pair " + *info.pair_id +
                                " does not point back");
                    }
                    if (peer.level != info.level) {
                        err(vid, eid, "pair level match",
                            "paired expressions carry different levels");
                    }
                }
            }
        }
    }
    return out;
}

inline bool has_errors(const std::vector<Violation>& violations) {
    return std::any_of(violations.begin(), violations.end(),
                       [](const Violation& v) {
                           return v.severity == Violation::Severity::Error;
                       });
}

// ---------------------------------------------------------------------------
// Load / save

inline DatasetMeta load_meta(const std::filesystem::path& path,
                             bool validate = true) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    DatasetMeta meta = meta_from_json(root);
    if (validate) {
        const auto violations = validate_meta(meta);
        for (const auto& v : violations) {
            if (v.severity == Violation::Severity::Error) {
                throw SchemaViolation(v.rule + " (" + v.video_id +
                                      (v.entity_id.empty()
                                           ? ""
                                           : "/" + v.entity_id) +
                                      "): " + v.message);
            }
        }
    }
    return meta;
}

inline void save_meta(const DatasetMeta& meta,
                      const std::filesystem::path& path) {
    write_file_atomic(path, meta_to_canonical_string(meta));
}

// ---------------------------------------------------------------------------
// Ground-truth assembly

// Per-frame union of the given objects' masks. Frames where every object is
// absent stay absent in the result.
inline MaskTrack merged_track_for_ids(const VideoMeta& video,
                                      const std::set<std::string>& ids) {
    MaskTrack out;
    out.frame_count = video.frame_count;
    out.height = video.height;
    out.width = video.width;
    std::set<int> frames;
    for (const auto& oid : ids) {
        auto it = video.objects.find(oid);
        if (it == video.objects.end()) continue;
        for (const auto& [frame, rle] : it->second.track.masks) {
            frames.insert(frame);
        }
    }
    for (int frame : frames) {
        BinaryMask merged(video.height, video.width);
        for (const auto& oid : ids) {
            auto it = video.objects.find(oid);
            if (it == video.objects.end()) continue;
            if (!it->second.track.has_frame(frame)) continue;
            merged = mask_union(merged, it->second.track.mask_at(frame));
        }
        if (!merged.is_empty()) out.masks[frame] = rle_encode(merged);
    }
    return out;
}

// Ground-truth track for one expression. Interaction expressions merge both
// roles; dual-mask callers fetch the actor and target unions separately via
// merged_track_for_ids.
inline MaskTrack merged_gt_track(const DatasetMeta& meta,
                                 const std::string& expression_id) {
    const VideoMeta* video = meta.find_video_of_expression(expression_id);
    if (!video) throw UnknownExpression(expression_id);
    const Expression& expr = video->expressions.at(expression_id);
    std::set<std::string> ids = expr.object_ids;
    if (expr.interaction) {
        ids.insert(expr.interaction->actor_ids.begin(),
                   expr.interaction->actor_ids.end());
        ids.insert(expr.interaction->target_ids.begin(),
                   expr.interaction->target_ids.end());
    }
    return merged_track_for_ids(*video, ids);
}

}  // namespace ivos
