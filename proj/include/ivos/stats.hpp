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
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivos/dataset.hpp"

namespace ivos {

// Fixed stopword list so word-frequency output is reproducible; also shipped
// as data/stopwords.txt for external tooling.
inline const std::vector<std::string>& default_stopwords() {
    static const std::vector<std::string> words = {
        "a",    "an",   "the",  "is",   "are",  "was",  "were", "be",
        "being", "been", "and",  "or",   "of",   "to",   "in",   "on",
        "at",   "with", "by",   "for",  "it",   "its",  "this", "that",
        "as",   "from", "into", "while", "his",  "her",
    };
    return words;
}

struct DatasetStats {
    std::int64_t video_count = 0;
    std::int64_t object_count = 0;
    std::int64_t expression_count = 0;
    double objects_per_video = 0.0;
    std::int64_t interaction_expression_count = 0;
    double videos_with_interaction_fraction = 0.0;
    std::map<std::int64_t, std::int64_t> expressions_per_video_hist;
    std::map<std::int64_t, std::int64_t> objects_per_video_hist;
    std::map<std::int64_t, std::int64_t> frame_count_hist;
    // Bucketed to 5-second bins, keyed by bucket start.
    std::map<std::int64_t, std::int64_t> duration_hist;
    std::map<std::int64_t, std::int64_t> interactions_per_video_hist;
    std::map<std::int64_t, std::int64_t> objects_per_interaction_hist;
    std::map<std::string, std::int64_t> word_freq;

    bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats compute_stats(const DatasetMeta& meta, double fps = 30.0) {
    DatasetStats stats;
    std::set<std::string> stop(default_stopwords().begin(),
                               default_stopwords().end());
    std::int64_t videos_with_interaction = 0;
    for (const auto& [vid, video] : meta.videos) {
        ++stats.video_count;
        stats.object_count += static_cast<std::int64_t>(video.objects.size());
        stats.expression_count +=
            static_cast<std::int64_t>(video.expressions.size());
        stats.expressions_per_video_hist[static_cast<std::int64_t>(
            video.expressions.size())]++;
        stats.objects_per_video_hist[static_cast<std::int64_t>(
            video.objects.size())]++;
        stats.frame_count_hist[video.frame_count]++;
        if (fps > 0) {
            const double seconds = video.frame_count / fps;
            const std::int64_t bucket =
                static_cast<std::int64_t>(seconds / 5.0) * 5;
            stats.duration_hist[bucket]++;
        }

        std::int64_t interactions_here = 0;
        for (const auto& [eid, expr] : video.expressions) {
            if (expr.type == ExpressionType::Interaction) {
                ++interactions_here;
                ++stats.interaction_expression_count;
                std::set<std::string> participants;
                if (expr.interaction) {
                    participants.insert(expr.interaction->actor_ids.begin(),
                                        expr.interaction->actor_ids.end());
                    participants.insert(expr.interaction->target_ids.begin(),
                                        expr.interaction->target_ids.end());
                }
                stats.objects_per_interaction_hist[static_cast<std::int64_t>(
                    participants.size())]++;
            }
            for (const std::string& token : tokenize_words(expr.text)) {
                if (!stop.count(token)) stats.word_freq[token]++;
            }
        }
        stats.interactions_per_video_hist[interactions_here]++;
        if (interactions_here > 0) ++videos_with_interaction;
    }
    if (stats.video_count > 0) {
        stats.objects_per_video = static_cast<double>(stats.object_count) /
                                  static_cast<double>(stats.video_count);
        stats.videos_with_interaction_fraction =
            static_cast<double>(videos_with_interaction) /
            static_cast<double>(stats.video_count);
    }
    return stats;
}

// Word tokens ordered by descending count, ties broken lexicographically.
inline std::vector<std::pair<std::string, std::int64_t>> ranked_words(
    const DatasetStats& stats) {
    std::vector<std::pair<std::string, std::int64_t>> words(
        stats.word_freq.begin(), stats.word_freq.end());
    std::stable_sort(words.begin(), words.end(),
                     [](const auto& a, const auto& b) {
                         if (a.second != b.second) return a.second > b.second;
                         return a.first < b.first;
                     });
    return words;
}

namespace detail {

inline nlohmann::json int_hist_to_json(
    const std::map<std::int64_t, std::int64_t>& hist) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, count] : hist) {
        j[std::to_string(key)] = count;
    }
    return j;
}

inline std::map<std::int64_t, std::int64_t> int_hist_from_json(
    const nlohmann::json& j) {
    std::map<std::int64_t, std::int64_t> hist;
    for (const auto& [key, count] : j.items()) {
        hist[std::stoll(key)] = count.get<std::int64_t>();
    }
    return hist;
}

}  // namespace detail

inline nlohmann::json stats_to_json(const DatasetStats& stats) {
    return nlohmann::json{
        {"video_count", stats.video_count},
        {"object_count", stats.object_count},
        {"expression_count", stats.expression_count},
        {"objects_per_video", stats.objects_per_video},
        {"interaction_expression_count", stats.interaction_expression_count},
        {"videos_with_interaction_fraction",
         stats.videos_with_interaction_fraction},
        {"expressions_per_video_hist",
         detail::int_hist_to_json(stats.expressions_per_video_hist)},
        {"objects_per_video_hist",
         detail::int_hist_to_json(stats.objects_per_video_hist)},
        {"frame_count_hist",
         detail::int_hist_to_json(stats.frame_count_hist)},
        {"duration_hist", detail::int_hist_to_json(stats.duration_hist)},
        {"interactions_per_video_hist",
         detail::int_hist_to_json(stats.interactions_per_video_hist)},
        {"objects_per_interaction_hist",
         detail::int_hist_to_json(stats.objects_per_interaction_hist)},
        {"word_freq", stats.word_freq},
    };
}

inline DatasetStats stats_from_json(const nlohmann::json& j) {
    DatasetStats stats;
    try {
        stats.video_count = j.at("video_count").get<std::int64_t>();
        stats.object_count = j.at("object_count").get<std::int64_t>();
        stats.expression_count =
            j.at("expression_count").get<std::int64_t>();
        stats.objects_per_video = j.at("objects_per_video").get<double>();
        stats.interaction_expression_count =
            j.at("interaction_expression_count").get<std::int64_t>();
        stats.videos_with_interaction_fraction =
            j.at("videos_with_interaction_fraction").get<double>();
        stats.expressions_per_video_hist =
            detail::int_hist_from_json(j.at("expressions_per_video_hist"));
        stats.objects_per_video_hist =
            detail::int_hist_from_json(j.at("objects_per_video_hist"));
        stats.frame_count_hist =
            detail::int_hist_from_json(j.at("frame_count_hist"));
        stats.duration_hist = detail::int_hist_from_json(j.at("duration_hist"));
        stats.interactions_per_video_hist =
            detail::int_hist_from_json(j.at("interactions_per_video_hist"));
        stats.objects_per_interaction_hist =
            detail::int_hist_from_json(j.at("objects_per_interaction_hist"));
        for (const auto& [word, count] : j.at("word_freq").items()) {
            stats.word_freq[word] = count.get<std::int64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad stats document: ") + e.what());
    }
    return stats;
}

enum class StatsFormat { Text, Json, Csv };

inline StatsFormat stats_format_from_string(const std::string& s) {
    if (s == "text") return StatsFormat::Text;
    if (s == "json") return StatsFormat::Json;
    if (s == "csv") return StatsFormat::Csv;
    throw ConfigError("unknown stats format: " + s);
}

inline std::string render_stats_text(const DatasetStats& stats,
                                     int top_words = 20) {
    std::ostringstream out;
    out << "videos:                          " << stats.video_count << "\n";
    out << "objects:                         " << stats.object_count << "\n";
    out << "expressions:                     " << stats.expression_count
        << "\n";
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.2f", stats.objects_per_video);
    out << "objects per video:               " << ratio << "\n";
    out << "interaction expressions:         "
        << stats.interaction_expression_count << "\n";
    char fraction[32];
    std::snprintf(fraction, sizeof(fraction), "%.3f",
                  stats.videos_with_interaction_fraction);
    out << "videos with interaction (frac):  " << fraction << "\n";

    auto hist = [&out](const char* title,
                       const std::map<std::int64_t, std::int64_t>& h) {
        out << title << "\n";
        for (const auto& [key, count] : h) {
            out << "  " << key << ": " << count << "\n";
        }
    };
    hist("expressions per video:", stats.expressions_per_video_hist);
    hist("objects per video:", stats.objects_per_video_hist);
    hist("frame counts:", stats.frame_count_hist);
    hist("duration (5s buckets):", stats.duration_hist);
    hist("interaction expressions per video:",
         stats.interactions_per_video_hist);
    hist("objects per interaction:", stats.objects_per_interaction_hist);

    out << "top words:\n";
    const auto words = ranked_words(stats);
    for (std::size_t i = 0;
         i < words.size() && i < static_cast<std::size_t>(top_words); ++i) {
        out << "  " << words[i].first << ": " << words[i].second << "\n";
    }
    return out.str();
}

// One row per scalar, histogram bucket and word: kind,key,value.
inline std::string render_stats_csv(const DatasetStats& stats) {
    std::ostringstream out;
    out << "kind,key,value\n";
    out << "scalar,video_count," << stats.video_count << "\n";
    out << "scalar,object_count," << stats.object_count << "\n";
    out << "scalar,expression_count," << stats.expression_count << "\n";
    out << "scalar,objects_per_video," << stats.objects_per_video << "\n";
    out << "scalar,interaction_expression_count,"
        << stats.interaction_expression_count << "\n";
    out << "scalar,videos_with_interaction_fraction,"
        << stats.videos_with_interaction_fraction << "\n";
    auto hist = [&out](const char* kind,
                       const std::map<std::int64_t, std::int64_t>& h) {
        for (const auto& [key, count] : h) {
            out << kind << "," << key << "," << count << "\n";
        }
    };
    hist("expressions_per_video", stats.expressions_per_video_hist);
    hist("objects_per_video", stats.objects_per_video_hist);
    hist("frame_count", stats.frame_count_hist);
    hist("duration", stats.duration_hist);
    hist("interactions_per_video", stats.interactions_per_video_hist);
    hist("objects_per_interaction", stats.objects_per_interaction_hist);
    for (const auto& [word, count] : ranked_words(stats)) {
        out << "word," << word << "," << count << "\n";
    }
    return out.str();
}

inline std::string render_stats(const DatasetStats& stats,
                                StatsFormat format) {
    switch (format) {
        case StatsFormat::Text:
            return render_stats_text(stats);
        case StatsFormat::Json:
            return stats_to_json(stats).dump(2) + "\n";
        case StatsFormat::Csv:
            return render_stats_csv(stats);
    }
    return "";
}

}  // namespace ivos
