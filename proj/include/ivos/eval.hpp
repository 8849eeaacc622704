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
#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ivos/dataset.hpp"
#include "ivos/metrics.hpp"

namespace ivos {

enum class EvalCategory { Referring, ActorTarget };

inline std::string to_string(EvalCategory c) {
    return c == EvalCategory::Referring ? "referring" : "actor_target";
}

// Actor-target evaluation covers exactly the interaction expressions that
// come as a role-swapped pair; everything else (including bidirectional
// interactions, which have no role assignment) is standard referring.
inline EvalCategory categorize(const Expression& expr) {
    if (expr.type == ExpressionType::Interaction && expr.interaction &&
        expr.interaction->direction == InteractionDirection::Unidirectional &&
        expr.interaction->pair_id) {
        return EvalCategory::ActorTarget;
    }
    return EvalCategory::Referring;
}

// Predicted masks for one expression. Interaction predictions may carry a
// second track for the target role.
struct PredictionTrack {
    std::map<int, RleMask> primary;
    std::optional<std::map<int, RleMask>> target;

    bool operator==(const PredictionTrack&) const = default;
};

struct PredictionSet {
    std::map<std::string, PredictionTrack> predictions;

    bool operator==(const PredictionSet&) const = default;
};

inline nlohmann::json predictions_to_json(const PredictionSet& preds) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [eid, track] : preds.predictions) {
        nlohmann::json entry;
        nlohmann::json primary = nlohmann::json::object();
        for (const auto& [frame, rle] : track.primary) {
            primary[std::to_string(frame)] = rle_to_json(rle);
        }
        entry["primary"] = primary;
        if (track.target) {
            nlohmann::json target = nlohmann::json::object();
            for (const auto& [frame, rle] : *track.target) {
                target[std::to_string(frame)] = rle_to_json(rle);
            }
            entry["target"] = target;
        } else {
            entry["target"] = nullptr;
        }
        out[eid] = entry;
    }
    return nlohmann::json{{"predictions", out}};
}

inline PredictionSet predictions_from_json(const nlohmann::json& root) {
    PredictionSet preds;
    try {
        for (const auto& [eid, entry] : root.at("predictions").items()) {
            PredictionTrack track;
            for (const auto& [key, value] : entry.at("primary").items()) {
                track.primary[std::stoi(key)] = rle_from_json(value);
            }
            if (entry.contains("target") && !entry.at("target").is_null()) {
                std::map<int, RleMask> target;
                for (const auto& [key, value] : entry.at("target").items()) {
                    target[std::stoi(key)] = rle_from_json(value);
                }
                track.target = std::move(target);
            }
            preds.predictions.emplace(eid, std::move(track));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad prediction file: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ParseError("bad frame index key in prediction file");
    }
    return preds;
}

inline PredictionSet load_predictions(const std::filesystem::path& path) {
    try {
        return predictions_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void save_predictions(const PredictionSet& preds,
                             const std::filesystem::path& path) {
    write_file_atomic(path, predictions_to_json(preds).dump(2) + "\n");
}

struct CategoryScore {
    double j = 0.0;
    double f = 0.0;
    double jf = 0.0;
    int expression_count = 0;
};

struct ExpressionResult {
    ExpressionScore score;
    EvalCategory category = EvalCategory::Referring;
};

struct EvalReport {
    std::string mode;  // "referring" or "actor_target_dual"
    double tolerance_ratio = kDefaultToleranceRatio;
    std::map<std::string, ExpressionResult> per_expression;
    CategoryScore referring;
    CategoryScore actor_target;
    CategoryScore overall;
    std::vector<std::string> warnings;  // prediction ids without ground truth
};

struct EvalConfig {
    double tolerance_ratio = kDefaultToleranceRatio;
    int workers = 1;
    // Skip frames whose ground-truth mask is empty instead of scoring them.
    bool skip_empty_gt_frames = false;
};

namespace detail {

// Mean J/F over the frames of one video, fixed ascending frame order.
inline ExpressionScore score_track_pair(
    const VideoMeta& video, const MaskTrack& gt,
    const std::map<int, RleMask>* pred, const EvalConfig& config) {
    double j_sum = 0.0;
    double f_sum = 0.0;
    int counted = 0;
    const BinaryMask empty(video.height, video.width);
    for (int frame = 0; frame < video.frame_count; ++frame) {
        const BinaryMask gt_mask = gt.mask_at(frame);
        if (config.skip_empty_gt_frames && gt_mask.is_empty()) continue;
        BinaryMask pred_mask = empty;
        if (pred) {
            auto it = pred->find(frame);
            if (it != pred->end()) {
                if (it->second.height != video.height ||
                    it->second.width != video.width) {
                    throw ResolutionMismatch(it->second.height,
                                             it->second.width, video.height,
                                             video.width);
                }
                pred_mask = rle_decode(it->second);
            }
        }
        j_sum += jaccard(pred_mask, gt_mask);
        f_sum += boundary_f(pred_mask, gt_mask, config.tolerance_ratio);
        ++counted;
    }
    if (counted == 0) return make_expression_score(1.0, 1.0, 0);
    return make_expression_score(j_sum / counted, f_sum / counted, counted);
}

struct ExpressionJob {
    const VideoMeta* video;
    const Expression* expr;
};

template <typename ScoreFn>
inline std::vector<ExpressionScore> run_jobs(
    const std::vector<ExpressionJob>& jobs, int workers, ScoreFn&& fn) {
    std::vector<ExpressionScore> results(jobs.size());
    if (workers <= 1 || jobs.size() <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = fn(jobs[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                results[i] = fn(jobs[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
    threads.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

inline void aggregate(EvalReport& report) {
    double j_ref = 0, f_ref = 0, j_at = 0, f_at = 0;
    int n_ref = 0, n_at = 0;
    // Deterministic reduction over the id-sorted map.
    for (const auto& [eid, result] : report.per_expression) {
        if (result.category == EvalCategory::Referring) {
            j_ref += result.score.j_mean;
            f_ref += result.score.f_mean;
            ++n_ref;
        } else {
            j_at += result.score.j_mean;
            f_at += result.score.f_mean;
            ++n_at;
        }
    }
    auto finish = [](double j, double f, int n) {
        CategoryScore s;
        s.expression_count = n;
        if (n > 0) {
            s.j = j / n;
            s.f = f / n;
            s.jf = jf_score(s.j, s.f);
        }
        return s;
    };
    report.referring = finish(j_ref, f_ref, n_ref);
    report.actor_target = finish(j_at, f_at, n_at);
    report.overall = finish(j_ref + j_at, f_ref + f_at, n_ref + n_at);
}

}  // namespace detail

// Score every ground-truth expression against the prediction set. Missing
// predictions count as empty tracks; predictions without a matching
// expression are reported as warnings and ignored.
inline EvalReport evaluate(const DatasetMeta& meta, const PredictionSet& preds,
                           const EvalConfig& config = {}) {
    EvalReport report;
    report.mode = "referring";
    report.tolerance_ratio = config.tolerance_ratio;

    std::vector<detail::ExpressionJob> jobs;
    for (const auto& [vid, video] : meta.videos) {
        for (const auto& [eid, expr] : video.expressions) {
            jobs.push_back({&video, &expr});
        }
    }
    std::sort(jobs.begin(), jobs.end(),
              [](const detail::ExpressionJob& a,
                 const detail::ExpressionJob& b) {
                  return a.expr->expression_id < b.expr->expression_id;
              });

    const auto scores = detail::run_jobs(
        jobs, config.workers, [&](const detail::ExpressionJob& job) {
            std::set<std::string> ids = job.expr->object_ids;
            if (job.expr->interaction) {
                ids.insert(job.expr->interaction->actor_ids.begin(),
                           job.expr->interaction->actor_ids.end());
                ids.insert(job.expr->interaction->target_ids.begin(),
                           job.expr->interaction->target_ids.end());
            }
            const MaskTrack gt = merged_track_for_ids(*job.video, ids);
            auto pit = preds.predictions.find(job.expr->expression_id);
            const std::map<int, RleMask>* pred =
                pit == preds.predictions.end() ? nullptr : &pit->second.primary;
            return detail::score_track_pair(*job.video, gt, pred, config);
        });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        report.per_expression[jobs[i].expr->expression_id] = {
            scores[i], categorize(*jobs[i].expr)};
    }
    for (const auto& [eid, track] : preds.predictions) {
        if (!report.per_expression.count(eid)) {
            report.warnings.push_back("prediction for unknown expression: " +
                                      eid);
        }
    }
    detail::aggregate(report);
    return report;
}

// Dual-mask scoring of the actor-target category: each paired interaction
// expression is scored as the mean of (primary vs actor union) and (target
// vs target union).
inline EvalReport evaluate_dual(const DatasetMeta& meta,
                                const PredictionSet& preds,
                                const EvalConfig& config = {}) {
    EvalReport report;
    report.mode = "actor_target_dual";
    report.tolerance_ratio = config.tolerance_ratio;

    std::vector<detail::ExpressionJob> jobs;
    for (const auto& [vid, video] : meta.videos) {
        for (const auto& [eid, expr] : video.expressions) {
            if (categorize(expr) == EvalCategory::ActorTarget) {
                jobs.push_back({&video, &expr});
            }
        }
    }
    std::sort(jobs.begin(), jobs.end(),
              [](const detail::ExpressionJob& a,
                 const detail::ExpressionJob& b) {
                  return a.expr->expression_id < b.expr->expression_id;
              });

    const auto scores = detail::run_jobs(
        jobs, config.workers, [&](const detail::ExpressionJob& job) {
            const InteractionInfo& info = *job.expr->interaction;
            const MaskTrack actor_gt =
                merged_track_for_ids(*job.video, info.actor_ids);
            const MaskTrack target_gt =
                merged_track_for_ids(*job.video, info.target_ids);
            const std::map<int, RleMask>* primary = nullptr;
            const std::map<int, RleMask>* target = nullptr;
            auto pit = preds.predictions.find(job.expr->expression_id);
            if (pit != preds.predictions.end()) {
                primary = &pit->second.primary;
                if (!pit->second.target) {
                    throw MissingTargetTrack(job.expr->expression_id);
                }
                target = &*pit->second.target;
            }
            const ExpressionScore actor_score =
                detail::score_track_pair(*job.video, actor_gt, primary,
                                         config);
            const ExpressionScore target_score =
                detail::score_track_pair(*job.video, target_gt, target,
                                         config);
            return make_expression_score(
                (actor_score.j_mean + target_score.j_mean) / 2.0,
                (actor_score.f_mean + target_score.f_mean) / 2.0,
                actor_score.frame_count);
        });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        report.per_expression[jobs[i].expr->expression_id] = {
            scores[i], EvalCategory::ActorTarget};
    }
    detail::aggregate(report);
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation split construction

struct SplitConfig {
    std::set<std::string> train_video_ids;
    // When set, restricts the output to exactly these videos; must be
    // disjoint from the train set.
    std::optional<std::set<std::string>> eval_video_ids;
    double interaction_min_fraction = 0.0;
    // Fraction of single-object expressions kept before the interaction
    // fraction is enforced.
    double single_downsample_rate = 1.0;
    std::uint64_t seed = 0;
};

// Drops the training videos, keeps a seeded sample of the single-object
// expressions, then removes further singles until interaction expressions
// make up at least the requested fraction (or no singles remain).
inline DatasetMeta build_eval_split(const DatasetMeta& meta,
                                    const SplitConfig& config) {
    if (config.single_downsample_rate < 0.0 ||
        config.single_downsample_rate > 1.0) {
        throw ConfigError("single_downsample_rate must lie in [0, 1]");
    }
    if (config.interaction_min_fraction < 0.0 ||
        config.interaction_min_fraction > 1.0) {
        throw ConfigError("interaction_min_fraction must lie in [0, 1]");
    }
    if (config.eval_video_ids) {
        std::vector<std::string> overlap;
        std::set_intersection(config.train_video_ids.begin(),
                              config.train_video_ids.end(),
                              config.eval_video_ids->begin(),
                              config.eval_video_ids->end(),
                              std::back_inserter(overlap));
        if (!overlap.empty()) {
            throw ConfigError("train and eval video sets overlap: " +
                              overlap.front());
        }
    }

    DatasetMeta out;
    for (const auto& [vid, video] : meta.videos) {
        if (config.train_video_ids.count(vid)) continue;
        if (config.eval_video_ids && !config.eval_video_ids->count(vid)) {
            continue;
        }
        out.videos.emplace(vid, video);
    }

    auto is_single = [](const Expression& e) {
        return e.type == ExpressionType::SingleAppearanceMotion ||
               e.type == ExpressionType::SingleAppearance ||
               e.type == ExpressionType::SingleMotion;
    };

    std::vector<std::pair<std::string, std::string>> singles;
    std::int64_t interaction_count = 0;
    std::int64_t total = 0;
    for (const auto& [vid, video] : out.videos) {
        for (const auto& [eid, expr] : video.expressions) {
            ++total;
            if (expr.type == ExpressionType::Interaction) ++interaction_count;
            if (is_single(expr)) singles.emplace_back(vid, eid);
        }
    }

    Rng rng(config.seed);
    seeded_shuffle(singles, rng);

    const std::size_t keep =
        static_cast<std::size_t>(std::llround(config.single_downsample_rate *
                                              static_cast<double>(singles.size())));
    std::vector<std::pair<std::string, std::string>> removed(
        singles.begin() + static_cast<std::ptrdiff_t>(keep), singles.end());
    singles.resize(keep);

    auto fraction = [&]() {
        return total == 0 ? 1.0
                          : static_cast<double>(interaction_count) /
                                static_cast<double>(total);
    };
    for (const auto& victim : removed) {
        out.videos.at(victim.first).expressions.erase(victim.second);
        --total;
    }
    while (fraction() < config.interaction_min_fraction && !singles.empty()) {
        const auto victim = singles.back();
        singles.pop_back();
        out.videos.at(victim.first).expressions.erase(victim.second);
        --total;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report rendering

namespace detail {

inline std::string format_cell(double unit_value, int precision,
                               bool percent) {
    const double scaled = percent ? unit_value * 100.0 : unit_value;
    const double rounded = round_half_even(scaled, precision);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, rounded);
    return buf;
}

}  // namespace detail

// Plain-text table, one row per category. Values are rounded half-to-even at
// render time only; the stored report keeps full precision.
inline std::string render_report(const EvalReport& report, int precision = 1,
                                 bool percent = true) {
    auto row = [&](const std::string& name, const CategoryScore& s) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-14s %7d %7s %7s %7s\n",
                      name.c_str(), s.expression_count,
                      detail::format_cell(s.j, precision, percent).c_str(),
                      detail::format_cell(s.f, precision, percent).c_str(),
                      detail::format_cell(s.jf, precision, percent).c_str());
        return std::string(buf);
    };
    std::string out;
    out += "mode: " + report.mode +
           "  tolerance: " + std::to_string(report.tolerance_ratio) + "\n";
    char header[160];
    std::snprintf(header, sizeof(header), "%-14s %7s %7s %7s %7s\n",
                  "category", "count", "J", "F", "J&F");
    out += header;
    out += row("Referring", report.referring);
    out += row("Actor-Target", report.actor_target);
    out += row("Overall", report.overall);
    return out;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [eid, result] : report.per_expression) {
        per[eid] = nlohmann::json{
            {"j", result.score.j_mean},
            {"f", result.score.f_mean},
            {"jf", result.score.jf},
            {"frame_count", result.score.frame_count},
            {"category", to_string(result.category)},
        };
    }
    auto cat = [](const CategoryScore& s) {
        return nlohmann::json{{"j", s.j},
                              {"f", s.f},
                              {"jf", s.jf},
                              {"expression_count", s.expression_count}};
    };
    return nlohmann::json{
        {"mode", report.mode},
        {"tolerance_ratio", report.tolerance_ratio},
        {"per_expression", per},
        {"categories",
         nlohmann::json{{"referring", cat(report.referring)},
                        {"actor_target", cat(report.actor_target)},
                        {"overall", cat(report.overall)}}},
        {"warnings", report.warnings},
    };
}

}  // namespace ivos
