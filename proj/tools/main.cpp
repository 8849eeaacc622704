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

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ivos/clips.hpp"
#include "ivos/dataset.hpp"
#include "ivos/eval.hpp"
#include "ivos/image.hpp"
#include "ivos/llm.hpp"
#include "ivos/pipeline.hpp"
#include "ivos/stats.hpp"

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

struct Logger {
    LogLevel level = LogLevel::Info;

    void log(LogLevel at, const std::string& message,
             const std::map<std::string, std::string>& fields = {}) const {
        if (at < level) return;
        if (level == LogLevel::Debug) {
            nlohmann::json line{{"level", name(at)}, {"msg", message}};
            for (const auto& [key, value] : fields) line[key] = value;
            std::cerr << line.dump() << "\n";
        } else {
            std::cerr << name(at) << ": " << message;
            for (const auto& [key, value] : fields) {
                std::cerr << " " << key << "=" << value;
            }
            std::cerr << "\n";
        }
    }
    void debug(const std::string& m,
               const std::map<std::string, std::string>& f = {}) const {
        log(LogLevel::Debug, m, f);
    }
    void info(const std::string& m,
              const std::map<std::string, std::string>& f = {}) const {
        log(LogLevel::Info, m, f);
    }

    static const char* name(LogLevel l) {
        switch (l) {
            case LogLevel::Debug:
                return "debug";
            case LogLevel::Info:
                return "info";
            case LogLevel::Warn:
                return "warn";
            case LogLevel::Error:
                return "error";
        }
        return "info";
    }
};

LogLevel parse_log_level(const std::string& s) {
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    if (s == "warn") return LogLevel::Warn;
    if (s == "error") return LogLevel::Error;
    throw ivos::ConfigError("unknown log level: " + s);
}

struct GlobalOptions {
    std::string log_level = "info";
    int workers = 1;
    std::uint64_t seed = 0;
    std::string audit_dir;
};

std::set<int> parse_stage_list(const std::string& spec) {
    std::set<int> stages;
    std::string current;
    for (char ch : spec + ",") {
        if (ch == ',') {
            if (current.empty()) continue;
            const int stage = std::stoi(current);
            if (stage < 1 || stage > 4) {
                throw ivos::ConfigError("stages must lie in 1..4");
            }
            stages.insert(stage);
            current.clear();
        } else if (std::isdigit(static_cast<unsigned char>(ch))) {
            current.push_back(ch);
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            throw ivos::ConfigError("bad stage list: " + spec);
        }
    }
    if (stages.empty()) throw ivos::ConfigError("empty stage list");
    return stages;
}

std::shared_ptr<ivos::MockBackend> make_mock_backend(
    const std::string& replies_path) {
    auto mock = std::make_shared<ivos::MockBackend>();
    if (replies_path.empty()) return mock;
    const auto root = nlohmann::json::parse(ivos::read_file(replies_path));
    if (root.contains("patterns")) {
        for (const auto& entry : root.at("patterns")) {
            mock->add_pattern_reply(entry.at("contains").get<std::string>(),
                                    entry.at("reply").get<std::string>());
        }
    }
    if (root.contains("digests")) {
        for (const auto& [digest, reply] : root.at("digests").items()) {
            mock->add_digest_reply(digest, reply.get<std::string>());
        }
    }
    return mock;
}

int run_validate(const std::string& meta_path) {
    const ivos::DatasetMeta meta =
        ivos::load_meta(meta_path, /*validate=*/false);
    const auto violations = ivos::validate_meta(meta);
    int errors = 0;
    for (const auto& v : violations) {
        const bool is_error =
            v.severity == ivos::Violation::Severity::Error;
        if (is_error) ++errors;
        std::cout << (is_error ? "error" : "warning") << ": " << v.rule
                  << " (" << v.video_id
                  << (v.entity_id.empty() ? "" : "/" + v.entity_id)
                  << "): " << v.message << "\n";
    }
    std::cout << errors << " violations\n";
    return errors == 0 ? 0 : 2;
}

struct EvaluateArgs {
    std::string meta_path;
    std::string preds_path;
    bool dual = false;
    double tolerance = ivos::kDefaultToleranceRatio;
    bool skip_empty_gt = false;
    std::string out_path;
};

int run_evaluate(const EvaluateArgs& args, const GlobalOptions& global,
                 const Logger& logger) {
    const ivos::DatasetMeta meta = ivos::load_meta(args.meta_path);
    const ivos::PredictionSet preds =
        ivos::load_predictions(args.preds_path);
    ivos::EvalConfig config;
    config.tolerance_ratio = args.tolerance;
    config.workers = global.workers;
    config.skip_empty_gt_frames = args.skip_empty_gt;
    const ivos::EvalReport report =
        args.dual ? ivos::evaluate_dual(meta, preds, config)
                  : ivos::evaluate(meta, preds, config);
    for (const auto& warning : report.warnings) {
        logger.log(LogLevel::Warn, warning);
    }
    std::cout << ivos::render_report(report);
    if (!args.out_path.empty()) {
        ivos::write_file_atomic(args.out_path,
                                ivos::report_to_json(report).dump(2) + "\n");
        logger.debug("report written", {{"path", args.out_path}});
    }
    return 0;
}

struct StatsArgs {
    std::string meta_path;
    double fps = 30.0;
    std::string format = "text";
    std::string out_path;
};

int run_stats(const StatsArgs& args) {
    const ivos::DatasetMeta meta = ivos::load_meta(args.meta_path);
    const ivos::DatasetStats stats = ivos::compute_stats(meta, args.fps);
    const std::string rendered =
        ivos::render_stats(stats, ivos::stats_format_from_string(args.format));
    if (args.out_path.empty()) {
        std::cout << rendered;
    } else {
        ivos::write_file_atomic(args.out_path, rendered);
    }
    return 0;
}

struct ClipArgs {
    std::string frames;
    std::int64_t bin = 1000;
    std::int64_t clip = 500;
    std::int64_t min_len = 100;
    std::string out_path;
};

int run_extract_clips(const ClipArgs& args) {
    std::int64_t frame_count = 0;
    std::string source_id;
    const fs::path source(args.frames);
    if (fs::is_directory(source)) {
        for (const auto& entry : fs::directory_iterator(source)) {
            if (entry.is_regular_file()) ++frame_count;
        }
        source_id = source.filename().string();
    } else if (fs::is_regular_file(source)) {
        for (const auto& line :
             ivos::split_lines(ivos::read_file(source))) {
            if (!ivos::trim(line).empty()) ++frame_count;
        }
        source_id = source.stem().string();
    } else {
        throw ivos::ConfigError("--frames must name a directory or a list "
                                "file: " +
                                args.frames);
    }
    const auto clips = ivos::extract_clips(source_id, frame_count, args.bin,
                                           args.clip, args.min_len);
    nlohmann::json manifest{{"source_id", source_id},
                            {"frame_count", frame_count},
                            {"bin_size", args.bin},
                            {"clip_length", args.clip},
                            {"min_length", args.min_len}};
    nlohmann::json records = nlohmann::json::array();
    for (const auto& clip : clips) records.push_back(ivos::clip_to_json(clip));
    manifest["clips"] = records;
    ivos::write_file_atomic(args.out_path, manifest.dump(2) + "\n");
    std::cout << clips.size() << " clips from " << frame_count
              << " frames\n";
    return 0;
}

struct ImportPngArgs {
    std::string masks_dir;
    std::string video_id;
    std::string out_path;
};

// Indexed-palette mask importer: palette index = object label + 1, index 0
// is background.
int run_import_png(const ImportPngArgs& args) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(args.masks_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw ivos::DataError("no .png masks under " + args.masks_dir);
    }

    ivos::VideoMeta video;
    video.video_id = args.video_id;
    video.frame_count = static_cast<int>(files.size());
    std::map<int, std::map<int, ivos::RleMask>> tracks;
    for (int frame = 0; frame < static_cast<int>(files.size()); ++frame) {
        const ivos::IndexedImage img = ivos::read_png_indexed(files[
            static_cast<std::size_t>(frame)]);
        if (frame == 0) {
            video.height = img.height;
            video.width = img.width;
        } else if (img.height != video.height || img.width != video.width) {
            throw ivos::ResolutionMismatch(img.height, img.width,
                                           video.height, video.width);
        }
        video.frame_names.push_back(
            files[static_cast<std::size_t>(frame)].filename().string());
        std::map<int, ivos::BinaryMask> masks;
        for (int r = 0; r < img.height; ++r) {
            for (int c = 0; c < img.width; ++c) {
                const int value = img.at(r, c);
                if (value == 0) continue;
                auto [it, inserted] = masks.try_emplace(
                    value - 1, ivos::BinaryMask(img.height, img.width));
                it->second.set(r, c);
            }
        }
        for (const auto& [label, mask] : masks) {
            tracks[label][frame] = ivos::rle_encode(mask);
        }
    }
    for (const auto& [label, frames] : tracks) {
        ivos::ObjectAnnotation obj;
        obj.object_id = "obj_" + std::to_string(label);
        obj.index_label = label;
        obj.track.frame_count = video.frame_count;
        obj.track.height = video.height;
        obj.track.width = video.width;
        obj.track.masks = frames;
        video.objects.emplace(obj.object_id, std::move(obj));
    }
    ivos::DatasetMeta meta;
    meta.videos.emplace(video.video_id, std::move(video));
    const auto violations = ivos::validate_meta(meta);
    if (ivos::has_errors(violations)) {
        throw ivos::SchemaViolation("imported masks are inconsistent: " +
                                    violations.front().message);
    }
    ivos::save_meta(meta, args.out_path);
    std::cout << "imported " << meta.videos.at(args.video_id).objects.size()
              << " objects over " << files.size() << " frames\n";
    return 0;
}

struct AnnotateArgs {
    std::string frames_dir;
    std::string tracks_path;
    std::string stages = "1,2,3,4";
    std::string backend = "mock";
    std::string prompts_dir;
    std::string out_dir;
    bool resume = false;
    std::string mock_replies;
    std::string base_url;
    std::string model = "default";
    int overlay_frames = 8;
    int max_attempts = 3;
};

int run_annotate(const AnnotateArgs& args, const GlobalOptions& global,
                 const Logger& logger) {
    const ivos::DatasetMeta input = ivos::load_meta(args.tracks_path);
    const ivos::PromptLibrary prompts =
        ivos::PromptLibrary::load(args.prompts_dir);

    std::shared_ptr<ivos::LlmBackend> backend;
    if (args.backend == "mock") {
        backend = make_mock_backend(args.mock_replies);
    } else if (args.backend == "http") {
        ivos::HttpBackendConfig config;
        config.base_url = args.base_url;
        config.model = args.model;
        backend = std::make_shared<ivos::HttpBackend>(config);
    } else {
        throw ivos::ConfigError("unknown backend: " + args.backend);
    }

    ivos::RetryPolicy retry;
    retry.max_attempts = args.max_attempts;
    std::optional<fs::path> audit;
    if (!global.audit_dir.empty()) audit = fs::path(global.audit_dir);
    ivos::LlmClient client(backend, retry, global.workers, audit,
                           global.seed);

    ivos::PipelineRunOptions options;
    options.config.overlay_frame_count = args.overlay_frames;
    options.stages = parse_stage_list(args.stages);
    options.resume = args.resume;
    const bool needs_frames =
        options.stages.count(1) > 0 || options.stages.count(3) > 0;

    std::vector<const ivos::VideoMeta*> videos;
    for (const auto& [vid, video] : input.videos) videos.push_back(&video);

    std::map<std::string, ivos::VideoMeta> assembled;
    std::mutex assembled_mutex;
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (!g_interrupted.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= videos.size()) return;
            const ivos::VideoMeta& video = *videos[i];
            try {
                std::vector<ivos::RgbImage> frames;
                if (needs_frames) {
                    const fs::path dir =
                        fs::path(args.frames_dir) / video.video_id;
                    frames.reserve(video.frame_names.size());
                    for (const auto& name : video.frame_names) {
                        frames.push_back(ivos::read_png_rgb(dir / name));
                    }
                }
                logger.debug("annotating", {{"video", video.video_id}});
                auto result = ivos::run_pipeline_for_video(
                    video, frames, client, prompts, options,
                    args.out_dir);
                if (result) {
                    std::lock_guard<std::mutex> lock(assembled_mutex);
                    assembled.emplace(result->video_id, std::move(*result));
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const int n = std::max(1, std::min<int>(global.workers,
                                            static_cast<int>(videos.size())));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    if (g_interrupted.load()) {
        logger.info("interrupted; stage files written so far remain valid");
        return 130;
    }

    if (options.stages.count(4)) {
        ivos::DatasetMeta out;
        out.videos = std::move(assembled);
        ivos::save_meta(out, fs::path(args.out_dir) /
                                 "meta_expressions.json");
        const auto t = client.telemetry();
        logger.info("annotation complete",
                    {{"videos", std::to_string(out.videos.size())},
                     {"requests", std::to_string(t.requests)},
                     {"retries", std::to_string(t.retries)}});
    }
    return 0;
}

struct SplitArgs {
    std::string meta_path;
    std::vector<std::string> train_ids;
    std::string train_list;
    double min_fraction = 0.0;
    double downsample = 1.0;
    std::string out_path;
};

int run_build_eval_split(const SplitArgs& args, const GlobalOptions& global) {
    const ivos::DatasetMeta meta = ivos::load_meta(args.meta_path);
    ivos::SplitConfig config;
    config.seed = global.seed;
    config.interaction_min_fraction = args.min_fraction;
    config.single_downsample_rate = args.downsample;
    for (const auto& id : args.train_ids) config.train_video_ids.insert(id);
    if (!args.train_list.empty()) {
        for (const auto& line :
             ivos::split_lines(ivos::read_file(args.train_list))) {
            const std::string id = ivos::trim(line);
            if (!id.empty()) config.train_video_ids.insert(id);
        }
    }
    const ivos::DatasetMeta split = ivos::build_eval_split(meta, config);
    ivos::save_meta(split, args.out_path);
    std::int64_t expressions = 0;
    for (const auto& [vid, video] : split.videos) {
        expressions += static_cast<std::int64_t>(video.expressions.size());
    }
    std::cout << split.videos.size() << " videos, " << expressions
              << " expressions\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, handle_sigint);

    CLI::App app{"interaction-aware referring video object segmentation "
                 "toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--log-level", global.log_level,
                   "debug|info|warn|error (debug switches to JSON lines)");
    app.add_option("--workers", global.workers, "worker thread count")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", global.seed, "seed for all randomness");
    app.add_option("--audit", global.audit_dir,
                   "directory for LLM request/response audit logs");

    std::string validate_meta_path;
    auto* validate_cmd =
        app.add_subcommand("validate", "check a dataset file's invariants");
    validate_cmd->add_option("--meta", validate_meta_path, "dataset file")
        ->required();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "score predictions against ground truth");
    eval_cmd->add_option("--meta", eval_args.meta_path, "dataset file")
        ->required();
    eval_cmd->add_option("--preds", eval_args.preds_path, "prediction file")
        ->required();
    eval_cmd->add_flag("--dual", eval_args.dual,
                       "dual-mask actor-target scoring");
    eval_cmd->add_option("--tolerance", eval_args.tolerance,
                         "boundary tolerance as fraction of the diagonal");
    eval_cmd->add_flag("--skip-empty-gt", eval_args.skip_empty_gt,
                       "exclude frames with empty ground truth");
    eval_cmd->add_option("--out", eval_args.out_path,
                         "write the JSON report here");

    StatsArgs stats_args;
    auto* stats_cmd =
        app.add_subcommand("stats", "dataset statistics and histograms");
    stats_cmd->add_option("--meta", stats_args.meta_path, "dataset file")
        ->required();
    stats_cmd->add_option("--fps", stats_args.fps,
                          "frames per second for duration buckets");
    stats_cmd->add_option("--format", stats_args.format, "text|json|csv");
    stats_cmd->add_option("--out", stats_args.out_path, "output file");

    ClipArgs clip_args;
    auto* clips_cmd = app.add_subcommand(
        "extract-clips", "cut a long source into annotation-ready clips");
    clips_cmd
        ->add_option("--frames", clip_args.frames,
                     "frame directory or list file")
        ->required();
    clips_cmd->add_option("--bin", clip_args.bin, "temporal bin size");
    clips_cmd->add_option("--clip", clip_args.clip, "clip length");
    clips_cmd->add_option("--min-len", clip_args.min_len,
                          "minimum clip length");
    clips_cmd->add_option("--out", clip_args.out_path, "manifest path")
        ->required();

    ImportPngArgs import_args;
    auto* import_cmd = app.add_subcommand(
        "import-png", "build mask tracks from indexed-palette mask PNGs");
    import_cmd->add_option("--masks", import_args.masks_dir,
                           "directory of per-frame mask PNGs")
        ->required();
    import_cmd->add_option("--video-id", import_args.video_id, "video id")
        ->required();
    import_cmd->add_option("--out", import_args.out_path, "dataset file")
        ->required();

    AnnotateArgs annotate_args;
    auto* annotate_cmd = app.add_subcommand(
        "annotate", "run the four-stage annotation pipeline");
    annotate_cmd->add_option("--frames", annotate_args.frames_dir,
                             "root directory of frame images per video");
    annotate_cmd
        ->add_option("--tracks", annotate_args.tracks_path,
                     "dataset file carrying objects and mask tracks")
        ->required();
    annotate_cmd->add_option("--stages", annotate_args.stages,
                             "comma-separated stage list, default 1,2,3,4");
    annotate_cmd->add_option("--backend", annotate_args.backend,
                             "mock|http");
    annotate_cmd
        ->add_option("--prompts", annotate_args.prompts_dir,
                     "prompt template directory")
        ->required();
    annotate_cmd->add_option("--out", annotate_args.out_dir,
                             "output directory")
        ->required();
    annotate_cmd->add_flag("--resume", annotate_args.resume,
                           "reuse existing stage files");
    annotate_cmd->add_option("--mock-replies", annotate_args.mock_replies,
                             "canned replies file for the mock backend");
    annotate_cmd->add_option("--base-url", annotate_args.base_url,
                             "http backend base URL");
    annotate_cmd->add_option("--model", annotate_args.model,
                             "http backend model name");
    annotate_cmd->add_option("--overlay-frames",
                             annotate_args.overlay_frames,
                             "frames attached per vision request");
    annotate_cmd->add_option("--max-attempts", annotate_args.max_attempts,
                             "LLM attempts before a request fails");

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand(
        "build-eval-split",
        "drop training videos and bias the split toward interactions");
    split_cmd->add_option("--meta", split_args.meta_path, "dataset file")
        ->required();
    split_cmd->add_option("--train-id", split_args.train_ids,
                          "training video id (repeatable)");
    split_cmd->add_option("--train-list", split_args.train_list,
                          "file with one training video id per line");
    split_cmd->add_option("--min-interaction-fraction",
                          split_args.min_fraction,
                          "required interaction expression fraction");
    split_cmd->add_option("--single-downsample-rate", split_args.downsample,
                          "fraction of single-object expressions kept");
    split_cmd->add_option("--out", split_args.out_path, "output dataset file")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    Logger logger;
    try {
        logger.level = parse_log_level(global.log_level);
        if (validate_cmd->parsed()) return run_validate(validate_meta_path);
        if (eval_cmd->parsed()) return run_evaluate(eval_args, global, logger);
        if (stats_cmd->parsed()) return run_stats(stats_args);
        if (clips_cmd->parsed()) return run_extract_clips(clip_args);
        if (import_cmd->parsed()) return run_import_png(import_args);
        if (annotate_cmd->parsed()) {
            return run_annotate(annotate_args, global, logger);
        }
        if (split_cmd->parsed()) {
            return run_build_eval_split(split_args, global);
        }
    } catch (const ivos::BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ivos::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
