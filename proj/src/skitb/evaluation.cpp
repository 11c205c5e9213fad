#include "skitb/evaluation.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "skitb/fusion.hpp"
#include "skitb/simgen.hpp"
#include "skitb/sort_tracker.hpp"
#include "skitb/textio.hpp"
#include "skitb/wire.hpp"

namespace skitb::eval {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string per_video_file(const std::string& path, const std::string& id) {
    if (fs::is_directory(path)) return (fs::path(path) / (id + ".csv")).string();
    return path;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

std::string fmt(double v) { return text::format_double(v); }

std::vector<std::string> attribute_labels(const data::AttributeSet& a) {
    std::vector<std::string> out;
    for (const auto attr : data::kAllAttributes) {
        if (a.get(attr)) out.emplace_back(data::to_string(attr));
    }
    return out;
}

std::size_t scored_frames(const metrics::PredictionTrace& trace, std::span<const data::FrameAnnotation> gts,
                          bool include_occluded) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < gts.size(); ++t) {
        if (trace.init_frame && *trace.init_frame == t) continue;
        if (!include_occluded && gts[t].visibility == data::Visibility::Occluded) continue;
        ++n;
    }
    return n;
}

Json row_json(const metrics::AggregateRow& r) {
    Json g = Json::object();
    for (std::size_t k = 0; k < metrics::kGsrWindows.size(); ++k) g[std::to_string(metrics::kGsrWindows[k])] = r.gsr[k];
    return Json{{"count", r.count}, {"pr", r.pr}, {"re", r.re}, {"f", r.f}, {"gsr", g}};
}

std::string gsr_header() {
    std::string h;
    for (const auto w : metrics::kGsrWindows) h += ",gsr_" + std::to_string(w);
    return h;
}

std::string gsr_cells(const std::vector<double>& g) {
    std::string s;
    for (const double v : g) s += "," + fmt(v);
    return s;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create directory '" + dir + "': " + ec.message());
}

}  // namespace

std::unique_ptr<protocol::TrackerBackend> make_backend(const std::string& spec, const data::MCVideo& video,
                                                       const std::string& video_path, std::uint64_t seed) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);

    if (kind == "trace") {
        if (arg.empty()) fail(ErrorCode::Config, "backend 'trace' needs a path");
        return std::make_unique<protocol::TraceBackend>(protocol::load_trace(per_video_file(arg, video.id)),
                                                        "trace:" + arg);
    }
    if (kind == "sort" || kind == "sort+reacquire") {
        if (arg.empty()) fail(ErrorCode::Config, "backend '" + kind + "' needs a detection path");
        sort::SortParams params;
        params.reacquire = kind == "sort+reacquire";
        return std::make_unique<sort::SortBackend>(protocol::load_detections(per_video_file(arg, video.id), video.size()),
                                                   params);
    }
    if (kind == "oracle") {
        const double sigma = arg.empty() ? 0.0 : text::parse_double(arg, "oracle jitter");
        return std::make_unique<sim::OracleBackend>(video, sigma, std::vector<double>{}, seed);
    }
    if (kind == "fusion") {
        const auto plus = arg.rfind('+');
        if (plus == std::string::npos) fail(ErrorCode::Config, "backend 'fusion' expects <tracker>+<re-detector>");
        return std::make_unique<fusion::FusionBackend>(fusion::FusionConfig{},
                                                       make_backend(arg.substr(0, plus), video, video_path, seed),
                                                       make_backend(arg.substr(plus + 1), video, video_path, seed + 1));
    }
    if (kind == "extern") {
        std::string target = arg;
        replace_all(target, "{video}", video_path);
        replace_all(target, "{id}", video.id);
        return wire::external_backend(target);
    }
    fail(ErrorCode::Config, "unknown backend '" + spec + "' (expected trace:, sort:, sort+reacquire:, oracle, fusion: or extern:)");
}

protocol::InitPolicy make_init_policy(const std::string& spec, const data::MCVideo& video) {
    if (spec.empty() || spec == "gt") return protocol::GroundTruthInit{};
    if (spec.rfind("detector:", 0) != 0) fail(ErrorCode::Config, "init policy must be 'gt' or 'detector:<path>[:thr]'");
    std::string path = spec.substr(9);
    double threshold = 0.5;
    if (const auto c = path.rfind(':'); c != std::string::npos) {
        try {
            threshold = text::parse_double(path.substr(c + 1), "init threshold");
            path = path.substr(0, c);
        } catch (const Error&) {
            // the colon belongs to the path
        }
    }
    if (threshold < 0.0 || threshold > 1.0) fail(ErrorCode::Config, "init threshold must be in [0,1]");
    protocol::DetectorInit det;
    det.threshold = threshold;
    det.stream = std::make_shared<const protocol::DetectionStream>(
        protocol::load_detections(per_video_file(path, video.id), video.size()));
    return det;
}

SequenceEval evaluate_sequence(const data::MCVideo& video, const std::string& video_path, const EvalConfig& cfg) {
    SequenceEval out;
    out.id = video.id;
    out.path = video_path;
    out.meta = video.meta;
    out.frames = video.size();

    metrics::PredictionTrace trace;
    std::vector<double> costs(video.size(), 0.0);
    try {
        const auto policy = make_init_policy(cfg.init, video);
        auto backend = make_backend(cfg.backend, video, video_path, cfg.seed);
        protocol::OpeOptions opts;
        opts.image_pattern = cfg.image_pattern;
        try {
            auto run = protocol::run_ope(*backend, video, policy, opts);
            trace = std::move(run.trace);
            costs = std::move(run.costs);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoInit) throw;
            out.no_init = true;
            trace.frames.assign(video.size(), metrics::Prediction{});
        }
        if (auto* ext = dynamic_cast<wire::ExternalBackend*>(backend.get())) ext->shutdown();
    } catch (const Error& e) {
        out.ok = false;
        out.error_code = e.code();
        out.error = e.what();
        return out;
    }

    metrics::EvalOptions opts;
    opts.include_occluded = cfg.include_occluded;
    out.init_frame = trace.init_frame;
    out.score = metrics::score_sequence(video.id, trace, video.frames, opts, cfg.gsr_iou);
    for (auto& clip : data::annotate_clips(video)) {
        const auto sub = metrics::slice(trace, clip.start, clip.length());
        const auto gts = std::span(video.frames).subspan(clip.start, clip.length());
        if (scored_frames(sub, gts, cfg.include_occluded) == 0) continue;
        const auto clip_id = video.id + "/" + std::to_string(clip.start) + "-" + std::to_string(clip.end);
        out.clips.push_back({clip, metrics::score_sequence(clip_id, sub, gts, opts, cfg.gsr_iou)});
    }
    out.latency = metrics::latency_profile(costs, video.meta.fps);
    out.ok = true;
    return out;
}

void Report::add(SequenceEval seq) {
    std::lock_guard lock(mutex_);
    seqs_.push_back(std::move(seq));
}

std::vector<SequenceEval> Report::sequences() const {
    std::lock_guard lock(mutex_);
    auto out = seqs_;
    std::sort(out.begin(), out.end(), [](const SequenceEval& a, const SequenceEval& b) { return a.id < b.id; });
    return out;
}

std::size_t Report::failed_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count_if(seqs_.begin(), seqs_.end(), [](const SequenceEval& s) { return !s.ok; }));
}

bool Report::has_protocol_failure() const {
    std::lock_guard lock(mutex_);
    return std::any_of(seqs_.begin(), seqs_.end(),
                       [](const SequenceEval& s) { return s.error_code == ErrorCode::Protocol; });
}

std::optional<metrics::AggregateRow> Report::overall() const {
    std::vector<metrics::SequenceScore> scores;
    for (const auto& s : sequences())
        if (s.ok) scores.push_back(s.score);
    if (scores.empty()) return std::nullopt;
    return metrics::aggregate(scores);
}

std::map<std::string, metrics::AggregateRow> Report::grouped(const std::string& key) const {
    std::vector<metrics::SequenceScore> scores;
    std::vector<std::vector<std::string>> labels;
    for (const auto& s : sequences()) {
        if (!s.ok) continue;
        if (key == "discipline") {
            scores.push_back(s.score);
            labels.push_back({std::string(data::to_string(s.meta.discipline))});
        } else if (key == "weather") {
            scores.push_back(s.score);
            labels.push_back({std::string(data::to_string(s.meta.weather))});
        } else if (key == "attribute") {
            for (const auto& c : s.clips) {
                scores.push_back(c.score);
                labels.push_back(attribute_labels(c.clip.attributes));
            }
        } else {
            fail(ErrorCode::InvalidArgument, "unknown grouping key '" + key + "'");
        }
    }
    return metrics::aggregate_by(scores, labels);
}

std::string Report::summary_json() const {
    Json j;
    j["flags"] = {{"backend", cfg_.backend},
                  {"init", cfg_.init},
                  {"include_occluded", cfg_.include_occluded},
                  {"gsr_iou", cfg_.gsr_iou},
                  {"seed", cfg_.seed}};
    j["gsr_windows"] = metrics::kGsrWindows;
    const auto all = overall();
    j["overall"] = all ? row_json(*all) : Json(nullptr);
    for (const auto* key : {"discipline", "weather", "attribute"}) {
        Json g = Json::object();
        for (const auto& [label, row] : grouped(key)) g[label] = row_json(row);
        j["by_" + std::string(key)] = g;
    }
    Json seqs = Json::array();
    for (const auto& s : sequences()) {
        Json e{{"id", s.id}, {"status", s.ok ? "ok" : "failed"}, {"frames", s.frames}};
        if (s.ok) {
            e["pr"] = s.score.pr;
            e["re"] = s.score.re;
            e["f"] = s.score.f;
            e["tau"] = s.score.tau;
            e["pr_defined"] = s.score.pr_defined;
            e["gsr"] = s.score.gsr;
            e["no_init"] = s.no_init;
            e["mean_delay_s"] = s.latency.mean_delay();
        } else {
            e["error"] = s.error;
        }
        seqs.push_back(e);
    }
    j["sequences"] = seqs;
    j["failed"] = failed_count();
    return j.dump(2) + "\n";
}

void Report::write_gsr(const std::string& out_dir) const {
    ensure_dir(out_dir);
    std::ostringstream per;
    per << "sequence" << gsr_header() << '\n';
    for (const auto& s : sequences()) {
        if (s.ok) per << s.id << gsr_cells(s.score.gsr) << '\n';
    }
    const auto all = overall();
    if (all) per << "overall" << gsr_cells(all->gsr) << '\n';
    text::write_file((fs::path(out_dir) / "gsr.csv").string(), per.str());

    std::ostringstream curve;
    curve << "window_frames,gsr\n";
    if (all) {
        for (std::size_t k = 0; k < metrics::kGsrWindows.size(); ++k) {
            curve << metrics::kGsrWindows[k] << ',' << fmt(all->gsr[k]) << '\n';
        }
    }
    text::write_file((fs::path(out_dir) / "gsr_curve.csv").string(), curve.str());
}

void Report::write_latency(const std::string& out_dir) const {
    ensure_dir(out_dir);
    const auto curves = fs::path(out_dir) / "latency";
    ensure_dir(curves.string());
    std::ostringstream summary;
    summary << "sequence,mean_delay_s,final_delay_s\n";
    for (const auto& s : sequences()) {
        if (!s.ok) continue;
        const double last = s.latency.delay.empty() ? 0.0 : s.latency.delay.back();
        summary << s.id << ',' << fmt(s.latency.mean_delay()) << ',' << fmt(last) << '\n';
        std::ostringstream curve;
        curve << "t,delay_s\n";
        for (std::size_t t = 0; t < s.latency.delay.size(); ++t) curve << t << ',' << fmt(s.latency.delay[t]) << '\n';
        text::write_file((curves / (s.id + ".csv")).string(), curve.str());
    }
    text::write_file((fs::path(out_dir) / "latency.csv").string(), summary.str());
}

void Report::write_manifest(const std::string& out_dir) const {
    ensure_dir(out_dir);
    Json m{{"backend", cfg_.backend},
           {"init", cfg_.init},
           {"include_occluded", cfg_.include_occluded},
           {"gsr_iou", cfg_.gsr_iou},
           {"seed", cfg_.seed},
           {"image_pattern", cfg_.image_pattern},
           {"command_line", cfg_.command_line}};
    Json inputs = Json::array();
    for (const auto& s : sequences()) inputs.push_back({{"id", s.id}, {"path", s.path}});
    m["sequences"] = inputs;
    text::write_file((fs::path(out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

void Report::write(const std::string& out_dir) const {
    ensure_dir(out_dir);
    const auto seqs = sequences();

    std::ostringstream per;
    per << "sequence,discipline,weather,status,frames,init_frame,pr,re,f,tau,pr_defined" << gsr_header()
        << ",mean_delay_s,error\n";
    for (const auto& s : seqs) {
        per << s.id << ',' << data::to_string(s.meta.discipline) << ',' << data::to_string(s.meta.weather) << ','
            << (s.ok ? (s.no_init ? "no_init" : "ok") : "failed") << ',' << s.frames << ','
            << (s.init_frame ? std::to_string(*s.init_frame) : std::string()) << ',';
        if (s.ok) {
            per << fmt(s.score.pr) << ',' << fmt(s.score.re) << ',' << fmt(s.score.f) << ',' << fmt(s.score.tau) << ','
                << (s.score.pr_defined ? 1 : 0) << gsr_cells(s.score.gsr) << ',' << fmt(s.latency.mean_delay()) << ',';
        } else {
            per << ",,,,";
            for (std::size_t k = 0; k < metrics::kGsrWindows.size(); ++k) per << ',';
            std::string msg = s.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            per << ",," << msg;
        }
        per << '\n';
    }
    text::write_file((fs::path(out_dir) / "sequences.csv").string(), per.str());

    std::ostringstream agg;
    agg << "group_type,group,count,pr,re,f" << gsr_header() << '\n';
    auto emit = [&agg](const std::string& type, const std::string& label, const metrics::AggregateRow& r) {
        agg << type << ',' << label << ',' << r.count << ',' << fmt(r.pr) << ',' << fmt(r.re) << ',' << fmt(r.f)
            << gsr_cells(r.gsr) << '\n';
    };
    if (const auto all = overall()) emit("overall", "all", *all);
    for (const auto* key : {"discipline", "weather", "attribute"}) {
        for (const auto& [label, row] : grouped(key)) emit(key, label, row);
    }
    text::write_file((fs::path(out_dir) / "aggregate.csv").string(), agg.str());

    text::write_file((fs::path(out_dir) / "summary.json").string(), summary_json());
    write_gsr(out_dir);
    write_latency(out_dir);
    write_manifest(out_dir);
}

std::vector<std::string> list_annotation_files(const std::string& dataset_dir) {
    if (!fs::is_directory(dataset_dir)) fail(ErrorCode::Config, "dataset directory '" + dataset_dir + "' not found");
    fs::path dir = fs::path(dataset_dir) / "annotations";
    if (!fs::is_directory(dir)) dir = dataset_dir;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

void write_simulated_dataset(const std::string& out_dir, const SimulationSpec& spec) {
    const auto videos = sim::simulate_dataset(spec.videos, spec.seed, spec.frames, spec.cameras);
    const fs::path root(out_dir);
    ensure_dir((root / "annotations").string());
    ensure_dir((root / "detections").string());
    ensure_dir((root / "traces" / "oracle").string());
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const auto& v = videos[i];
        data::save_annotations(v, (root / "annotations" / (v.id + ".txt")).string());
        sim::NoiseConfig noise;
        noise.center_sigma = spec.detection_center_sigma;
        noise.size_sigma = spec.detection_size_sigma;
        noise.false_positive_rate = spec.false_positive_rate;
        noise.miss_rate = spec.miss_rate;
        noise.seed = spec.seed * 7919ull + i;
        text::write_file((root / "detections" / (v.id + ".csv")).string(),
                         protocol::serialize_detections(sim::gen_detections(v, noise)));
        metrics::PredictionTrace oracle;
        for (const auto& f : v.frames) oracle.frames.push_back({f.box, 1.0});
        oracle.init_frame = 0;
        text::write_file((root / "traces" / "oracle" / (v.id + ".csv")).string(), protocol::serialize_trace(oracle));
    }
    Json m{{"videos", spec.videos},
           {"frames", spec.frames},
           {"cameras", spec.cameras},
           {"seed", spec.seed},
           {"detection_center_sigma", spec.detection_center_sigma},
           {"detection_size_sigma", spec.detection_size_sigma},
           {"false_positive_rate", spec.false_positive_rate},
           {"miss_rate", spec.miss_rate}};
    text::write_file((root / "manifest.json").string(), m.dump(2) + "\n");
}

std::string format_split(const data::Split& split, std::span<const data::MCVideo> videos,
                         data::SplitCondition condition) {
    std::map<std::string, const data::MCVideo*> by_id;
    for (const auto& v : videos) by_id[v.id] = &v;
    auto stats = [&](const std::vector<std::string>& ids) {
        std::size_t clips = 0, frames = 0;
        double mc_seconds = 0.0, sc_seconds = 0.0;
        std::set<std::string> subs, athletes, nations, locations, countries;
        std::map<std::string, std::size_t> per_disc;
        for (const auto& id : ids) {
            const auto& v = *by_id.at(id);
            const auto cs = data::segment_clips(v);
            clips += cs.size();
            frames += v.size();
            mc_seconds += static_cast<double>(v.size()) / v.meta.fps;
            for (const auto& c : cs) sc_seconds += static_cast<double>(c.length()) / v.meta.fps;
            subs.insert(std::string(data::to_string(v.meta.discipline)) + "/" + v.meta.sub_discipline);
            athletes.insert(v.meta.athlete_id);
            nations.insert(v.meta.athlete_nationality);
            locations.insert(v.meta.location);
            countries.insert(v.meta.country);
            per_disc[std::string(data::to_string(v.meta.discipline))]++;
        }
        const double n = ids.empty() ? 1.0 : static_cast<double>(ids.size());
        return Json{{"mc_videos", ids.size()},
                    {"sc_videos", clips},
                    {"frames", frames},
                    {"avg_mc_video_seconds", mc_seconds / n},
                    {"avg_sc_video_seconds", clips ? sc_seconds / static_cast<double>(clips) : 0.0},
                    {"sub_disciplines", subs.size()},
                    {"athletes", athletes.size()},
                    {"athlete_nationalities", nations.size()},
                    {"locations", locations.size()},
                    {"location_countries", countries.size()},
                    {"per_discipline", per_disc}};
    };
    Json j{{"condition", data::to_string(condition)},
           {"train", split.train},
           {"test", split.test},
           {"stats", {{"train", stats(split.train)}, {"test", stats(split.test)}}}};
    return j.dump(2) + "\n";
}

std::string format_attributes(std::span<const data::MCVideo> videos) {
    std::ostringstream out;
    out << "video,camera_id,start,end";
    for (const auto a : data::kAllAttributes) out << ',' << data::to_string(a);
    out << '\n';
    for (const auto& v : videos) {
        for (const auto& c : data::annotate_clips(v)) {
            out << v.id << ',' << c.camera_id << ',' << c.start << ',' << c.end;
            for (const auto a : data::kAllAttributes) out << ',' << (c.attributes.get(a) ? 1 : 0);
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace skitb::eval
