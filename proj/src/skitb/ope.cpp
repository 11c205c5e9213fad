#include "skitb/ope.hpp"

#include <chrono>
#include <sstream>
#include <tuple>

#include "skitb/error.hpp"
#include "skitb/textio.hpp"

namespace skitb::protocol {

DetectionStream parse_detections(std::string_view doc, std::size_t frame_count) {
    DetectionStream stream(frame_count);
    const auto ls = text::lines(doc);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto line = ls[i];
        if (line.empty() || line.rfind("t,", 0) == 0) continue;
        const auto where = "line " + std::to_string(i + 1);
        const auto f = text::split(line, ',');
        if (f.size() != 6) fail(ErrorCode::Parse, where + ": expected 't,x,y,w,h,score'");
        const auto t = text::parse_int(f[0], where + " field t");
        if (t < 0 || static_cast<std::size_t>(t) >= frame_count) {
            fail(ErrorCode::Parse, where + ": frame " + std::to_string(t) + " outside video of " +
                                       std::to_string(frame_count) + " frames");
        }
        Detection d{{text::parse_double(f[1], where + " field x"), text::parse_double(f[2], where + " field y"),
                     text::parse_double(f[3], where + " field w"), text::parse_double(f[4], where + " field h")},
                    text::parse_double(f[5], where + " field score")};
        if (!d.box.valid()) fail(ErrorCode::Parse, where + ": negative box size");
        if (d.score < 0.0 || d.score > 1.0) fail(ErrorCode::Parse, where + ": score outside [0,1]");
        stream[static_cast<std::size_t>(t)].push_back(d);
    }
    return stream;
}

std::string serialize_detections(const DetectionStream& stream) {
    std::ostringstream out;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        for (const auto& d : stream[t]) {
            out << t << ',' << text::format_double(d.box.x) << ',' << text::format_double(d.box.y) << ','
                << text::format_double(d.box.w) << ',' << text::format_double(d.box.h) << ','
                << text::format_double(d.score) << '\n';
        }
    }
    return out.str();
}

DetectionStream load_detections(const std::string& path, std::size_t frame_count) {
    try {
        return parse_detections(text::read_file(path), frame_count);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw;
        throw Error(e.code(), path + ": " + e.what());
    }
}

std::optional<std::pair<std::size_t, Detection>> select_init_detection(const DetectionStream& stream,
                                                                       double threshold) {
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const Detection* best = nullptr;
        for (const auto& d : stream[t]) {
            if (d.score < threshold) continue;
            if (!best) {
                best = &d;
                continue;
            }
            const auto key = [](const Detection& x) {
                return std::make_tuple(-x.score, -x.box.area(), x.box.x, x.box.y, x.box.w, x.box.h);
            };
            if (key(d) < key(*best)) best = &d;
        }
        if (best) return std::make_pair(t, *best);
    }
    return std::nullopt;
}

FrameContext make_context(const data::MCVideo& video, std::size_t t, const OpeOptions& opts) {
    FrameContext ctx;
    ctx.t = t;
    ctx.dims = video.meta.resolution;
    ctx.timestamp = static_cast<double>(t) / video.meta.fps;
    if (!opts.image_pattern.empty()) {
        std::string path = opts.image_pattern;
        for (auto pos = path.find("{id}"); pos != std::string::npos; pos = path.find("{id}")) {
            path.replace(pos, 4, video.id);
        }
        for (auto pos = path.find("{t}"); pos != std::string::npos; pos = path.find("{t}")) {
            path.replace(pos, 3, std::to_string(t));
        }
        ctx.image_path = std::move(path);
    }
    return ctx;
}

OpeRun run_ope(TrackerBackend& backend, const data::MCVideo& video, const InitPolicy& policy,
               const OpeOptions& opts) {
    if (backend.initialized()) fail(ErrorCode::InvalidArgument, "run_ope: backend must be fresh");
    using Clock = std::chrono::steady_clock;
    const auto seconds = [](Clock::duration d) { return std::chrono::duration<double>(d).count(); };

    std::size_t init_t = 0;
    geom::BBox init_box;
    if (std::holds_alternative<GroundTruthInit>(policy)) {
        init_box = video.frames.front().box;
    } else {
        const auto& det = std::get<DetectorInit>(policy);
        if (!det.stream) fail(ErrorCode::InvalidArgument, "run_ope: detector policy without a detection stream");
        if (det.stream->size() != video.size()) {
            fail(ErrorCode::InvalidArgument, "run_ope: detection stream not aligned to video '" + video.id + "'");
        }
        const auto sel = select_init_detection(*det.stream, det.threshold);
        if (!sel) fail(ErrorCode::NoInit, "video '" + video.id + "': no detection reaches the init threshold");
        init_t = sel->first;
        init_box = sel->second.box;
    }

    OpeRun run;
    run.trace.frames.assign(video.size(), metrics::Prediction{});
    run.trace.init_frame = init_t;
    run.costs.assign(video.size(), 0.0);

    const auto t0 = Clock::now();
    backend.init(make_context(video, init_t, opts), init_box);
    run.init_cost = seconds(Clock::now() - t0);
    run.trace.frames[init_t] = {init_box, 1.0};

    for (std::size_t t = init_t + 1; t < video.size(); ++t) {
        const auto ctx = make_context(video, t, opts);
        const auto start = Clock::now();
        run.trace.frames[t] = backend.update(ctx);
        run.costs[t] = seconds(Clock::now() - start);
    }
    return run;
}

metrics::PredictionTrace parse_trace(std::string_view doc) {
    metrics::PredictionTrace trace;
    const auto ls = text::lines(doc);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto line = ls[i];
        if (line.empty() || line.rfind("t,", 0) == 0) continue;
        const auto where = "line " + std::to_string(i + 1);
        const auto f = text::split(line, ',');
        if (f.size() != 6 && f.size() != 7) fail(ErrorCode::Parse, where + ": expected 't,x,y,w,h,conf[,init]'");
        const auto t = text::parse_int(f[0], where + " field t");
        if (t != static_cast<long long>(trace.frames.size())) {
            fail(ErrorCode::Parse, where + ": expected frame " + std::to_string(trace.frames.size()) + ", got " +
                                       std::to_string(t));
        }
        metrics::Prediction p;
        const bool absent = text::trim(f[1]).empty() && text::trim(f[2]).empty() && text::trim(f[3]).empty() &&
                            text::trim(f[4]).empty();
        if (!absent) {
            p.box = geom::BBox{text::parse_double(f[1], where + " field x"), text::parse_double(f[2], where + " field y"),
                               text::parse_double(f[3], where + " field w"),
                               text::parse_double(f[4], where + " field h")};
            if (!p.box->valid()) fail(ErrorCode::Parse, where + ": negative box size");
        }
        p.confidence = text::trim(f[5]).empty() ? 0.0 : text::parse_double(f[5], where + " field conf");
        if (p.confidence < 0.0 || p.confidence > 1.0) fail(ErrorCode::Parse, where + ": confidence outside [0,1]");
        if (f.size() == 7) {
            if (text::trim(f[6]) != "init") fail(ErrorCode::Parse, where + ": unknown flag '" + std::string(f[6]) + "'");
            if (trace.init_frame) fail(ErrorCode::Parse, where + ": second init row");
            trace.init_frame = static_cast<std::size_t>(t);
        }
        trace.frames.push_back(p);
    }
    return trace;
}

std::string serialize_trace(const metrics::PredictionTrace& trace) {
    std::ostringstream out;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        const auto& p = trace.frames[t];
        out << t << ',';
        if (p.box) {
            out << text::format_double(p.box->x) << ',' << text::format_double(p.box->y) << ','
                << text::format_double(p.box->w) << ',' << text::format_double(p.box->h);
        } else {
            out << ",,,";
        }
        out << ',' << text::format_double(p.confidence);
        if (trace.init_frame && *trace.init_frame == t) out << ",init";
        out << '\n';
    }
    return out.str();
}

metrics::PredictionTrace load_trace(const std::string& path) {
    try {
        return parse_trace(text::read_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw;
        throw Error(e.code(), path + ": " + e.what());
    }
}

TraceBackend::TraceBackend(metrics::PredictionTrace trace, std::string label)
    : trace_(std::move(trace)), label_(std::move(label)) {}

void TraceBackend::do_init(const FrameContext& ctx, const geom::BBox&) {
    if (ctx.t >= trace_.size()) {
        fail(ErrorCode::Backend, label_ + ": trace has " + std::to_string(trace_.size()) +
                                     " rows, cannot initialize at frame " + std::to_string(ctx.t));
    }
}

metrics::Prediction TraceBackend::do_update(const FrameContext& ctx) {
    if (ctx.t >= trace_.size()) {
        fail(ErrorCode::Backend, label_ + ": length mismatch, trace has " + std::to_string(trace_.size()) +
                                     " rows but frame " + std::to_string(ctx.t) + " was requested");
    }
    return trace_.frames[ctx.t];
}

std::unique_ptr<TrackerBackend> trace_backend(const std::string& path) {
    return std::make_unique<TraceBackend>(load_trace(path), "trace:" + path);
}

}  // namespace skitb::protocol
