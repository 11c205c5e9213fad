#include "skitb/skitb.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "skitb/datamodel.hpp"
#include "skitb/error.hpp"
#include "skitb/evaluation.hpp"
#include "skitb/geometry.hpp"
#include "skitb/metrics.hpp"
#include "skitb/ope.hpp"
#include "skitb/textio.hpp"

struct skitb_video {
    skitb::data::MCVideo video;
    std::string path;
};

struct skitb_trace {
    skitb::metrics::PredictionTrace trace;
};

struct skitb_backend {
    std::unique_ptr<skitb::protocol::TrackerBackend> impl;
};

struct skitb_report {
    std::unique_ptr<skitb::eval::Report> impl;
};

namespace {

thread_local std::string g_last_error;

skitb_status to_status(skitb::ErrorCode code) {
    using skitb::ErrorCode;
    switch (code) {
        case ErrorCode::InvalidArgument: return SKITB_ERR_INVALID_ARGUMENT;
        case ErrorCode::Parse: return SKITB_ERR_PARSE;
        case ErrorCode::Invariant: return SKITB_ERR_INVARIANT;
        case ErrorCode::NoInit: return SKITB_ERR_NO_INIT;
        case ErrorCode::Backend: return SKITB_ERR_BACKEND;
        case ErrorCode::Protocol: return SKITB_ERR_PROTOCOL;
        case ErrorCode::Io: return SKITB_ERR_IO;
        case ErrorCode::Config: return SKITB_ERR_CONFIG;
    }
    return SKITB_ERR_INTERNAL;
}

skitb_status set_error(skitb_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

template <class F>
skitb_status guarded(F&& f) {
    try {
        f();
        return SKITB_OK;
    } catch (const skitb::Error& e) {
        return set_error(to_status(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(SKITB_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(SKITB_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(SKITB_ERR_INTERNAL, "unknown error");
    }
}

void require(bool cond, const char* what) {
    if (!cond) skitb::fail(skitb::ErrorCode::InvalidArgument, what);
}

skitb::geom::BBox to_box(skitb_box b) { return {b.x, b.y, b.w, b.h}; }
skitb_box from_box(const skitb::geom::BBox& b) { return {b.x, b.y, b.w, b.h}; }

void fill_scores(const skitb::metrics::SequenceScore& s, skitb_scores* out) {
    out->pr = s.pr;
    out->re = s.re;
    out->f = s.f;
    out->tau = s.tau;
    out->pr_defined = s.pr_defined ? 1 : 0;
    for (std::size_t k = 0; k < SKITB_GSR_WINDOWS; ++k) out->gsr[k] = k < s.gsr.size() ? s.gsr[k] : 0.0;
}

std::vector<skitb::data::MCVideo> collect(const skitb_video* const* videos, std::size_t n) {
    require(videos != nullptr || n == 0, "videos must not be null");
    std::vector<skitb::data::MCVideo> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(videos[i] != nullptr, "null video handle");
        out.push_back(videos[i]->video);
    }
    return out;
}

}  // namespace

extern "C" {

const char* skitb_version(void) { return "1.0.0"; }

const char* skitb_last_error(void) { return g_last_error.c_str(); }

const char* skitb_status_name(skitb_status status) {
    switch (status) {
        case SKITB_OK: return "ok";
        case SKITB_ERR_INVALID_ARGUMENT: return "invalid argument";
        case SKITB_ERR_PARSE: return "parse error";
        case SKITB_ERR_INVARIANT: return "invariant violation";
        case SKITB_ERR_NO_INIT: return "no initialization";
        case SKITB_ERR_BACKEND: return "backend failure";
        case SKITB_ERR_PROTOCOL: return "protocol failure";
        case SKITB_ERR_IO: return "i/o error";
        case SKITB_ERR_CONFIG: return "configuration error";
        case SKITB_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

double skitb_iou(skitb_box a, skitb_box b) { return skitb::geom::iou(to_box(a), to_box(b)); }

skitb_status skitb_relocalization_reference(skitb_box prev_confident, skitb_dims dims, double factor, skitb_box* out) {
    return guarded([&] {
        require(out != nullptr, "out must not be null");
        *out = from_box(skitb::geom::relocalization_reference(to_box(prev_confident), {dims.width, dims.height}, factor));
    });
}

skitb_status skitb_video_load(const char* path, skitb_video** out) {
    return guarded([&] {
        require(path && out, "path and out must not be null");
        auto v = std::make_unique<skitb_video>();
        v->video = skitb::data::load_annotations(path);
        v->path = path;
        *out = v.release();
    });
}

skitb_status skitb_video_parse(const char* doc, size_t len, skitb_video** out) {
    return guarded([&] {
        require((doc || len == 0) && out, "doc and out must not be null");
        auto v = std::make_unique<skitb_video>();
        v->video = skitb::data::parse_annotations(std::string_view(doc ? doc : "", len));
        *out = v.release();
    });
}

skitb_status skitb_video_save(const skitb_video* video, const char* path) {
    return guarded([&] {
        require(video && path, "video and path must not be null");
        skitb::data::save_annotations(video->video, path);
    });
}

void skitb_video_free(skitb_video* video) { delete video; }

const char* skitb_video_id(const skitb_video* video) { return video ? video->video.id.c_str() : ""; }

size_t skitb_video_frame_count(const skitb_video* video) { return video ? video->video.size() : 0; }

double skitb_video_fps(const skitb_video* video) { return video ? video->video.meta.fps : 0.0; }

skitb_status skitb_video_frame(const skitb_video* video, size_t t, skitb_box* box, int* occluded, int* camera_id) {
    return guarded([&] {
        require(video != nullptr, "video must not be null");
        require(t < video->video.size(), "frame index out of range");
        const auto& f = video->video.frames[t];
        if (box) *box = from_box(f.box);
        if (occluded) *occluded = f.visibility == skitb::data::Visibility::Occluded ? 1 : 0;
        if (camera_id) *camera_id = f.camera_id;
    });
}

skitb_status skitb_video_clips(const skitb_video* video, skitb_clip* out, size_t capacity, size_t* count) {
    return guarded([&] {
        require(video && count, "video and count must not be null");
        require(out || capacity == 0, "out must not be null when capacity > 0");
        const auto clips = skitb::data::annotate_clips(video->video);
        *count = clips.size();
        for (std::size_t i = 0; i < clips.size() && i < capacity; ++i) {
            unsigned bits = 0;
            for (std::size_t a = 0; a < skitb::data::kAttributeCount; ++a) {
                if (clips[i].attributes.flags[a]) bits |= 1u << a;
            }
            out[i] = {clips[i].camera_id, clips[i].start, clips[i].end, bits};
        }
    });
}

skitb_status skitb_trace_load(const char* path, skitb_trace** out) {
    return guarded([&] {
        require(path && out, "path and out must not be null");
        auto t = std::make_unique<skitb_trace>();
        t->trace = skitb::protocol::load_trace(path);
        *out = t.release();
    });
}

skitb_status skitb_trace_save(const skitb_trace* trace, const char* path) {
    return guarded([&] {
        require(trace && path, "trace and path must not be null");
        skitb::text::write_file(path, skitb::protocol::serialize_trace(trace->trace));
    });
}

void skitb_trace_free(skitb_trace* trace) { delete trace; }

size_t skitb_trace_size(const skitb_trace* trace) { return trace ? trace->trace.size() : 0; }

skitb_status skitb_trace_frame(const skitb_trace* trace, size_t t, skitb_box* box, int* present, double* confidence) {
    return guarded([&] {
        require(trace != nullptr, "trace must not be null");
        require(t < trace->trace.size(), "frame index out of range");
        const auto& p = trace->trace.frames[t];
        if (present) *present = p.box ? 1 : 0;
        if (box && p.box) *box = from_box(*p.box);
        if (confidence) *confidence = p.confidence;
    });
}

skitb_status skitb_backend_create(const char* spec, const skitb_video* video, const char* video_path, uint64_t seed,
                                  skitb_backend** out) {
    return guarded([&] {
        require(spec && video && out, "spec, video and out must not be null");
        auto b = std::make_unique<skitb_backend>();
        const std::string path = video_path ? video_path : video->path;
        b->impl = skitb::eval::make_backend(spec, video->video, path, seed);
        *out = b.release();
    });
}

void skitb_backend_free(skitb_backend* backend) { delete backend; }

skitb_status skitb_run_ope(skitb_backend* backend, const skitb_video* video, const char* init, skitb_trace** trace,
                           double* costs) {
    return guarded([&] {
        require(backend && video && trace, "backend, video and trace must not be null");
        const auto policy = skitb::eval::make_init_policy(init ? init : "gt", video->video);
        auto run = skitb::protocol::run_ope(*backend->impl, video->video, policy);
        if (costs) std::memcpy(costs, run.costs.data(), run.costs.size() * sizeof(double));
        auto t = std::make_unique<skitb_trace>();
        t->trace = std::move(run.trace);
        *trace = t.release();
    });
}

skitb_status skitb_score(const skitb_trace* trace, const skitb_video* video, const skitb_eval_flags* flags,
                         skitb_scores* out) {
    return guarded([&] {
        require(trace && video && out, "trace, video and out must not be null");
        skitb::metrics::EvalOptions opts;
        double gsr_iou = 0.5;
        if (flags) {
            opts.include_occluded = flags->include_occluded != 0;
            gsr_iou = flags->gsr_iou;
        }
        fill_scores(skitb::metrics::score_sequence(video->video.id, trace->trace, video->video.frames, opts, gsr_iou),
                    out);
    });
}

skitb_status skitb_latency(const double* costs, size_t n, double fps, double* delays) {
    return guarded([&] {
        require((costs && delays) || n == 0, "costs and delays must not be null");
        const auto prof = skitb::metrics::latency_profile(std::span<const double>(costs, n), fps);
        for (std::size_t t = 0; t < n; ++t) delays[t] = prof.delay[t];
    });
}

skitb_status skitb_report_create(const skitb_eval_config* config, skitb_report** out) {
    return guarded([&] {
        require(config && out, "config and out must not be null");
        require(config->backend != nullptr, "config.backend must not be null");
        skitb::eval::EvalConfig cfg;
        cfg.backend = config->backend;
        cfg.init = config->init ? config->init : "gt";
        cfg.include_occluded = config->include_occluded != 0;
        cfg.gsr_iou = config->gsr_iou;
        cfg.seed = config->seed;
        if (config->image_pattern) cfg.image_pattern = config->image_pattern;
        if (config->command_line) cfg.command_line = config->command_line;
        require(cfg.gsr_iou >= 0.0 && cfg.gsr_iou <= 1.0, "gsr_iou must be in [0,1]");
        auto r = std::make_unique<skitb_report>();
        r->impl = std::make_unique<skitb::eval::Report>(std::move(cfg));
        *out = r.release();
    });
}

void skitb_report_free(skitb_report* report) { delete report; }

skitb_status skitb_report_evaluate(skitb_report* report, const char* annotation_path) {
    skitb::eval::SequenceEval seq;
    const auto status = guarded([&] {
        require(report && annotation_path, "report and annotation_path must not be null");
        const auto video = skitb::data::load_annotations(annotation_path);
        seq = skitb::eval::evaluate_sequence(video, annotation_path, report->impl->config());
    });
    if (status != SKITB_OK) {
        if (!report || !annotation_path) return status;
        // Unreadable annotation: recorded as a failed sequence under its file name.
        seq.id = annotation_path;
        seq.path = annotation_path;
        seq.ok = false;
        seq.error = g_last_error;
        report->impl->add(std::move(seq));
        return status;
    }
    const bool ok = seq.ok;
    const auto code = seq.error_code;
    const auto message = seq.error;
    report->impl->add(std::move(seq));
    if (!ok) return set_error(code ? to_status(*code) : SKITB_ERR_INTERNAL, message);
    return SKITB_OK;
}

skitb_status skitb_report_overall(const skitb_report* report, skitb_scores* out, size_t* succeeded, size_t* failed) {
    return guarded([&] {
        require(report && out, "report and out must not be null");
        const auto all = report->impl->overall();
        const auto n_failed = report->impl->failed_count();
        const auto n_total = report->impl->sequences().size();
        if (succeeded) *succeeded = n_total - n_failed;
        if (failed) *failed = n_failed;
        if (!all) skitb::fail(skitb::ErrorCode::InvalidArgument, "no successfully evaluated sequence");
        skitb::metrics::SequenceScore s;
        s.pr = all->pr;
        s.re = all->re;
        s.f = all->f;
        s.gsr = all->gsr;
        s.pr_defined = true;
        fill_scores(s, out);
    });
}

int skitb_report_has_protocol_failure(const skitb_report* report) {
    return report && report->impl->has_protocol_failure() ? 1 : 0;
}

skitb_status skitb_report_write(const skitb_report* report, const char* out_dir, const char* what) {
    return guarded([&] {
        require(report && out_dir, "report and out_dir must not be null");
        const std::string kind = what ? what : "all";
        if (kind == "all") {
            report->impl->write(out_dir);
        } else if (kind == "gsr") {
            report->impl->write_gsr(out_dir);
            report->impl->write_manifest(out_dir);
        } else if (kind == "latency") {
            report->impl->write_latency(out_dir);
            report->impl->write_manifest(out_dir);
        } else {
            skitb::fail(skitb::ErrorCode::InvalidArgument, "unknown report kind '" + kind + "'");
        }
    });
}

skitb_status skitb_dataset_list(const char* dataset_dir, void (*visit)(const char* path, void* user), void* user) {
    return guarded([&] {
        require(dataset_dir && visit, "dataset_dir and visit must not be null");
        for (const auto& p : skitb::eval::list_annotation_files(dataset_dir)) visit(p.c_str(), user);
    });
}

skitb_status skitb_simulate(const char* out_dir, const skitb_simulation* spec) {
    return guarded([&] {
        require(out_dir && spec, "out_dir and spec must not be null");
        skitb::eval::SimulationSpec s;
        s.videos = spec->videos;
        s.frames = spec->frames;
        s.cameras = spec->cameras;
        s.seed = spec->seed;
        s.detection_center_sigma = spec->detection_center_sigma;
        s.detection_size_sigma = spec->detection_size_sigma;
        s.false_positive_rate = spec->false_positive_rate;
        s.miss_rate = spec->miss_rate;
        skitb::eval::write_simulated_dataset(out_dir, s);
    });
}

skitb_status skitb_split(const skitb_video* const* videos, size_t n, const char* condition, double train_fraction,
                         uint64_t seed, const char* out_path) {
    return guarded([&] {
        require(condition && out_path, "condition and out_path must not be null");
        const auto vs = collect(videos, n);
        const auto cond = skitb::data::parse_split_condition(condition);
        const auto split = skitb::data::generate_splits(vs, cond, train_fraction, seed);
        skitb::text::write_file(out_path, skitb::eval::format_split(split, vs, cond));
    });
}

skitb_status skitb_attributes_write(const skitb_video* const* videos, size_t n, const char* out_path) {
    return guarded([&] {
        require(out_path != nullptr, "out_path must not be null");
        skitb::text::write_file(out_path, skitb::eval::format_attributes(collect(videos, n)));
    });
}

}  // extern "C"
