#include "skitb/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skitb/error.hpp"

namespace skitb::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Shape {
    double cx, cy, w, h;
};

// Random piecewise-linear motion inside [t0, t1]; bounces off the frame margins.
// One camera run: the athlete crosses a fixed camera's view along a straight line at constant
// speed, box area changing linearly with fixed aspect ratio.
void random_run(Rng& rng, const geom::FrameDims& dims, std::size_t t0, std::size_t t1, std::vector<Shape>& out) {
    const double h0 = rng.uniform(60.0, std::min(160.0, dims.height * 0.4));
    const double aspect = rng.uniform(0.4, 0.8);
    const double h1 = h0 * rng.uniform(0.7, 1.4);
    const double hmax = std::max(h0, h1);
    const double mx = hmax * aspect / 2.0 + 5.0;
    const double my = hmax / 2.0 + 5.0;
    const auto point = [&] {
        return std::pair{rng.uniform(mx, std::max(mx, dims.width - mx)), rng.uniform(my, std::max(my, dims.height - my))};
    };
    const auto [cx0, cy0] = point();
    const auto [cx1, cy1] = point();
    const double a0 = aspect * h0 * h0;
    const double a1 = aspect * h1 * h1;
    const double span = t1 > t0 ? static_cast<double>(t1 - t0) : 1.0;
    for (std::size_t t = t0; t <= t1; ++t) {
        const double u = static_cast<double>(t - t0) / span;
        const double area = a0 + u * (a1 - a0);
        const double h = std::sqrt(area / aspect);
        out[t] = {cx0 + u * (cx1 - cx0), cy0 + u * (cy1 - cy0), aspect * h, h};
    }
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull))) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal(double mean, double sigma) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::index(std::size_t n) {
    if (n == 0) fail(ErrorCode::InvalidArgument, "Rng::index: empty range");
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

void validate(const SimConfig& cfg) {
    if (cfg.frames == 0) fail(ErrorCode::Config, "sim: frames must be > 0");
    if (!(cfg.fps > 0.0)) fail(ErrorCode::Config, "sim: fps must be > 0");
    if (!cfg.dims.valid()) fail(ErrorCode::Config, "sim: frame dims must be positive");
    if (cfg.id.empty()) fail(ErrorCode::Config, "sim: id must not be empty");
    std::size_t prev = 0;
    for (const auto c : cfg.cut_points) {
        if (c == 0 || c >= cfg.frames || c <= prev) {
            fail(ErrorCode::Config, "sim: cut points must be strictly increasing within (0, frames)");
        }
        prev = c;
    }
    for (const auto& o : cfg.occlusions) {
        if (o.length == 0 || o.start + o.length > cfg.frames) fail(ErrorCode::Config, "sim: occlusion out of bounds");
    }
    if (cfg.random_occlusions > 0 && (cfg.occlusion_length == 0 || cfg.occlusion_length >= cfg.frames)) {
        fail(ErrorCode::Config, "sim: occlusion length must be in (0, frames)");
    }
    for (std::size_t i = 0; i < cfg.keyframes.size(); ++i) {
        const auto& k = cfg.keyframes[i];
        if (k.t >= cfg.frames || (i > 0 && k.t <= cfg.keyframes[i - 1].t) || k.w < 0.0 || k.h < 0.0) {
            fail(ErrorCode::Config, "sim: keyframes must be strictly increasing in t, inside the video, non-negative size");
        }
    }
}

data::MCVideo gen_mc_sequence(const SimConfig& cfg) {
    validate(cfg);
    std::vector<Shape> path(cfg.frames);
    if (!cfg.keyframes.empty()) {
        const auto& ks = cfg.keyframes;
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            if (t <= ks.front().t) {
                path[t] = {ks.front().cx, ks.front().cy, ks.front().w, ks.front().h};
            } else if (t >= ks.back().t) {
                path[t] = {ks.back().cx, ks.back().cy, ks.back().w, ks.back().h};
            } else {
                const auto hi = std::upper_bound(ks.begin(), ks.end(), t, [](std::size_t v, const Keyframe& k) { return v < k.t; });
                const auto& b = *hi;
                const auto& a = *(hi - 1);
                const double u = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
                path[t] = {a.cx + u * (b.cx - a.cx), a.cy + u * (b.cy - a.cy), a.w + u * (b.w - a.w), a.h + u * (b.h - a.h)};
            }
        }
    } else {
        Rng rng(cfg.seed, kStreamTrajectory);
        std::size_t start = 0;
        for (std::size_t k = 0; k <= cfg.cut_points.size(); ++k) {
            const std::size_t end = k < cfg.cut_points.size() ? cfg.cut_points[k] - 1 : cfg.frames - 1;
            random_run(rng, cfg.dims, start, end, path);
            start = end + 1;
        }
    }

    std::vector<char> occluded(cfg.frames, 0);
    for (const auto& o : cfg.occlusions) std::fill_n(occluded.begin() + static_cast<std::ptrdiff_t>(o.start), o.length, 1);
    if (cfg.random_occlusions > 0) {
        Rng rng(cfg.seed, kStreamOcclusion);
        const std::size_t len = cfg.occlusion_length;
        for (std::size_t placed = 0, attempts = 0; placed < cfg.random_occlusions && attempts < 1000; ++attempts) {
            // Never occlude the first frame: it initializes the trackers.
            const std::size_t s = 1 + rng.index(cfg.frames - len);
            if (s + len > cfg.frames) continue;
            const bool overlaps = std::any_of(occluded.begin() + static_cast<std::ptrdiff_t>(s),
                                              occluded.begin() + static_cast<std::ptrdiff_t>(s + len),
                                              [](char c) { return c != 0; });
            if (overlaps) continue;
            std::fill_n(occluded.begin() + static_cast<std::ptrdiff_t>(s), len, 1);
            ++placed;
        }
    }

    data::MCVideo v;
    v.id = cfg.id;
    v.meta = cfg.meta;
    v.meta.fps = cfg.fps;
    v.meta.resolution = cfg.dims;
    v.frames.reserve(cfg.frames);
    int camera = 1;
    std::size_t next_cut = 0;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
        if (next_cut < cfg.cut_points.size() && cfg.cut_points[next_cut] == t) {
            ++camera;
            ++next_cut;
        }
        const auto& s = path[t];
        const auto box = geom::clip_to_frame(geom::from_center({s.cx, s.cy}, s.w, s.h), cfg.dims);
        v.frames.push_back({t, box, occluded[t] ? data::Visibility::Occluded : data::Visibility::Visible, camera});
    }
    return v;
}

protocol::DetectionStream gen_detections(const data::MCVideo& gt, const NoiseConfig& noise) {
    const auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in01(noise.false_positive_rate) || !in01(noise.miss_rate) || noise.center_sigma < 0.0 ||
        noise.size_sigma < 0.0 || noise.score_sigma < 0.0) {
        fail(ErrorCode::Config, "sim: noise rates must be in [0,1] and sigmas >= 0");
    }
    Rng rng(noise.seed, kStreamDetections);
    const auto& dims = gt.meta.resolution;
    protocol::DetectionStream out(gt.size());
    for (std::size_t t = 0; t < gt.size(); ++t) {
        const auto& f = gt.frames[t];
        // Draw every variate unconditionally so the stream position does not depend on the outcome.
        const bool missed = rng.bernoulli(noise.miss_rate);
        const double dx = rng.normal(0.0, 1.0) * noise.center_sigma;
        const double dy = rng.normal(0.0, 1.0) * noise.center_sigma;
        const double ds = rng.normal(0.0, 1.0) * noise.size_sigma;
        const double dscore = std::abs(rng.normal(0.0, 1.0)) * noise.score_sigma;
        const bool fp = rng.bernoulli(noise.false_positive_rate);
        const double fw = rng.uniform(20.0, 100.0);
        const double fh = rng.uniform(20.0, 100.0);
        const double fx = rng.uniform(0.0, std::max(0.0, dims.width - fw));
        const double fy = rng.uniform(0.0, std::max(0.0, dims.height - fh));
        const double fscore = rng.uniform(0.0, 0.5);

        const bool hidden = noise.suppress_occluded && f.visibility == data::Visibility::Occluded;
        if (!missed && !hidden) {
            geom::BBox b = f.box;
            if (dx != 0.0 || dy != 0.0 || ds != 0.0) {
                const auto c = geom::center(b);
                const double scale = std::max(0.05, 1.0 + ds);
                b = geom::clip_to_frame(geom::from_center({c.x + dx, c.y + dy}, b.w * scale, b.h * scale), dims);
            }
            out[t].push_back({b, std::clamp(1.0 - dscore, 0.0, 1.0)});
        }
        if (fp) out[t].push_back({{fx, fy, fw, fh}, fscore});
    }
    return out;
}

std::vector<data::MCVideo> simulate_dataset(std::size_t count, std::uint64_t seed, std::size_t frames,
                                            std::size_t cameras) {
    if (cameras == 0 || cameras > frames) fail(ErrorCode::Config, "sim: camera count must be in [1, frames]");
    Rng meta_rng(seed, kStreamMetadata);
    constexpr data::Discipline disciplines[] = {data::Discipline::AL, data::Discipline::JP, data::Discipline::FS};
    constexpr data::Weather weathers[] = {data::Weather::Sunny, data::Weather::Cloudy, data::Weather::Harsh};
    constexpr const char* subs[3][2] = {{"slalom", "giant_slalom"}, {"normal_hill", "large_hill"}, {"moguls", "aerials"}};
    constexpr const char* nations[] = {"AUT", "SUI", "NOR", "ITA", "FRA", "USA"};
    constexpr const char* places[] = {"Kitzbuehel", "Wengen", "Planica", "Lillehammer", "Val Gardena", "Deer Valley"};

    std::vector<data::MCVideo> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SimConfig cfg;
        char id[32];
        std::snprintf(id, sizeof(id), "sim%04zu", i);
        cfg.id = id;
        cfg.frames = frames;
        cfg.seed = seed * 1000003ull + i;
        for (std::size_t c = 1; c < cameras; ++c) cfg.cut_points.push_back(c * frames / cameras);
        cfg.cut_points.erase(std::unique(cfg.cut_points.begin(), cfg.cut_points.end()), cfg.cut_points.end());
        std::erase_if(cfg.cut_points, [frames](std::size_t c) { return c == 0 || c >= frames; });
        cfg.random_occlusions = frames >= 120 ? 1 : 0;

        auto& m = cfg.meta;
        const auto d = i % 3;
        m.discipline = disciplines[d];
        m.sub_discipline = subs[d][meta_rng.index(2)];
        m.weather = weathers[meta_rng.index(3)];
        m.athlete_id = "ATH" + std::to_string(meta_rng.index(count / 2 + 1));
        m.athlete_nationality = nations[meta_rng.index(6)];
        const auto place = meta_rng.index(6);
        m.location = places[place];
        m.country = nations[place];
        using namespace std::chrono;
        const sys_days base = year{2021} / January / 1;
        m.date = year_month_day{base + days{static_cast<int>(i * 7 + meta_rng.index(7))}};
        m.performance_params["bib"] = std::to_string(i + 1);
        out.push_back(gen_mc_sequence(cfg));
    }
    return out;
}

ScriptedBackend::ScriptedBackend(std::vector<metrics::Prediction> script, std::string label)
    : script_(std::move(script)), label_(std::move(label)) {}

void ScriptedBackend::do_init(const protocol::FrameContext& ctx, const geom::BBox&) {
    if (ctx.t >= script_.size()) fail(ErrorCode::Backend, label_ + ": script shorter than the sequence");
}

metrics::Prediction ScriptedBackend::do_update(const protocol::FrameContext& ctx) {
    if (ctx.t >= script_.size()) {
        fail(ErrorCode::Backend, label_ + ": script length mismatch at frame " + std::to_string(ctx.t));
    }
    update_frames.push_back(ctx.t);
    return script_[ctx.t];
}

void ScriptedBackend::do_reinit(const protocol::FrameContext& ctx, const geom::BBox&) { reinit_frames.push_back(ctx.t); }

void ScriptedBackend::do_set_reference_box(const geom::BBox& box) { reference_boxes.push_back(box); }

OracleBackend::OracleBackend(data::MCVideo gt, double jitter_sigma, std::vector<double> confidence, std::uint64_t seed)
    : gt_(std::move(gt)), sigma_(jitter_sigma), confidence_(std::move(confidence)), seed_(seed) {
    if (sigma_ < 0.0) fail(ErrorCode::Config, "oracle: jitter sigma must be >= 0");
    if (!confidence_.empty() && confidence_.size() != gt_.size()) {
        fail(ErrorCode::Config, "oracle: confidence schedule length must match the video");
    }
}

void OracleBackend::do_init(const protocol::FrameContext& ctx, const geom::BBox&) {
    if (ctx.t >= gt_.size()) fail(ErrorCode::Backend, "oracle: frame outside the video");
}

metrics::Prediction OracleBackend::do_update(const protocol::FrameContext& ctx) {
    if (ctx.t >= gt_.size()) fail(ErrorCode::Backend, "oracle: frame outside the video");
    update_frames.push_back(ctx.t);
    auto box = gt_.frames[ctx.t].box;
    if (sigma_ > 0.0) {
        Rng frame_rng(seed_ ^ (0x9E3779B97F4A7C15ull * (ctx.t + 1)), kStreamOracle);
        box = geom::translate(box, frame_rng.normal(0.0, sigma_), frame_rng.normal(0.0, sigma_));
    }
    const double conf = confidence_.empty() ? 1.0 : confidence_[ctx.t];
    return {box, conf};
}

void OracleBackend::do_reinit(const protocol::FrameContext& ctx, const geom::BBox&) { reinit_frames.push_back(ctx.t); }

void OracleBackend::do_set_reference_box(const geom::BBox& box) { reference_boxes.push_back(box); }

}  // namespace skitb::sim
