#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "skitb/error.hpp"
#include "skitb/metrics.hpp"
#include "support.hpp"

using namespace skitb;
using namespace skitb::metrics;
using geom::BBox;

namespace {

// Four frames of the same box; frame 0 is an extra init frame so that the four listed frames are scored.
struct FourFrame {
    data::MCVideo video;
    PredictionTrace trace;
    FourFrame() {
        video = testing::make_video(std::vector<BBox>(5, {0, 0, 10, 10}));
        trace.init_frame = 0;
        trace.frames = {{BBox{0, 0, 10, 10}, 1.0},
                        {BBox{0, 0, 10, 10}, 0.9},
                        {BBox{0, 0, 10, 10}, 0.9},
                        {BBox{5, 0, 10, 10}, 0.9},
                        {BBox{100, 100, 10, 10}, 0.2}};
    }
};

// Twelve-frame trace shared with tests/oracles/metrics_oracle.py.
struct TwelveFrame {
    data::MCVideo video;
    PredictionTrace trace;
    TwelveFrame() {
        std::vector<BBox> gt;
        for (int t = 0; t < 12; ++t) gt.push_back({10.0 * t, 50, 40, 40});
        video = testing::make_video(gt);
        video.frames[5].visibility = data::Visibility::Occluded;
        video.frames[6].visibility = data::Visibility::Occluded;
        const std::vector<std::pair<double, double>> p = {{0, 1.0},  {0, 0.9},    {4, 0.8},  {10, 0.7},
                                                          {NAN, 0.1}, {30, 0.2}, {50, 0.3}, {2, 0.95},
                                                          {20, 0.6}, {0, 0.6},   {NAN, 0.0}, {8, 0.4}};
        trace.init_frame = 0;
        for (int t = 0; t < 12; ++t) {
            const auto [dx, c] = p[t];
            if (std::isnan(dx)) {
                trace.frames.push_back({std::nullopt, c});
            } else {
                trace.frames.push_back({geom::translate(gt[t], dx, 0), c});
            }
        }
    }
};

PredictionTrace wrong_at(const data::MCVideo& v, std::initializer_list<std::size_t> wrong) {
    auto tr = testing::exact_trace(v);
    for (const auto t : wrong) tr.frames[t].box = geom::translate(v.frames[t].box, 1000, 1000);
    return tr;
}

}  // namespace

TEST_CASE("four-frame precision, recall and F") {
    const FourFrame ex;
    const auto at = pr_re(ex.trace, ex.video.frames, 0.5);
    CHECK(at.pr == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
    CHECK(at.re == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
    CHECK(at.reported == 3);
    CHECK(at.scored == 4);
    CHECK(std::abs(at.pr - 0.7778) < 1e-4);
    CHECK(std::abs(at.re - 0.5833) < 1e-4);
    CHECK(f_score(at.pr, at.re) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    const auto low = pr_re(ex.trace, ex.video.frames, 0.1);
    CHECK(f_score(low.pr, low.re) == doctest::Approx(7.0 / 12.0).epsilon(1e-12));

    const auto best = fscore_optimize(ex.trace, ex.video.frames);
    CHECK(std::abs(best.f_best - 2.0 / 3.0) < 1e-9);
    CHECK(best.tau_best == 0.9);
    CHECK(best.thresholds == std::vector<double>{0.0, 0.2, 0.9, 1.0});
    for (const double f : best.f) CHECK(f <= best.f_best);
}

TEST_CASE("degenerate traces") {
    const auto v = testing::make_video(std::vector<BBox>(6, {3, 3, 20, 20}));
    const auto oracle = testing::exact_trace(v);
    for (const double tau : {0.0, 0.3, 1.0}) {
        const auto r = pr_re(oracle, v.frames, tau);
        CHECK(r.pr == 1.0);
        CHECK(r.re == 1.0);
    }
    CHECK(fscore_optimize(oracle, v.frames).f_best == 1.0);

    PredictionTrace absent;
    absent.init_frame = 0;
    absent.frames.assign(6, {std::nullopt, 0.0});
    absent.frames[0] = {v.frames[0].box, 1.0};
    const auto r = pr_re(absent, v.frames, 0.0);
    CHECK(r.re == 0.0);
    CHECK(r.pr == 0.0);
    CHECK_FALSE(r.pr_defined);
    CHECK(fscore_optimize(absent, v.frames).f_best == 0.0);
    CHECK(f_score(0.0, 0.0) == 0.0);

    SUBCASE("length mismatch") {
        auto short_trace = oracle;
        short_trace.frames.pop_back();
        CHECK_THROWS_AS(pr_re(short_trace, v.frames, 0.5), Error);
    }
}

TEST_CASE("twelve-frame trace matches the reference implementation") {
    const TwelveFrame ex;
    const auto all = fscore_optimize(ex.trace, ex.video.frames);
    CHECK(all.f_best == doctest::Approx(0.5914381914381914).epsilon(1e-12));
    CHECK(all.tau_best == 0.4);
    CHECK(all.pr_best == doctest::Approx(0.7604205318491034).epsilon(1e-12));
    CHECK(all.re_best == doctest::Approx(0.4839039748130658).epsilon(1e-12));

    EvalOptions visible;
    visible.include_occluded = false;
    const auto vis = fscore_optimize(ex.trace, ex.video.frames, visible);
    CHECK(vis.f_best == doctest::Approx(0.6653679653679655).epsilon(1e-12));
    CHECK(vis.tau_best == 0.0);
    CHECK(vis.pr_best == doctest::Approx(0.7604205318491034).epsilon(1e-12));
    CHECK(vis.re_best == doctest::Approx(0.5914381914381915).epsilon(1e-12));

    const auto curve = gsr_curve(ex.trace, ex.video.frames);
    CHECK(curve == std::vector<double>{1.0 / 3.0, 1, 1, 1, 1, 1, 1});
    CHECK(gsr(ex.trace, ex.video.frames, 2) == 1.0 / 3.0);
    CHECK(gsr(ex.trace, ex.video.frames, 1, 0.5, false) == 1.0);
}

TEST_CASE("gsr") {
    const auto v = testing::make_video(std::vector<BBox>(10, {0, 0, 10, 10}));
    const auto tr = wrong_at(v, {4, 5});
    CHECK(gsr(tr, v.frames, 1) == 0.4);
    CHECK(gsr(tr, v.frames, 2) == 1.0);
    CHECK(gsr_curve(tr, v.frames) == std::vector<double>{0.4, 1, 1, 1, 1, 1, 1});
    CHECK(gsr_curve(testing::exact_trace(v), v.frames) == std::vector<double>(7, 1.0));
    CHECK_THROWS_AS(gsr(tr, v.frames, 0), Error);

    SUBCASE("absent after frame k") {
        for (std::size_t k = 1; k < 9; ++k) {
            auto t = testing::exact_trace(v);
            for (std::size_t i = k; i < 10; ++i) t.frames[i].box.reset();
            CHECK(gsr(t, v.frames, 1) == static_cast<double>(k) / 10.0);
        }
    }
    SUBCASE("iou threshold is exclusive below") {
        auto t = testing::exact_trace(v);
        t.frames[3].box = BBox{0, 0, 10, 20};  // IoU exactly 0.5
        t.frames[4].box = BBox{0, 0, 10, 20};
        CHECK(gsr(t, v.frames, 1) == 1.0);
        CHECK(gsr(t, v.frames, 1, 0.51) == 0.3);
    }
    SUBCASE("occluded frames are skipped when excluded") {
        auto w = v;
        w.frames[5].visibility = data::Visibility::Occluded;
        const auto t = wrong_at(w, {4, 5, 6});
        CHECK(gsr(t, w.frames, 2) == 0.4);
        CHECK(gsr(t, w.frames, 2, 0.5, false) == 1.0);
    }
    SUBCASE("monotone in the window and on the k/T lattice") {
        std::mt19937_64 rng(4);
        for (int n = 0; n < 300; ++n) {
            const std::size_t len = 2 + rng() % 120;
            const auto w = testing::make_video(std::vector<BBox>(len, {0, 0, 10, 10}));
            auto t = testing::exact_trace(w);
            for (std::size_t i = 1; i < len; ++i) {
                if (rng() % 4 == 0) t.frames[i].box.reset();
            }
            double prev = 0.0;
            for (std::size_t win = 1; win <= 100; ++win) {
                const double g = gsr(t, w.frames, win);
                CHECK(g >= prev);
                const double k = g * static_cast<double>(len);
                CHECK((g == 1.0 || std::abs(k - std::round(k)) < 1e-9));
                prev = g;
            }
        }
    }
}

TEST_CASE("mean overlap equals the integral of the success curve") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 100; ++n) {
        const std::size_t len = 20 + rng() % 100;
        std::vector<BBox> gt;
        for (std::size_t t = 0; t < len; ++t) gt.push_back({u(rng) * 500, u(rng) * 500, 20 + u(rng) * 80, 20 + u(rng) * 80});
        const auto v = testing::make_video(gt);
        auto tr = testing::exact_trace(v);
        for (std::size_t t = 1; t < len; ++t) {
            const double r = u(rng);
            if (r < 0.1) {
                tr.frames[t] = {std::nullopt, u(rng)};
            } else {
                const auto& g = gt[t];
                tr.frames[t] = {BBox{g.x + (u(rng) - 0.5) * g.w, g.y + (u(rng) - 0.5) * g.h, g.w * (0.5 + u(rng)), g.h},
                                u(rng)};
            }
        }
        const double tau = u(rng) * 0.5;
        const auto plain = pr_re(tr, v.frames, tau);
        // Riemann sum at 1000 midpoints of success rate over the IoU threshold.
        double pr_int = 0.0, re_int = 0.0;
        for (int k = 0; k < 1000; ++k) {
            EvalOptions o;
            o.success_iou = (k + 0.5) / 1000.0;
            const auto s = pr_re(tr, v.frames, tau, o);
            pr_int += s.pr / 1000.0;
            re_int += s.re / 1000.0;
        }
        CHECK(std::abs(pr_int - plain.pr) < 1e-3);
        CHECK(std::abs(re_int - plain.re) < 1e-3);

        // Pr at tau = 0 with every box present is the plain mean IoU.
        auto full = tr;
        for (std::size_t t = 1; t < len; ++t) {
            if (!full.frames[t].box) full.frames[t].box = gt[t];
        }
        double mean = 0.0;
        for (std::size_t t = 1; t < len; ++t) mean += geom::iou(*full.frames[t].box, gt[t]);
        mean /= static_cast<double>(len - 1);
        CHECK(pr_re(full, v.frames, 0.0).pr == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("init frame handling") {
    const auto v = testing::make_video(std::vector<BBox>(6, {0, 0, 10, 10}));
    PredictionTrace tr;
    tr.init_frame = 2;
    tr.frames = {{std::nullopt, 0.0}, {std::nullopt, 0.0}, {v.frames[2].box, 1.0},
                 {v.frames[3].box, 1.0}, {v.frames[4].box, 1.0}, {v.frames[5].box, 1.0}};
    const auto r = pr_re(tr, v.frames, 0.5);
    CHECK(r.scored == 5);  // frames before init count as missed
    CHECK(r.re == doctest::Approx(3.0 / 5.0));
    CHECK(r.pr == 1.0);
    CHECK(gsr(tr, v.frames, 1) == 0.0);
    CHECK(gsr(tr, v.frames, 2) == 1.0);

    const auto s = slice(tr, 3, 3);
    CHECK(s.size() == 3);
    CHECK_FALSE(s.init_frame.has_value());
    CHECK(slice(tr, 1, 3).init_frame == std::optional<std::size_t>(1));
}

TEST_CASE("latency") {
    SUBCASE("no backlog") {
        const std::vector<double> p(100, 0.01);
        const auto prof = latency_profile(p, 30.0);
        for (const double d : prof.delay) CHECK(d == doctest::Approx(0.01).epsilon(1e-12));
    }
    SUBCASE("permanent backlog closed form") {
        const std::vector<double> p(100, 0.05);
        const auto prof = latency_profile(p, 30.0);
        CHECK(std::abs(prof.delay[99] - 1.7) < 1e-9);
        for (std::size_t t = 0; t < 100; ++t) {
            CHECK(prof.delay[t] == doctest::Approx(0.05 * (t + 1) - t / 30.0).epsilon(1e-12));
        }
    }
    SUBCASE("reference values") {
        const std::vector<double> p = {0.02, 0.07, 0.01, 0.09, 0.0, 0.03, 0.05, 0.01};
        const std::vector<double> expected = {0.02, 0.07, 0.04, 0.09, 0.05, 0.04, 0.05, 0.02};
        const auto prof = latency_profile(p, 25.0);
        for (std::size_t t = 0; t < p.size(); ++t) CHECK(std::abs(prof.delay[t] - expected[t]) < 1e-12);
    }
    SUBCASE("properties") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.0, 0.08);
        for (int n = 0; n < 100; ++n) {
            std::vector<double> p(50);
            for (auto& x : p) x = u(rng);
            const auto prof = latency_profile(p, 30.0);
            for (std::size_t t = 0; t < p.size(); ++t) {
                CHECK(prof.delay[t] >= p[t] - 1e-12);
                CHECK(prof.completion[t] == doctest::Approx(prof.arrival[t] + prof.delay[t]));
            }
            auto q = p;
            std::sort(q.begin(), q.end());
            std::vector<double> same(50, q[25]);
            auto shuffled = same;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            CHECK(latency_profile(same, 30.0).completion.back() ==
                  doctest::Approx(latency_profile(shuffled, 30.0).completion.back()));
        }
        std::vector<double> cheap(40);
        for (auto& x : cheap) x = u(rng) / 3.0;  // below 1/30 s
        const auto prof = latency_profile(cheap, 30.0);
        for (std::size_t t = 0; t < cheap.size(); ++t) CHECK(prof.delay[t] == doctest::Approx(cheap[t]).epsilon(1e-9));
        CHECK(prof.mean_delay() == doctest::Approx(std::accumulate(cheap.begin(), cheap.end(), 0.0) / 40.0));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(latency_profile(std::vector<double>{0.1}, 0.0), Error);
        CHECK_THROWS_AS(latency_profile(std::vector<double>{-0.1}, 30.0), Error);
    }
}

TEST_CASE("pck and mpjpe") {
    auto pose = [](std::initializer_list<std::tuple<const char*, double, double>> js) {
        data::KeypointPose p;
        for (const auto& [n, x, y] : js) p.joints[n] = {x, y, true};
        return p;
    };
    const auto gt = pose({{"head", 0, 0}, {"neck", 0, 20}, {"hip", 0, 60}});
    SUBCASE("pck threshold is half the head-neck distance") {
        const auto pred = pose({{"head", 5, 0}, {"neck", 0, 29}, {"hip", 15, 60}});
        CHECK(pck(pred, gt) == doctest::Approx(2.0 / 3.0));
        CHECK(pck(gt, gt) == 1.0);
        const auto far = pose({{"head", 1e9, 0}, {"neck", 1e9, 0}, {"hip", 1e9, 0}});
        CHECK(pck(far, gt) == 0.0);
        // exactly at the threshold does not count
        CHECK(pck(pose({{"head", 10, 0}, {"neck", 0, 20}, {"hip", 0, 60}}), gt) == doctest::Approx(2.0 / 3.0));
        // a joint missing from the prediction counts as wrong
        CHECK(pck(pose({{"head", 0, 0}, {"neck", 0, 20}}), gt) == doctest::Approx(2.0 / 3.0));
        CHECK_THROWS_AS(pck(gt, pose({{"head", 0, 0}, {"hip", 1, 1}})), Error);
    }
    SUBCASE("mpjpe") {
        const auto a = pose({{"l", 0, 0}, {"r", 10, 0}});
        const auto b = pose({{"l", 3, 4}, {"r", 10, 15}});
        CHECK(mpjpe(b, a, {100.0}) == doctest::Approx(0.10));
        CHECK(mpjpe(a, a) == 0.0);
        CHECK(mpjpe(pose({{"j", 3, 4}}), pose({{"j", 0, 0}}), {100.0}) == doctest::Approx(0.05));
        // default normalizer is the diagonal of the ground-truth keypoint box
        const auto g = pose({{"a", 0, 0}, {"b", 30, 40}});
        const auto p = pose({{"a", 5, 0}, {"b", 30, 40}});
        CHECK(mpjpe(p, g) == doctest::Approx(2.5 / 50.0));
        CHECK_THROWS_AS(mpjpe(p, g, {0.0}), Error);
        CHECK_THROWS_AS(mpjpe(pose({{"single", 1, 1}}), pose({{"single", 1, 1}})), Error);
    }
    SUBCASE("invariances") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> u(-100.0, 100.0), s(0.1, 10.0);
        for (int n = 0; n < 200; ++n) {
            data::KeypointPose g, p;
            for (const char* name : {"head", "neck", "hip", "knee", "ankle"}) {
                const double x = u(rng), y = u(rng);
                g.joints[name] = {x, y, true};
                p.joints[name] = {x + u(rng) / 10.0, y + u(rng) / 10.0, true};
            }
            const double dx = u(rng) * 10, dy = u(rng) * 10, k = s(rng);
            auto moved = [&](const data::KeypointPose& q, double scale, double ox, double oy) {
                auto r = q;
                for (auto& [_, j] : r.joints) j = {j.x * scale + ox, j.y * scale + oy, j.present};
                return r;
            };
            CHECK(pck(moved(p, 1, dx, dy), moved(g, 1, dx, dy)) == pck(p, g));
            CHECK(mpjpe(moved(p, 1, dx, dy), moved(g, 1, dx, dy)) == doctest::Approx(mpjpe(p, g)).epsilon(1e-9));
            CHECK(mpjpe(moved(p, k, 0, 0), moved(g, k, 0, 0)) == doctest::Approx(mpjpe(p, g)).epsilon(1e-9));
        }
    }
}

TEST_CASE("aggregation") {
    SequenceScore a, b, c;
    a.f = 0.4;
    a.pr = 0.5;
    a.re = 0.3;
    a.gsr = {0.2, 1, 1, 1, 1, 1, 1};
    b.f = 0.8;
    b.pr = 0.9;
    b.re = 0.7;
    b.gsr = {0.4, 0.5, 1, 1, 1, 1, 1};
    c = b;
    c.f = 0.2;
    const std::vector<SequenceScore> two{a, b};
    const auto all = aggregate(two);
    CHECK(all.count == 2);
    CHECK(all.f == doctest::Approx(0.6));
    CHECK(all.pr == doctest::Approx(0.7));
    CHECK(all.gsr[0] == doctest::Approx(0.3));
    CHECK(all.gsr[1] == doctest::Approx(0.75));
    CHECK_THROWS_AS(aggregate(std::span<const SequenceScore>{}), Error);

    const std::vector<SequenceScore> three{a, b, c};
    const std::vector<std::vector<std::string>> labels{{"sunny"}, {"sunny"}, {"harsh"}};
    const auto groups = aggregate_by(three, labels);
    REQUIRE(groups.size() == 2);
    CHECK(groups.at("sunny").f == doctest::Approx(0.6));
    CHECK(groups.at("harsh").f == doctest::Approx(0.2));
    CHECK(groups.at("harsh").count == 1);

    const std::vector<std::vector<std::string>> multi{{"SC", "FM"}, {"FM"}, {}};
    const auto attrs = aggregate_by(three, multi);
    CHECK(attrs.at("FM").count == 2);
    CHECK(attrs.at("SC").f == doctest::Approx(0.4));
    CHECK_FALSE(attrs.contains("LR"));
}

TEST_CASE("score_sequence bundles F* and the GSR curve") {
    const FourFrame ex;
    const auto s = score_sequence("x", ex.trace, ex.video.frames);
    CHECK(s.id == "x");
    CHECK(s.f == doctest::Approx(2.0 / 3.0));
    CHECK(s.tau == 0.9);
    CHECK(s.pr_defined);
    CHECK(s.gsr.size() == kGsrWindows.size());
    // frames 3 (IoU 1/3) and 4 (IoU 0) form a 2-frame wrong run at the end
    CHECK(s.gsr[0] == doctest::Approx(3.0 / 5.0));
    CHECK(s.gsr[1] == 1.0);
}
