#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "skitb/skitb.h"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const char* kDoc =
    "id: capi\ndiscipline: JP\nweather: cloudy\nfps: 25\nwidth: 1280\nheight: 720\n\n"
    "0,100,100,40,80,V,1\n1,104,100,40,80,V,1\n2,108,100,40,80,O,1\n3,600,300,20,40,V,2\n4,604,300,20,40,V,2\n";

void collect(const char* path, void* user) { static_cast<std::vector<std::string>*>(user)->emplace_back(path); }

}  // namespace

TEST_CASE("basics") {
    CHECK(std::strlen(skitb_version()) > 0);
    CHECK(std::string(skitb_status_name(SKITB_ERR_PROTOCOL)) == "protocol failure");
    CHECK(skitb_iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(1.0 / 3.0));
    CHECK(skitb_iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);

    skitb_box r{};
    REQUIRE(skitb_relocalization_reference({600, 200, 40, 80}, {1280, 720}, 3.0, &r) == SKITB_OK);
    CHECK(r.w == doctest::Approx(240.0));
    CHECK(r.x == doctest::Approx(620.0 - 120.0));
    CHECK(skitb_relocalization_reference({0, 0, 1, 1}, {400, 720}, 3.0, &r) == SKITB_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(skitb_last_error()) > 0);
    CHECK(skitb_relocalization_reference({0, 0, 1, 1}, {1280, 720}, 3.0, nullptr) == SKITB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("videos, traces and scores") {
    skitb_video* v = nullptr;
    REQUIRE(skitb_video_parse(kDoc, std::strlen(kDoc), &v) == SKITB_OK);
    CHECK(std::string(skitb_video_id(v)) == "capi");
    CHECK(skitb_video_frame_count(v) == 5);
    CHECK(skitb_video_fps(v) == 25.0);
    skitb_box b{};
    int occluded = 0, cam = 0;
    REQUIRE(skitb_video_frame(v, 2, &b, &occluded, &cam) == SKITB_OK);
    CHECK(b.x == 108.0);
    CHECK(occluded == 1);
    CHECK(cam == 1);
    CHECK(skitb_video_frame(v, 5, &b, &occluded, &cam) == SKITB_ERR_INVALID_ARGUMENT);

    skitb_clip clips[1];
    std::size_t n = 0;
    REQUIRE(skitb_video_clips(v, clips, 1, &n) == SKITB_OK);
    CHECK(n == 2);
    CHECK(clips[0].end == 2);
    CHECK((clips[0].attributes & SKITB_ATTR_LR) == 0);

    skitb_video* bad = nullptr;
    CHECK(skitb_video_parse("garbage", 7, &bad) == SKITB_ERR_PARSE);
    CHECK(bad == nullptr);

    skitb_backend* be = nullptr;
    REQUIRE(skitb_backend_create("oracle", v, nullptr, 0, &be) == SKITB_OK);
    skitb_trace* tr = nullptr;
    double costs[5] = {-1, -1, -1, -1, -1};
    REQUIRE(skitb_run_ope(be, v, "gt", &tr, costs) == SKITB_OK);
    CHECK(costs[0] == 0.0);
    CHECK(costs[4] >= 0.0);
    CHECK(skitb_trace_size(tr) == 5);
    int present = 0;
    double conf = 0;
    REQUIRE(skitb_trace_frame(tr, 3, &b, &present, &conf) == SKITB_OK);
    CHECK(present == 1);
    CHECK(b.x == 600.0);
    CHECK(conf == 1.0);

    skitb_eval_flags flags{1, 0.5};
    skitb_scores s{};
    REQUIRE(skitb_score(tr, v, &flags, &s) == SKITB_OK);
    CHECK(s.f == 1.0);
    for (const double g : s.gsr) CHECK(g == 1.0);

    testing::TempDir dir;
    REQUIRE(skitb_trace_save(tr, dir.str("t.csv").c_str()) == SKITB_OK);
    skitb_trace* back = nullptr;
    REQUIRE(skitb_trace_load(dir.str("t.csv").c_str(), &back) == SKITB_OK);
    CHECK(skitb_trace_size(back) == 5);
    CHECK(skitb_trace_load(dir.str("missing.csv").c_str(), &back) == SKITB_ERR_IO);

    double delays[4];
    const double c[4] = {0.05, 0.05, 0.0, 0.0};
    REQUIRE(skitb_latency(c, 4, 20.0, delays) == SKITB_OK);
    CHECK(delays[0] == doctest::Approx(0.05));
    CHECK(delays[1] == doctest::Approx(0.05));

    skitb_backend* nb = nullptr;
    CHECK(skitb_backend_create("bogus", v, nullptr, 0, &nb) == SKITB_ERR_CONFIG);
    CHECK(nb == nullptr);

    skitb_trace_free(back);
    skitb_trace_free(tr);
    skitb_backend_free(be);
    skitb_video_free(v);
    skitb_video_free(nullptr);
}

TEST_CASE("dataset workflow") {
    testing::TempDir dir;
    skitb_simulation sim{4, 90, 3, 5, 0.0, 0.0, 0.0, 0.0};
    REQUIRE(skitb_simulate(dir.str("ds").c_str(), &sim) == SKITB_OK);
    std::vector<std::string> files;
    REQUIRE(skitb_dataset_list(dir.str("ds").c_str(), collect, &files) == SKITB_OK);
    REQUIRE(files.size() == 4);

    const std::string backend = "trace:" + dir.str("ds/traces/oracle");
    skitb_eval_config cfg{backend.c_str(), nullptr, 1, 0.5, 0, nullptr, "test"};
    skitb_report* rep = nullptr;
    REQUIRE(skitb_report_create(&cfg, &rep) == SKITB_OK);
    std::vector<std::thread> workers;
    for (const auto& f : files) workers.emplace_back([&, f] { CHECK(skitb_report_evaluate(rep, f.c_str()) == SKITB_OK); });
    for (auto& w : workers) w.join();
    CHECK(skitb_report_evaluate(rep, dir.str("ds/nothing.txt").c_str()) == SKITB_ERR_IO);
    skitb_scores s{};
    std::size_t ok = 0, failed = 0;
    REQUIRE(skitb_report_overall(rep, &s, &ok, &failed) == SKITB_OK);
    CHECK(ok == 4);
    CHECK(failed == 1);
    CHECK(s.f == 1.0);
    CHECK(skitb_report_has_protocol_failure(rep) == 0);
    REQUIRE(skitb_report_write(rep, dir.str("out").c_str(), "all") == SKITB_OK);
    CHECK(fs::exists(dir.str("out/summary.json")));
    CHECK(skitb_report_write(rep, dir.str("out").c_str(), "pie") == SKITB_ERR_INVALID_ARGUMENT);
    skitb_report_free(rep);

    std::vector<skitb_video*> videos(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) REQUIRE(skitb_video_load(files[i].c_str(), &videos[i]) == SKITB_OK);
    REQUIRE(skitb_split(videos.data(), videos.size(), "Location", 0.6, 0, dir.str("split.json").c_str()) == SKITB_OK);
    CHECK(fs::exists(dir.str("split.json")));
    CHECK(skitb_split(videos.data(), videos.size(), "weather", 0.6, 0, dir.str("x.json").c_str()) != SKITB_OK);
    REQUIRE(skitb_attributes_write(videos.data(), videos.size(), dir.str("attr.csv").c_str()) == SKITB_OK);
    CHECK(fs::file_size(dir.str("attr.csv")) > 0);
    for (auto* v : videos) skitb_video_free(v);
}
