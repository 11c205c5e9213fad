#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "skitb/datamodel.hpp"
#include "skitb/metrics.hpp"

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("skitb_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& leaf = {}) const { return leaf.empty() ? path_.string() : (path_ / leaf).string(); }

private:
    std::filesystem::path path_;
};

inline skitb::data::MCVideo make_video(const std::vector<skitb::geom::BBox>& boxes, std::vector<int> cameras = {},
                                       std::string id = "v") {
    skitb::data::MCVideo v;
    v.id = std::move(id);
    v.meta.resolution = {1280.0, 720.0};
    for (std::size_t t = 0; t < boxes.size(); ++t) {
        v.frames.push_back({t, boxes[t], skitb::data::Visibility::Visible, cameras.empty() ? 1 : cameras[t]});
    }
    return v;
}

inline skitb::metrics::PredictionTrace exact_trace(const skitb::data::MCVideo& v, double conf = 1.0) {
    skitb::metrics::PredictionTrace tr;
    tr.init_frame = 0;
    for (const auto& f : v.frames) tr.frames.push_back({f.box, conf});
    return tr;
}

inline skitb::geom::BBox random_box(std::mt19937_64& rng, double extent = 200.0) {
    std::uniform_real_distribution<double> pos(-extent, extent);
    std::uniform_real_distribution<double> size(0.5, extent / 2);
    return {pos(rng), pos(rng), size(rng), size(rng)};
}

}  // namespace testing
