#include "skitb/sort_tracker.hpp"

#include <algorithm>

#include "skitb/error.hpp"

namespace skitb::sort {

SortStepResult sort_step(std::vector<KalmanTrack>& tracks, std::span<const geom::BBox> detections,
                         const SortParams& params, int& next_id) {
    SortStepResult res;
    const auto n = static_cast<Eigen::Index>(tracks.size());
    const auto m = static_cast<Eigen::Index>(detections.size());
    Eigen::MatrixXd iou(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto tb = track_box(tracks[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < m; ++j) iou(i, j) = geom::iou(tb, detections[static_cast<std::size_t>(j)]);
    }
    const Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(n, m) - iou;
    const auto raw = hungarian(cost);

    auto& a = res.assignment;
    a.unmatched_rows = raw.unmatched_rows;
    a.unmatched_cols = raw.unmatched_cols;
    for (const auto& [i, j] : raw.matches) {
        if (iou(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < params.iou_gate) {
            a.unmatched_rows.push_back(i);
            a.unmatched_cols.push_back(j);
        } else {
            a.matches.emplace_back(i, j);
            a.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    std::sort(a.unmatched_rows.begin(), a.unmatched_rows.end());
    std::sort(a.unmatched_cols.begin(), a.unmatched_cols.end());

    std::vector<char> matched(tracks.size(), 0);
    for (const auto& [i, j] : a.matches) {
        tracks[i] = kalman_update(tracks[i], detections[j], params.noise);
        matched[i] = 1;
    }
    for (const auto j : a.unmatched_cols) {
        const auto& d = detections[j];
        if (!(d.w > 0.0 && d.h > 0.0)) continue;  // cannot seed a filter from a degenerate box
        auto t = make_track(d, next_id++, params.noise);
        t.hits = 1;
        t.hit_streak = 1;
        res.spawned_ids.push_back(t.id);
        tracks.push_back(t);
        matched.push_back(1);
    }

    std::vector<KalmanTrack> kept;
    kept.reserve(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const auto& t = tracks[i];
        if (t.time_since_update > params.max_age) {
            res.deleted_ids.push_back(t.id);
            continue;
        }
        if (t.hits >= params.min_hits || t.age < params.min_hits) {
            res.outputs.push_back({t.id, track_box(t), matched[i] != 0});
        }
        kept.push_back(t);
    }
    tracks = std::move(kept);
    return res;
}

SortStepResult SortTracker::step(std::span<const geom::BBox> detections) {
    for (auto& t : tracks_) t = kalman_predict(t, 1.0, params_.noise);
    return sort_step(tracks_, detections, params_, next_id_);
}

int SortTracker::seed_track(const geom::BBox& box, int hits) {
    auto t = make_track(box, next_id_++, params_.noise);
    t.hits = hits;
    t.hit_streak = hits;
    tracks_.push_back(t);
    return t.id;
}

void SortTracker::reset() {
    tracks_.clear();
    next_id_ = 1;
}

const KalmanTrack* SortTracker::find(int id) const {
    const auto it = std::find_if(tracks_.begin(), tracks_.end(), [id](const KalmanTrack& t) { return t.id == id; });
    return it == tracks_.end() ? nullptr : &*it;
}

SortBackend::SortBackend(protocol::DetectionStream detections, SortParams params)
    : detections_(std::move(detections)), tracker_(std::move(params)) {}

void SortBackend::do_init(const protocol::FrameContext&, const geom::BBox& box) {
    tracker_.reset();
    seeded_id_ = tracker_.seed_track(box, tracker_.params().min_hits);
}

metrics::Prediction SortBackend::do_update(const protocol::FrameContext& ctx) {
    if (ctx.t >= detections_.size()) {
        fail(ErrorCode::Backend, "sort: no detections for frame " + std::to_string(ctx.t));
    }
    std::vector<geom::BBox> boxes;
    for (const auto& d : detections_[ctx.t]) {
        if (d.score >= tracker_.params().min_detection_score) boxes.push_back(d.box);
    }
    tracker_.step(boxes);
    const auto* t = seeded_id_ ? tracker_.find(*seeded_id_) : nullptr;
    if (!t) {
        seeded_id_.reset();
        if (!tracker_.params().reacquire) return {std::nullopt, 0.0};
        for (const auto& c : tracker_.tracks()) {
            if (c.time_since_update != 0) continue;
            if (!t || c.hit_streak > t->hit_streak || (c.hit_streak == t->hit_streak && c.id < t->id)) t = &c;
        }
        if (!t) return {std::nullopt, 0.0};
        seeded_id_ = t->id;
    }
    return {track_box(*t), 1.0 / (1.0 + static_cast<double>(t->time_since_update))};
}

}  // namespace skitb::sort
