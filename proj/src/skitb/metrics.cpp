#include "skitb/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "skitb/error.hpp"

namespace skitb::metrics {

namespace {

void check_aligned(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts) {
    if (trace.size() != gts.size()) {
        fail(ErrorCode::InvalidArgument, "trace has " + std::to_string(trace.size()) + " frames but ground truth has " +
                                             std::to_string(gts.size()));
    }
}

bool scored(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts, std::size_t t,
            bool include_occluded) {
    if (trace.init_frame && *trace.init_frame == t) return false;
    return include_occluded || gts[t].visibility == data::Visibility::Visible;
}

double overlap(const Prediction& p, const geom::BBox& gt, const EvalOptions& opts) {
    if (!p.box) return 0.0;
    const double o = geom::iou(*p.box, gt);
    if (opts.success_iou) return o >= *opts.success_iou ? 1.0 : 0.0;
    return o;
}

}  // namespace

PredictionTrace slice(const PredictionTrace& trace, std::size_t start, std::size_t len) {
    if (start + len > trace.size()) fail(ErrorCode::InvalidArgument, "slice: range exceeds trace length");
    PredictionTrace out;
    out.frames.assign(trace.frames.begin() + static_cast<std::ptrdiff_t>(start),
                      trace.frames.begin() + static_cast<std::ptrdiff_t>(start + len));
    if (trace.init_frame && *trace.init_frame >= start && *trace.init_frame < start + len) {
        out.init_frame = *trace.init_frame - start;
    }
    return out;
}

PrRe pr_re(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts, double tau,
           const EvalOptions& opts) {
    check_aligned(trace, gts);
    PrRe r;
    double reported_sum = 0.0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        if (!scored(trace, gts, t, opts.include_occluded)) continue;
        ++r.scored;
        const auto& p = trace.frames[t];
        if (p.box && p.confidence >= tau) {
            ++r.reported;
            reported_sum += overlap(p, gts[t].box, opts);
        }
    }
    r.pr_defined = r.reported > 0;
    r.pr = r.pr_defined ? reported_sum / static_cast<double>(r.reported) : 0.0;
    r.re = r.scored > 0 ? reported_sum / static_cast<double>(r.scored) : 0.0;
    return r;
}

double f_score(double pr, double re) {
    if (pr + re <= 0.0) return 0.0;
    return 2.0 * pr * re / (pr + re);
}

LTEvalResult fscore_optimize(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts,
                             const EvalOptions& opts) {
    check_aligned(trace, gts);
    std::set<double> grid = {0.0, 1.0};
    for (const auto& p : trace.frames) {
        if (p.box) grid.insert(p.confidence);
    }
    LTEvalResult res;
    bool first = true;
    for (const double tau : grid) {
        const auto pr = pr_re(trace, gts, tau, opts);
        const double f = f_score(pr.pr, pr.re);
        res.thresholds.push_back(tau);
        res.pr.push_back(pr.pr);
        res.re.push_back(pr.re);
        res.f.push_back(f);
        if (first || f > res.f_best) {
            res.f_best = f;
            res.tau_best = tau;
            res.pr_best = pr.pr;
            res.re_best = pr.re;
            first = false;
        }
    }
    return res;
}

double gsr(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts, std::size_t recovery_window,
           double iou_threshold, bool include_occluded) {
    check_aligned(trace, gts);
    if (recovery_window < 1) fail(ErrorCode::InvalidArgument, "gsr: recovery window must be >= 1");
    if (trace.size() == 0) return 1.0;
    std::optional<std::size_t> run_start;
    std::size_t run_len = 0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        if (!include_occluded && gts[t].visibility == data::Visibility::Occluded) continue;
        const auto& p = trace.frames[t];
        const bool is_init = trace.init_frame && *trace.init_frame == t;
        const bool wrong = !is_init && (!p.box || geom::iou(*p.box, gts[t].box) < iou_threshold);
        if (!wrong) {
            run_start.reset();
            run_len = 0;
            continue;
        }
        if (!run_start) run_start = t;
        if (++run_len > recovery_window) {
            return static_cast<double>(*run_start) / static_cast<double>(trace.size());
        }
    }
    return 1.0;
}

std::vector<double> gsr_curve(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts,
                              double iou_threshold, bool include_occluded) {
    std::vector<double> out;
    out.reserve(kGsrWindows.size());
    for (const auto w : kGsrWindows) out.push_back(gsr(trace, gts, w, iou_threshold, include_occluded));
    return out;
}

double LatencyProfile::mean_delay() const {
    if (delay.empty()) return 0.0;
    double s = 0.0;
    for (const double d : delay) s += d;
    return s / static_cast<double>(delay.size());
}

LatencyProfile latency_profile(std::span<const double> costs, double fps) {
    if (!(fps > 0.0)) fail(ErrorCode::InvalidArgument, "latency_profile: fps must be > 0");
    LatencyProfile prof;
    prof.arrival.reserve(costs.size());
    prof.completion.reserve(costs.size());
    prof.delay.reserve(costs.size());
    double prev_completion = 0.0;
    for (std::size_t t = 0; t < costs.size(); ++t) {
        if (!(costs[t] >= 0.0)) fail(ErrorCode::InvalidArgument, "latency_profile: negative processing cost");
        const double arrival = static_cast<double>(t) / fps;
        const double completion = std::max(arrival, prev_completion) + costs[t];
        prof.arrival.push_back(arrival);
        prof.completion.push_back(completion);
        prof.delay.push_back(completion - arrival);
        prev_completion = completion;
    }
    return prof;
}

double pck(const data::KeypointPose& pred, const data::KeypointPose& gt, const PoseJoints& joints) {
    const auto* head = gt.find(joints.head);
    const auto* neck = gt.find(joints.neck);
    if (!head || !neck || !head->present || !neck->present) {
        fail(ErrorCode::InvalidArgument, "pck: ground truth must contain head and neck");
    }
    const double threshold = 0.5 * std::hypot(head->x - neck->x, head->y - neck->y);
    std::size_t total = 0;
    std::size_t correct = 0;
    for (const auto& [name, g] : gt.joints) {
        if (!g.present) continue;
        ++total;
        const auto* p = pred.find(name);
        if (p && p->present && std::hypot(p->x - g.x, p->y - g.y) < threshold) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

double mpjpe(const data::KeypointPose& pred, const data::KeypointPose& gt, const MpjpeNormalizer& norm) {
    double normalizer = 0.0;
    if (norm.custom) {
        normalizer = *norm.custom;
    } else {
        const auto box = data::keypoints_to_box(gt, 0.0);
        normalizer = std::hypot(box.w, box.h);
    }
    if (!(normalizer > 0.0)) fail(ErrorCode::InvalidArgument, "mpjpe: normalizer must be > 0");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [name, g] : gt.joints) {
        if (!g.present) continue;
        const auto* p = pred.find(name);
        if (!p || !p->present) continue;
        sum += std::hypot(p->x - g.x, p->y - g.y);
        ++n;
    }
    if (n == 0) fail(ErrorCode::InvalidArgument, "mpjpe: no keypoint present in both poses");
    return sum / static_cast<double>(n) / normalizer;
}

AggregateRow aggregate(std::span<const SequenceScore> scores) {
    if (scores.empty()) fail(ErrorCode::InvalidArgument, "aggregate: empty group");
    AggregateRow row;
    row.count = scores.size();
    row.gsr.assign(scores.front().gsr.size(), 0.0);
    for (const auto& s : scores) {
        row.pr += s.pr;
        row.re += s.re;
        row.f += s.f;
        if (s.gsr.size() != row.gsr.size()) fail(ErrorCode::InvalidArgument, "aggregate: mismatched GSR curves");
        for (std::size_t k = 0; k < s.gsr.size(); ++k) row.gsr[k] += s.gsr[k];
    }
    const auto n = static_cast<double>(scores.size());
    row.pr /= n;
    row.re /= n;
    row.f /= n;
    for (auto& g : row.gsr) g /= n;
    return row;
}

std::map<std::string, AggregateRow> aggregate_by(std::span<const SequenceScore> scores,
                                                 std::span<const std::vector<std::string>> labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::InvalidArgument, "aggregate_by: labels not aligned");
    std::map<std::string, std::vector<SequenceScore>> groups;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (const auto& l : labels[i]) groups[l].push_back(scores[i]);
    }
    std::map<std::string, AggregateRow> out;
    for (const auto& [label, members] : groups) out.emplace(label, aggregate(members));
    return out;
}

SequenceScore score_sequence(const std::string& id, const PredictionTrace& trace,
                             std::span<const data::FrameAnnotation> gts, const EvalOptions& opts, double gsr_iou) {
    const auto lt = fscore_optimize(trace, gts, opts);
    SequenceScore s;
    s.id = id;
    s.f = lt.f_best;
    s.pr = lt.pr_best;
    s.re = lt.re_best;
    s.tau = lt.tau_best;
    s.pr_defined = pr_re(trace, gts, lt.tau_best, opts).pr_defined;
    s.gsr = gsr_curve(trace, gts, gsr_iou, opts.include_occluded);
    return s;
}

}  // namespace skitb::metrics
