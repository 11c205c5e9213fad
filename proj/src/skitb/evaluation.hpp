#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "skitb/datamodel.hpp"
#include "skitb/error.hpp"
#include "skitb/metrics.hpp"
#include "skitb/ope.hpp"

namespace skitb::eval {

/// Backend selection string, resolved per video:
///   trace:<file|dir>           stored predictions (dir: <dir>/<video id>.csv)
///   sort:<file|dir>            SORT over a detection stream, following the seeded track
///   sort+reacquire:<file|dir>  same, switching to a fresh track when the followed one is dropped
///   oracle[:<sigma>]           ground truth with optional jitter (testing)
///   fusion:<spec>+<spec>       tracker + re-detector controller (split at the last +)
///   extern:cmd:<command>       spawned peer, "{video}" and "{id}" substituted
///   extern:tcp:<host>:<port>   peer over TCP
std::unique_ptr<protocol::TrackerBackend> make_backend(const std::string& spec, const data::MCVideo& video,
                                                       const std::string& video_path, std::uint64_t seed);

/// "gt" or "detector:<file|dir>[:<threshold>]".
protocol::InitPolicy make_init_policy(const std::string& spec, const data::MCVideo& video);

struct EvalConfig {
    std::string backend;
    std::string init = "gt";
    bool include_occluded = true;
    double gsr_iou = 0.5;
    std::uint64_t seed = 0;
    std::string image_pattern;
    std::string command_line;  // recorded in the manifest
};

struct ClipScore {
    data::SCClip clip;
    metrics::SequenceScore score;
};

struct SequenceEval {
    std::string id;
    std::string path;
    data::VideoMeta meta;
    std::size_t frames = 0;
    bool ok = false;
    bool no_init = false;  // detector found nothing: all frames absent
    std::optional<ErrorCode> error_code;
    std::string error;
    metrics::SequenceScore score;
    std::vector<ClipScore> clips;
    metrics::LatencyProfile latency;
    std::optional<std::size_t> init_frame;
};

/// Runs OPE and scores one video. Backend and protocol failures are captured in the result.
SequenceEval evaluate_sequence(const data::MCVideo& video, const std::string& video_path, const EvalConfig& cfg);

/// Thread-safe collection of per-sequence results plus report emission.
class Report {
public:
    explicit Report(EvalConfig cfg) : cfg_(std::move(cfg)) {}

    void add(SequenceEval seq);
    const EvalConfig& config() const { return cfg_; }

    /// Results sorted by sequence id.
    std::vector<SequenceEval> sequences() const;
    std::size_t failed_count() const;
    bool has_protocol_failure() const;

    /// Overall mean over successful sequences; nullopt when none succeeded.
    std::optional<metrics::AggregateRow> overall() const;
    /// Group label -> mean, for "discipline", "weather" or "attribute" (clip level).
    std::map<std::string, metrics::AggregateRow> grouped(const std::string& key) const;

    /// sequences.csv, aggregate.csv, summary.json, gsr.csv, gsr_curve.csv, latency.csv, manifest.json
    void write(const std::string& out_dir) const;
    void write_gsr(const std::string& out_dir) const;
    void write_latency(const std::string& out_dir) const;
    void write_manifest(const std::string& out_dir) const;
    std::string summary_json() const;

private:
    EvalConfig cfg_;
    mutable std::mutex mutex_;
    std::vector<SequenceEval> seqs_;
};

/// Annotation files of a dataset directory: <dir>/annotations/*.txt, or <dir>/*.txt. Sorted.
std::vector<std::string> list_annotation_files(const std::string& dataset_dir);

struct SimulationSpec {
    std::size_t videos = 5;
    std::size_t frames = 300;
    std::size_t cameras = 3;
    std::uint64_t seed = 0;
    double detection_center_sigma = 0.0;
    double detection_size_sigma = 0.0;
    double false_positive_rate = 0.0;
    double miss_rate = 0.0;
};

/// Writes annotations/, detections/ and traces/oracle/ (ground truth as trace files) plus a manifest.
void write_simulated_dataset(const std::string& out_dir, const SimulationSpec& spec);

/// Split ids plus per-discipline / per-split statistics as text.
std::string format_split(const data::Split& split, std::span<const data::MCVideo> videos,
                         data::SplitCondition condition);

/// Per-clip attribute table as CSV.
std::string format_attributes(std::span<const data::MCVideo> videos);

}  // namespace skitb::eval
