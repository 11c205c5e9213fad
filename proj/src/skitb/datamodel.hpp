#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skitb/geometry.hpp"

namespace skitb::data {

enum class Visibility { Visible, Occluded };
enum class Discipline { AL, JP, FS };
enum class Weather { Sunny, Cloudy, Harsh };

std::string_view to_string(Discipline d);
std::string_view to_string(Weather w);
Discipline parse_discipline(std::string_view s);
Weather parse_weather(std::string_view s);

struct FrameAnnotation {
    std::size_t t = 0;
    geom::BBox box;
    Visibility visibility = Visibility::Visible;
    int camera_id = 1;
    friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

struct VideoMeta {
    Discipline discipline = Discipline::AL;
    std::string sub_discipline;
    Weather weather = Weather::Sunny;
    std::string athlete_id;
    std::string athlete_nationality;
    std::string location;
    std::string country;
    std::optional<std::chrono::year_month_day> date;
    double fps = 30.0;
    geom::FrameDims resolution{1920.0, 1080.0};
    std::map<std::string, std::string> performance_params;
    friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

/// One athlete's full run, stitched from sequentially placed cameras.
struct MCVideo {
    std::string id;
    std::vector<FrameAnnotation> frames;
    VideoMeta meta;

    std::size_t size() const { return frames.size(); }
    friend bool operator==(const MCVideo&, const MCVideo&) = default;
};

/// Throws Invariant with a description of the first violated rule.
void validate(const MCVideo& v);

MCVideo parse_annotations(std::string_view doc);
std::string serialize(const MCVideo& v);
MCVideo load_annotations(const std::string& path);
void save_annotations(const MCVideo& v, const std::string& path);

// Visual attributes of a single-camera clip.
enum class Attribute { CM, SC, BC, ARC, IV, POC, MB, FM, FOC, LR };
inline constexpr std::size_t kAttributeCount = 10;
inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes = {
    Attribute::CM, Attribute::SC, Attribute::BC, Attribute::ARC, Attribute::IV,
    Attribute::POC, Attribute::MB, Attribute::FM, Attribute::FOC, Attribute::LR};

enum class Provenance { Automatic, Manual };

std::string_view to_string(Attribute a);

struct AttributeSet {
    std::array<bool, kAttributeCount> flags{};

    bool get(Attribute a) const { return flags[static_cast<std::size_t>(a)]; }
    void set(Attribute a, bool v) { flags[static_cast<std::size_t>(a)] = v; }
    /// SC, ARC, FM and LR are rule-computed; the rest are labels.
    static Provenance provenance(Attribute a);
    friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

struct SCClip {
    std::string video_id;
    int camera_id = 1;
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    AttributeSet attributes;

    std::size_t length() const { return end - start + 1; }
};

/// Maximal runs of equal camera id, in frame order.
std::vector<SCClip> segment_clips(const MCVideo& v);

// Rule constants for the automatic attributes.
inline constexpr double kRatioLow = 0.5;
inline constexpr double kRatioHigh = 2.0;
inline constexpr double kLowResolutionArea = 1000.0;

/// Sets SC, ARC, FM and LR from the clip's boxes; other flags stay false.
/// Throws InvalidArgument for an empty clip or a zero-area / zero-height first box.
AttributeSet compute_auto_attributes(std::span<const FrameAnnotation> clip);

/// Segments the video and fills the automatic attributes of every clip.
std::vector<SCClip> annotate_clips(const MCVideo& v);

enum class SplitCondition { Date, Athlete, Location };
SplitCondition parse_split_condition(std::string_view s);
std::string_view to_string(SplitCondition c);

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Train/test partition, balanced per discipline. Date: chronological, first ceil(fraction*N) of each
/// discipline to train. Athlete/Location: whole condition groups are placed greedily (largest first,
/// ties by key) into train whenever that moves the per-discipline counts closer to the target.
/// `seed` is accepted for interface uniformity; the procedure is deterministic.
Split generate_splits(std::span<const MCVideo> videos, SplitCondition condition, double train_fraction = 0.6,
                      unsigned long long seed = 0);

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    bool present = true;
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct KeypointPose {
    std::map<std::string, Keypoint> joints;

    const Keypoint* find(const std::string& name) const;
    friend bool operator==(const KeypointPose&, const KeypointPose&) = default;
};

/// Min/max box over present keypoints, each side inflated by `padding_fraction` of its length
/// (half on each side).
geom::BBox keypoints_to_box(const KeypointPose& pose, double padding_fraction = 0.0);

/// Keypoint CSV `frame,joint_name,x,y,present`; returns poses keyed by frame.
std::map<std::size_t, KeypointPose> parse_keypoints(std::string_view doc);
std::string serialize_keypoints(const std::map<std::size_t, KeypointPose>& poses);

}  // namespace skitb::data
