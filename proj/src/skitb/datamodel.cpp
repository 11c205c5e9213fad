#include "skitb/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "skitb/error.hpp"
#include "skitb/textio.hpp"

namespace skitb::data {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {"CM", "SC",  "BC", "ARC", "IV",
                                                                          "POC", "MB", "FM", "FOC", "LR"};

std::string format_date(const std::chrono::year_month_day& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::year_month_day parse_date(std::string_view s, const std::string& where) {
    const auto parts = text::split(s, '-');
    if (parts.size() != 3 || parts[0].size() != 4 || parts[1].size() != 2 || parts[2].size() != 2) {
        fail(ErrorCode::Parse, where + ": expected date YYYY-MM-DD, got '" + std::string(s) + "'");
    }
    const auto y = text::parse_int(parts[0], where);
    const auto m = text::parse_int(parts[1], where);
    const auto d = text::parse_int(parts[2], where);
    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) fail(ErrorCode::Parse, where + ": invalid calendar date '" + std::string(s) + "'");
    return ymd;
}

void check_header_value(const std::string& key, const std::string& value) {
    if (value.find_first_of("\r\n") != std::string::npos || text::trim(value) != value) {
        fail(ErrorCode::Invariant, "metadata '" + key + "' contains a line break or surrounding whitespace");
    }
}

std::string line_ctx(std::size_t line_no) { return "line " + std::to_string(line_no); }

}  // namespace

std::string_view to_string(Discipline d) {
    switch (d) {
        case Discipline::AL: return "AL";
        case Discipline::JP: return "JP";
        case Discipline::FS: return "FS";
    }
    return "?";
}

std::string_view to_string(Weather w) {
    switch (w) {
        case Weather::Sunny: return "sunny";
        case Weather::Cloudy: return "cloudy";
        case Weather::Harsh: return "harsh";
    }
    return "?";
}

Discipline parse_discipline(std::string_view s) {
    if (s == "AL") return Discipline::AL;
    if (s == "JP") return Discipline::JP;
    if (s == "FS") return Discipline::FS;
    fail(ErrorCode::Parse, "unknown discipline '" + std::string(s) + "' (expected AL, JP or FS)");
}

Weather parse_weather(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "sunny") return Weather::Sunny;
    if (lower == "cloudy") return Weather::Cloudy;
    if (lower == "harsh") return Weather::Harsh;
    fail(ErrorCode::Parse, "unknown weather '" + std::string(s) + "' (expected sunny, cloudy or harsh)");
}

std::string_view to_string(Attribute a) { return kAttributeNames[static_cast<std::size_t>(a)]; }

Provenance AttributeSet::provenance(Attribute a) {
    switch (a) {
        case Attribute::SC:
        case Attribute::ARC:
        case Attribute::FM:
        case Attribute::LR: return Provenance::Automatic;
        default: return Provenance::Manual;
    }
}

void validate(const MCVideo& v) {
    if (v.id.empty()) fail(ErrorCode::Invariant, "video id is empty");
    if (v.frames.empty()) fail(ErrorCode::Invariant, "video '" + v.id + "' has no frames");
    if (!(v.meta.fps > 0.0) || !std::isfinite(v.meta.fps)) {
        fail(ErrorCode::Invariant, "video '" + v.id + "': fps must be positive");
    }
    if (!v.meta.resolution.valid()) fail(ErrorCode::Invariant, "video '" + v.id + "': resolution must be positive");
    for (std::size_t i = 0; i < v.frames.size(); ++i) {
        const auto& f = v.frames[i];
        if (f.t != i) {
            fail(ErrorCode::Invariant, "video '" + v.id + "': frame indices must be contiguous from 0; expected " +
                                           std::to_string(i) + ", found " + std::to_string(f.t));
        }
        if (f.camera_id < 1) fail(ErrorCode::Invariant, "frame " + std::to_string(i) + ": camera_id must be >= 1");
        if (!f.box.valid()) fail(ErrorCode::Invariant, "frame " + std::to_string(i) + ": invalid box");
    }
}

MCVideo parse_annotations(std::string_view doc) {
    MCVideo v;
    const auto ls = text::lines(doc);
    std::size_t i = 0;
    std::set<std::string> seen;
    const std::set<std::string> required = {"id", "discipline", "weather", "fps", "width", "height"};

    for (; i < ls.size(); ++i) {
        const auto line = ls[i];
        if (text::trim(line).empty()) {
            ++i;
            break;
        }
        const auto where = line_ctx(i + 1);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) fail(ErrorCode::Parse, where + ": expected 'key: value' header line");
        const std::string key(text::trim(line.substr(0, colon)));
        const std::string value(text::trim(line.substr(colon + 1)));
        if (key.empty()) fail(ErrorCode::Parse, where + ": empty header key");
        if (!seen.insert(key).second) fail(ErrorCode::Parse, where + ": duplicate header key '" + key + "'");
        auto& m = v.meta;
        if (key == "id") {
            v.id = value;
        } else if (key == "discipline") {
            m.discipline = parse_discipline(value);
        } else if (key == "sub_discipline") {
            m.sub_discipline = value;
        } else if (key == "weather") {
            m.weather = parse_weather(value);
        } else if (key == "athlete_id") {
            m.athlete_id = value;
        } else if (key == "nationality") {
            m.athlete_nationality = value;
        } else if (key == "location") {
            m.location = value;
        } else if (key == "country") {
            m.country = value;
        } else if (key == "date") {
            if (!value.empty()) m.date = parse_date(value, where);
        } else if (key == "fps") {
            m.fps = text::parse_double(value, where + " (fps)");
        } else if (key == "width") {
            m.resolution.width = text::parse_double(value, where + " (width)");
        } else if (key == "height") {
            m.resolution.height = text::parse_double(value, where + " (height)");
        } else if (key.rfind("param.", 0) == 0 && key.size() > 6) {
            m.performance_params[key.substr(6)] = value;
        } else {
            fail(ErrorCode::Parse, where + ": unknown header key '" + key + "'");
        }
    }
    for (const auto& k : required) {
        if (!seen.contains(k)) fail(ErrorCode::Parse, "missing required header key '" + k + "'");
    }

    for (; i < ls.size(); ++i) {
        const auto line = ls[i];
        if (line.empty()) continue;
        const auto where = line_ctx(i + 1);
        if (line.rfind("t,", 0) == 0) continue;  // optional column header
        const auto f = text::split(line, ',');
        if (f.size() != 7) {
            fail(ErrorCode::Parse, where + ": expected 7 fields 't,x,y,w,h,visibility,camera_id', got " +
                                       std::to_string(f.size()));
        }
        FrameAnnotation a;
        const auto t = text::parse_int(f[0], where + " field t");
        if (t < 0) fail(ErrorCode::Parse, where + " field t: negative frame index");
        a.t = static_cast<std::size_t>(t);
        a.box = {text::parse_double(f[1], where + " field x"), text::parse_double(f[2], where + " field y"),
                 text::parse_double(f[3], where + " field w"), text::parse_double(f[4], where + " field h")};
        const auto vis = text::trim(f[5]);
        if (vis == "V") {
            a.visibility = Visibility::Visible;
        } else if (vis == "O") {
            a.visibility = Visibility::Occluded;
        } else {
            fail(ErrorCode::Parse, where + " field visibility: expected V or O, got '" + std::string(vis) + "'");
        }
        a.camera_id = static_cast<int>(text::parse_int(f[6], where + " field camera_id"));
        v.frames.push_back(a);
    }
    validate(v);
    return v;
}

std::string serialize(const MCVideo& v) {
    validate(v);
    const auto& m = v.meta;
    const std::vector<std::pair<std::string, std::string>> header = {
        {"id", v.id},
        {"discipline", std::string(to_string(m.discipline))},
        {"sub_discipline", m.sub_discipline},
        {"weather", std::string(to_string(m.weather))},
        {"athlete_id", m.athlete_id},
        {"nationality", m.athlete_nationality},
        {"location", m.location},
        {"country", m.country},
        {"date", m.date ? format_date(*m.date) : std::string()},
        {"fps", text::format_double(m.fps)},
        {"width", text::format_double(m.resolution.width)},
        {"height", text::format_double(m.resolution.height)},
    };
    std::ostringstream out;
    for (const auto& [k, val] : header) {
        check_header_value(k, val);
        out << k << ": " << val << '\n';
    }
    for (const auto& [k, val] : m.performance_params) {
        if (k.empty() || k.find_first_of(":\r\n") != std::string::npos || text::trim(k) != k) {
            fail(ErrorCode::Invariant, "performance parameter key '" + k + "' is not serializable");
        }
        check_header_value("param." + k, val);
        out << "param." << k << ": " << val << '\n';
    }
    out << '\n';
    for (const auto& f : v.frames) {
        out << f.t << ',' << text::format_double(f.box.x) << ',' << text::format_double(f.box.y) << ','
            << text::format_double(f.box.w) << ',' << text::format_double(f.box.h) << ','
            << (f.visibility == Visibility::Visible ? 'V' : 'O') << ',' << f.camera_id << '\n';
    }
    return out.str();
}

MCVideo load_annotations(const std::string& path) {
    try {
        return parse_annotations(text::read_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Io) throw;
        throw Error(e.code(), path + ": " + e.what());
    }
}

void save_annotations(const MCVideo& v, const std::string& path) { text::write_file(path, serialize(v)); }

std::vector<SCClip> segment_clips(const MCVideo& v) {
    std::vector<SCClip> clips;
    for (const auto& f : v.frames) {
        if (clips.empty() || clips.back().camera_id != f.camera_id) {
            clips.push_back({v.id, f.camera_id, f.t, f.t, {}});
        } else {
            clips.back().end = f.t;
        }
    }
    return clips;
}

AttributeSet compute_auto_attributes(std::span<const FrameAnnotation> clip) {
    if (clip.empty()) fail(ErrorCode::InvalidArgument, "compute_auto_attributes: empty clip");
    const auto& first = clip.front().box;
    if (!(first.area() > 0.0)) {
        fail(ErrorCode::InvalidArgument, "compute_auto_attributes: first box has zero area, SC/ARC undefined");
    }
    const double first_area = first.area();
    const double first_aspect = first.w / first.h;
    auto outside = [](double r) { return !(r >= kRatioLow && r <= kRatioHigh); };

    AttributeSet out;
    for (std::size_t i = 0; i < clip.size(); ++i) {
        const auto& b = clip[i].box;
        // A degenerate current box gives an infinite ratio, which is outside the window.
        const double area_ratio = b.area() > 0.0 ? first_area / b.area() : INFINITY;
        const double aspect_ratio = b.w > 0.0 && b.h > 0.0 ? first_aspect / (b.w / b.h) : INFINITY;
        if (outside(area_ratio)) out.set(Attribute::SC, true);
        if (outside(aspect_ratio)) out.set(Attribute::ARC, true);
        if (b.area() < kLowResolutionArea) out.set(Attribute::LR, true);
        if (i > 0) {
            const auto& prev = clip[i - 1].box;
            const auto c0 = geom::center(prev);
            const auto c1 = geom::center(b);
            const double disp = std::hypot(c1.x - c0.x, c1.y - c0.y);
            if (disp > std::sqrt(prev.area())) out.set(Attribute::FM, true);
        }
    }
    return out;
}

std::vector<SCClip> annotate_clips(const MCVideo& v) {
    auto clips = segment_clips(v);
    for (auto& c : clips) {
        c.attributes = compute_auto_attributes(std::span(v.frames).subspan(c.start, c.length()));
    }
    return clips;
}

SplitCondition parse_split_condition(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "date") return SplitCondition::Date;
    if (lower == "athlete") return SplitCondition::Athlete;
    if (lower == "location") return SplitCondition::Location;
    fail(ErrorCode::InvalidArgument, "unknown split condition '" + std::string(s) + "'");
}

std::string_view to_string(SplitCondition c) {
    switch (c) {
        case SplitCondition::Date: return "date";
        case SplitCondition::Athlete: return "athlete";
        case SplitCondition::Location: return "location";
    }
    return "?";
}

Split generate_splits(std::span<const MCVideo> videos, SplitCondition condition, double train_fraction,
                      unsigned long long /*seed*/) {
    if (videos.size() < 2) fail(ErrorCode::InvalidArgument, "generate_splits: need at least 2 videos");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        fail(ErrorCode::InvalidArgument, "generate_splits: train fraction must be in (0,1)");
    }
    std::set<std::string> ids;
    for (const auto& v : videos) {
        if (!ids.insert(v.id).second) fail(ErrorCode::InvalidArgument, "generate_splits: duplicate id '" + v.id + "'");
    }

    Split split;
    if (condition == SplitCondition::Date) {
        std::map<Discipline, std::vector<const MCVideo*>> by_disc;
        for (const auto& v : videos) {
            if (!v.meta.date) fail(ErrorCode::InvalidArgument, "generate_splits: video '" + v.id + "' has no date");
            by_disc[v.meta.discipline].push_back(&v);
        }
        for (auto& [disc, vs] : by_disc) {
            std::sort(vs.begin(), vs.end(), [](const MCVideo* a, const MCVideo* b) {
                return std::tie(*a->meta.date, a->id) < std::tie(*b->meta.date, b->id);
            });
            const auto n_train =
                static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(vs.size()) - 1e-9));
            for (std::size_t k = 0; k < vs.size(); ++k) (k < n_train ? split.train : split.test).push_back(vs[k]->id);
        }
    } else {
        auto key_of = [&](const MCVideo& v) -> const std::string& {
            return condition == SplitCondition::Athlete ? v.meta.athlete_id : v.meta.location;
        };
        struct Group {
            std::string key;
            std::vector<const MCVideo*> members;
            std::map<Discipline, double> per_disc;
        };
        std::map<std::string, Group> groups;
        std::map<Discipline, double> target;
        for (const auto& v : videos) {
            const auto& key = key_of(v);
            if (key.empty()) {
                fail(ErrorCode::InvalidArgument, "generate_splits: video '" + v.id + "' has no " +
                                                     std::string(to_string(condition)) + " metadata");
            }
            auto& g = groups[key];
            g.key = key;
            g.members.push_back(&v);
            g.per_disc[v.meta.discipline] += 1.0;
            target[v.meta.discipline] += train_fraction;
        }
        std::vector<Group*> order;
        for (auto& [k, g] : groups) order.push_back(&g);
        std::stable_sort(order.begin(), order.end(),
                         [](const Group* a, const Group* b) { return a->members.size() > b->members.size(); });

        std::map<Discipline, double> train_count;
        auto distance = [&](const std::map<Discipline, double>& counts) {
            double d = 0.0;
            for (const auto& [disc, tgt] : target) {
                const auto it = counts.find(disc);
                d += std::abs((it == counts.end() ? 0.0 : it->second) - tgt);
            }
            return d;
        };
        for (const Group* g : order) {
            auto candidate = train_count;
            for (const auto& [disc, n] : g->per_disc) candidate[disc] += n;
            const bool to_train = distance(candidate) < distance(train_count);
            if (to_train) train_count = std::move(candidate);
            for (const auto* v : g->members) (to_train ? split.train : split.test).push_back(v->id);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

const Keypoint* KeypointPose::find(const std::string& name) const {
    const auto it = joints.find(name);
    return it == joints.end() ? nullptr : &it->second;
}

geom::BBox keypoints_to_box(const KeypointPose& pose, double padding_fraction) {
    if (padding_fraction < 0.0) fail(ErrorCode::InvalidArgument, "keypoints_to_box: negative padding");
    bool any = false;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    for (const auto& [name, kp] : pose.joints) {
        if (!kp.present) continue;
        if (!any) {
            x0 = x1 = kp.x;
            y0 = y1 = kp.y;
            any = true;
        } else {
            x0 = std::min(x0, kp.x);
            x1 = std::max(x1, kp.x);
            y0 = std::min(y0, kp.y);
            y1 = std::max(y1, kp.y);
        }
    }
    if (!any) fail(ErrorCode::InvalidArgument, "keypoints_to_box: no present keypoints");
    const double w = x1 - x0;
    const double h = y1 - y0;
    const double pw = w * padding_fraction;
    const double ph = h * padding_fraction;
    return {x0 - pw / 2.0, y0 - ph / 2.0, w + pw, h + ph};
}

std::map<std::size_t, KeypointPose> parse_keypoints(std::string_view doc) {
    std::map<std::size_t, KeypointPose> poses;
    const auto ls = text::lines(doc);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto line = ls[i];
        if (line.empty() || line.rfind("frame,", 0) == 0) continue;
        const auto where = line_ctx(i + 1);
        const auto f = text::split(line, ',');
        if (f.size() != 5) fail(ErrorCode::Parse, where + ": expected 'frame,joint_name,x,y,present'");
        const auto frame = text::parse_int(f[0], where + " field frame");
        if (frame < 0) fail(ErrorCode::Parse, where + ": negative frame");
        const std::string name(text::trim(f[1]));
        if (name.empty()) fail(ErrorCode::Parse, where + ": empty joint name");
        Keypoint kp{text::parse_double(f[2], where + " field x"), text::parse_double(f[3], where + " field y"), true};
        const auto present = text::parse_int(f[4], where + " field present");
        if (present != 0 && present != 1) fail(ErrorCode::Parse, where + ": present must be 0 or 1");
        kp.present = present == 1;
        auto& pose = poses[static_cast<std::size_t>(frame)];
        if (!pose.joints.emplace(name, kp).second) {
            fail(ErrorCode::Parse, where + ": duplicate joint '" + name + "' in frame " + std::to_string(frame));
        }
    }
    return poses;
}

std::string serialize_keypoints(const std::map<std::size_t, KeypointPose>& poses) {
    std::ostringstream out;
    for (const auto& [frame, pose] : poses) {
        for (const auto& [name, kp] : pose.joints) {
            out << frame << ',' << name << ',' << text::format_double(kp.x) << ',' << text::format_double(kp.y) << ','
                << (kp.present ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace skitb::data
