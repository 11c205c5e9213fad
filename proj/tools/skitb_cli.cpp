// skitb command-line front end. Talks to the toolkit only through the C interface.
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skitb/skitb.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSequenceFailure = 3, kProtocol = 4 };

struct Options {
    std::string dataset;
    std::string backend;
    std::string init = "gt";
    bool exclude_occluded = false;
    double gsr_iou = 0.5;
    unsigned jobs = 1;
    std::uint64_t seed = 0;
    std::string out = "skitb_out";
    std::string image_pattern;

    std::string condition = "date";
    double train_fraction = 0.6;

    std::size_t videos = 5;
    std::size_t frames = 300;
    std::size_t cameras = 3;
    double det_center_sigma = 0.0;
    double det_size_sigma = 0.0;
    double fp_rate = 0.0;
    double miss_rate = 0.0;
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(skitb_status s, const std::string& what) {
    if (s == SKITB_OK) return;
    const std::string msg = what + ": " + skitb_last_error();
    if (s == SKITB_ERR_CONFIG || s == SKITB_ERR_INVALID_ARGUMENT || s == SKITB_ERR_PARSE || s == SKITB_ERR_IO)
        throw ConfigError(msg);
    throw std::runtime_error(msg);
}

std::vector<std::string> dataset_files(const std::string& dir) {
    if (dir.empty()) throw ConfigError("no dataset given (--dataset or SKITB_DATASET)");
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory '" + dir + "' does not exist");
    std::vector<std::string> files;
    check(skitb_dataset_list(
              dir.c_str(),
              [](const char* p, void* user) { static_cast<std::vector<std::string>*>(user)->emplace_back(p); },
              &files),
          "listing dataset");
    if (files.empty()) throw ConfigError("dataset '" + dir + "' contains no annotation files");
    return files;
}

struct VideoSet {
    std::vector<skitb_video*> handles;
    ~VideoSet() {
        for (auto* v : handles) skitb_video_free(v);
    }
};

void load_videos(const std::string& dir, VideoSet& set) {
    for (const auto& f : dataset_files(dir)) {
        skitb_video* v = nullptr;
        check(skitb_video_load(f.c_str(), &v), "loading " + f);
        set.handles.push_back(v);
    }
}

void write_manifest(const std::string& out_dir, const std::string& command, const nlohmann::json& flags,
                    const std::string& command_line) {
    nlohmann::json m{{"tool", "skitb"},
                     {"version", skitb_version()},
                     {"command", command},
                     {"flags", flags},
                     {"command_line", command_line}};
    std::ofstream(fs::path(out_dir) / "manifest.json") << m.dump(2) << "\n";
}

int run_evaluation(const Options& o, const std::string& what, const std::string& command_line) {
    if (o.backend.empty()) throw ConfigError("--backend is required");
    if (o.gsr_iou < 0.0 || o.gsr_iou > 1.0) throw ConfigError("--gsr-iou must be in [0,1]");
    const auto files = dataset_files(o.dataset);

    skitb_eval_config cfg{};
    cfg.backend = o.backend.c_str();
    cfg.init = o.init.c_str();
    cfg.include_occluded = o.exclude_occluded ? 0 : 1;
    cfg.gsr_iou = o.gsr_iou;
    cfg.seed = o.seed;
    cfg.image_pattern = o.image_pattern.empty() ? nullptr : o.image_pattern.c_str();
    cfg.command_line = command_line.c_str();
    skitb_report* report = nullptr;
    check(skitb_report_create(&cfg, &report), "configuring evaluation");
    std::unique_ptr<skitb_report, void (*)(skitb_report*)> guard(report, skitb_report_free);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> config_failure{false};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            const auto s = skitb_report_evaluate(report, files[i].c_str());
            if (s == SKITB_OK) continue;
            if (s == SKITB_ERR_CONFIG) config_failure = true;
            std::lock_guard lock(log_mutex);
            std::fprintf(stderr, "skitb: %s: %s: %s\n", files[i].c_str(), skitb_status_name(s), skitb_last_error());
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(files.size())));
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    fs::create_directories(o.out);
    check(skitb_report_write(report, o.out.c_str(), what.c_str()), "writing report");

    skitb_scores overall{};
    std::size_t ok = 0, failed = 0;
    if (skitb_report_overall(report, &overall, &ok, &failed) == SKITB_OK) {
        std::printf("sequences %zu ok, %zu failed\n", ok, failed);
        std::printf("overall Pr %.4f Re %.4f F %.4f\n", overall.pr, overall.re, overall.f);
    } else {
        std::printf("sequences 0 ok, %zu failed\n", failed);
    }
    if (config_failure) return kConfig;
    if (skitb_report_has_protocol_failure(report)) return kProtocol;
    return failed ? kSequenceFailure : kOk;
}

int run_attributes(const Options& o, const std::string& command_line) {
    VideoSet set;
    load_videos(o.dataset, set);
    fs::create_directories(o.out);
    const auto path = (fs::path(o.out) / "attributes.csv").string();
    check(skitb_attributes_write(set.handles.data(), set.handles.size(), path.c_str()), "writing attributes");
    write_manifest(o.out, "attributes", {{"dataset", o.dataset}}, command_line);
    return kOk;
}

int run_split(const Options& o, const std::string& command_line) {
    VideoSet set;
    load_videos(o.dataset, set);
    fs::create_directories(o.out);
    const auto path = (fs::path(o.out) / ("split_" + o.condition + ".json")).string();
    check(skitb_split(set.handles.data(), set.handles.size(), o.condition.c_str(), o.train_fraction, o.seed,
                      path.c_str()),
          "generating split");
    write_manifest(o.out, "split",
                   {{"dataset", o.dataset},
                    {"condition", o.condition},
                    {"train_fraction", o.train_fraction},
                    {"seed", o.seed}},
                   command_line);
    std::printf("%s\n", path.c_str());
    return kOk;
}

int run_simulate(const Options& o) {
    skitb_simulation spec{};
    spec.videos = o.videos;
    spec.frames = o.frames;
    spec.cameras = o.cameras;
    spec.seed = o.seed;
    spec.detection_center_sigma = o.det_center_sigma;
    spec.detection_size_sigma = o.det_size_sigma;
    spec.false_positive_rate = o.fp_rate;
    spec.miss_rate = o.miss_rate;
    check(skitb_simulate(o.out.c_str(), &spec), "simulating dataset");
    std::printf("%s\n", o.out.c_str());
    return kOk;
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    if (const char* env = std::getenv("SKITB_DATASET")) o.dataset = env;

    CLI::App app{"Long-term tracking evaluation for multi-camera skiing video"};
    app.set_config("--config", "", "TOML/INI file with flag values");
    app.require_subcommand(1);

    auto add_dataset = [&](CLI::App* c) {
        c->add_option("--dataset", o.dataset, "Dataset root (default: $SKITB_DATASET)");
    };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "Output directory")->capture_default_str(); };
    auto add_eval = [&](CLI::App* c) {
        add_dataset(c);
        c->add_option("--backend", o.backend,
                      "trace:<path> | sort:<path> | sort+reacquire:<path> | oracle[:sigma] | fusion:<a>+<b> | extern:cmd:<cmd> | "
                      "extern:tcp:<host>:<port>")
            ->required();
        c->add_option("--init", o.init, "gt | detector:<path>[:thr]")->capture_default_str();
        c->add_flag("--exclude-occluded", o.exclude_occluded, "Score visible frames only");
        c->add_option("--gsr-iou", o.gsr_iou, "Overlap below which a frame counts as wrong for GSR")
            ->capture_default_str();
        c->add_option("--jobs", o.jobs, "Sequences evaluated in parallel")->check(CLI::PositiveNumber);
        c->add_option("--seed", o.seed, "Seed for stochastic backends")->capture_default_str();
        c->add_option("--image-pattern", o.image_pattern, "Frame path template with {id} and {t}");
        add_out(c);
    };

    auto* evaluate = app.add_subcommand("evaluate", "One-pass evaluation with full report");
    add_eval(evaluate);
    auto* gsr = app.add_subcommand("gsr", "GSR curves over the recovery windows");
    add_eval(gsr);
    auto* latency = app.add_subcommand("latency", "Per-frame waiting times under real-time arrival");
    add_eval(latency);

    auto* attributes = app.add_subcommand("attributes", "Per-clip attribute table");
    add_dataset(attributes);
    add_out(attributes);

    auto* split = app.add_subcommand("split", "Train/test split under a generalization condition");
    add_dataset(split);
    split->add_option("--condition", o.condition, "date | athlete | location")
        ->transform(CLI::IsMember({"date", "athlete", "location"}, CLI::ignore_case))
        ->capture_default_str();
    split->add_option("--train-fraction", o.train_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    split->add_option("--seed", o.seed)->capture_default_str();
    add_out(split);

    auto* simulate = app.add_subcommand("simulate", "Write a synthetic annotated dataset");
    simulate->add_option("--videos", o.videos)->capture_default_str();
    simulate->add_option("--frames", o.frames)->capture_default_str();
    simulate->add_option("--cameras", o.cameras)->capture_default_str();
    simulate->add_option("--seed", o.seed)->capture_default_str();
    simulate->add_option("--det-center-sigma", o.det_center_sigma, "Detection centre noise (px)");
    simulate->add_option("--det-size-sigma", o.det_size_sigma, "Relative detection size noise");
    simulate->add_option("--fp-rate", o.fp_rate, "False positives per frame")->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--miss-rate", o.miss_rate, "Missed detection probability")->check(CLI::Range(0.0, 1.0));
    add_out(simulate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    const auto command_line = join_args(argc, argv);
    try {
        if (*evaluate) return run_evaluation(o, "all", command_line);
        if (*gsr) return run_evaluation(o, "gsr", command_line);
        if (*latency) return run_evaluation(o, "latency", command_line);
        if (*attributes) return run_attributes(o, command_line);
        if (*split) return run_split(o, command_line);
        if (*simulate) return run_simulate(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "skitb: %s\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "skitb: %s\n", e.what());
        return kSequenceFailure;
    }
    return kOk;
}
