/*
 * skitb: long-term single-target tracking evaluation for multi-camera skiing video.
 *
 * C interface to the toolkit. Objects are opaque handles created by *_load / *_create functions and
 * released with the matching *_free. Every fallible call returns a skitb_status; on failure a
 * message is available from skitb_last_error() on the calling thread until the next failing call.
 */
#ifndef SKITB_SKITB_H
#define SKITB_SKITB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SKITB_API __declspec(dllexport)
#else
#define SKITB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum skitb_status {
    SKITB_OK = 0,
    SKITB_ERR_INVALID_ARGUMENT = 1,
    SKITB_ERR_PARSE = 2,
    SKITB_ERR_INVARIANT = 3,
    SKITB_ERR_NO_INIT = 4,
    SKITB_ERR_BACKEND = 5,
    SKITB_ERR_PROTOCOL = 6,
    SKITB_ERR_IO = 7,
    SKITB_ERR_CONFIG = 8,
    SKITB_ERR_INTERNAL = 99
} skitb_status;

#define SKITB_GSR_WINDOWS 7

/* Attribute bits of skitb_clip.attributes. */
enum {
    SKITB_ATTR_CM = 1u << 0,
    SKITB_ATTR_SC = 1u << 1,
    SKITB_ATTR_BC = 1u << 2,
    SKITB_ATTR_ARC = 1u << 3,
    SKITB_ATTR_IV = 1u << 4,
    SKITB_ATTR_POC = 1u << 5,
    SKITB_ATTR_MB = 1u << 6,
    SKITB_ATTR_FM = 1u << 7,
    SKITB_ATTR_FOC = 1u << 8,
    SKITB_ATTR_LR = 1u << 9
};

typedef struct skitb_box {
    double x; /* left */
    double y; /* top */
    double w;
    double h;
} skitb_box;

typedef struct skitb_dims {
    double width;
    double height;
} skitb_dims;

typedef struct skitb_clip {
    int camera_id;
    size_t start;
    size_t end; /* inclusive */
    unsigned attributes;
} skitb_clip;

typedef struct skitb_scores {
    double pr;
    double re;
    double f;
    double tau;
    int pr_defined;
    double gsr[SKITB_GSR_WINDOWS]; /* windows 1, 7, 15, 22, 30, 60, 90 frames */
} skitb_scores;

typedef struct skitb_eval_flags {
    int include_occluded;
    double gsr_iou;
} skitb_eval_flags;

typedef struct skitb_eval_config {
    const char* backend;       /* backend spec, see README */
    const char* init;          /* "gt" or "detector:<path>[:thr]"; NULL means "gt" */
    int include_occluded;
    double gsr_iou;
    uint64_t seed;
    const char* image_pattern; /* may be NULL */
    const char* command_line;  /* recorded in the manifest; may be NULL */
} skitb_eval_config;

typedef struct skitb_simulation {
    size_t videos;
    size_t frames;
    size_t cameras;
    uint64_t seed;
    double detection_center_sigma;
    double detection_size_sigma;
    double false_positive_rate;
    double miss_rate;
} skitb_simulation;

typedef struct skitb_video skitb_video;
typedef struct skitb_trace skitb_trace;
typedef struct skitb_backend skitb_backend;
typedef struct skitb_report skitb_report;

SKITB_API const char* skitb_version(void);
SKITB_API const char* skitb_last_error(void);
SKITB_API const char* skitb_status_name(skitb_status status);

/* Geometry */
SKITB_API double skitb_iou(skitb_box a, skitb_box b);
SKITB_API skitb_status skitb_relocalization_reference(skitb_box prev_confident, skitb_dims dims, double factor,
                                                      skitb_box* out);

/* Annotated multi-camera videos */
SKITB_API skitb_status skitb_video_load(const char* path, skitb_video** out);
SKITB_API skitb_status skitb_video_parse(const char* doc, size_t len, skitb_video** out);
SKITB_API skitb_status skitb_video_save(const skitb_video* video, const char* path);
SKITB_API void skitb_video_free(skitb_video* video);
SKITB_API const char* skitb_video_id(const skitb_video* video);
SKITB_API size_t skitb_video_frame_count(const skitb_video* video);
SKITB_API double skitb_video_fps(const skitb_video* video);
SKITB_API skitb_status skitb_video_frame(const skitb_video* video, size_t t, skitb_box* box, int* occluded,
                                         int* camera_id);
/* Single-camera clips with automatic attributes. Writes up to `capacity` clips, total in *count. */
SKITB_API skitb_status skitb_video_clips(const skitb_video* video, skitb_clip* out, size_t capacity, size_t* count);

/* Prediction traces */
SKITB_API skitb_status skitb_trace_load(const char* path, skitb_trace** out);
SKITB_API skitb_status skitb_trace_save(const skitb_trace* trace, const char* path);
SKITB_API void skitb_trace_free(skitb_trace* trace);
SKITB_API size_t skitb_trace_size(const skitb_trace* trace);
/* present = 0 for an absent box; *box is then left untouched. */
SKITB_API skitb_status skitb_trace_frame(const skitb_trace* trace, size_t t, skitb_box* box, int* present,
                                         double* confidence);

/* Trackers. `video_path` is substituted into extern command lines and may be NULL. */
SKITB_API skitb_status skitb_backend_create(const char* spec, const skitb_video* video, const char* video_path,
                                            uint64_t seed, skitb_backend** out);
SKITB_API void skitb_backend_free(skitb_backend* backend);

/* One-pass evaluation. `init` as in skitb_eval_config. `costs` receives per-frame update seconds
 * (frame_count entries) and may be NULL. */
SKITB_API skitb_status skitb_run_ope(skitb_backend* backend, const skitb_video* video, const char* init,
                                     skitb_trace** trace, double* costs);

/* Metrics */
SKITB_API skitb_status skitb_score(const skitb_trace* trace, const skitb_video* video, const skitb_eval_flags* flags,
                                   skitb_scores* out);
SKITB_API skitb_status skitb_latency(const double* costs, size_t n, double fps, double* delays);

/* Dataset evaluation. skitb_report_evaluate may be called concurrently from several threads; a
 * failing sequence is recorded in the report and its status returned. */
SKITB_API skitb_status skitb_report_create(const skitb_eval_config* config, skitb_report** out);
SKITB_API void skitb_report_free(skitb_report* report);
SKITB_API skitb_status skitb_report_evaluate(skitb_report* report, const char* annotation_path);
SKITB_API skitb_status skitb_report_overall(const skitb_report* report, skitb_scores* out, size_t* succeeded,
                                            size_t* failed);
SKITB_API int skitb_report_has_protocol_failure(const skitb_report* report);
/* what: "all", "gsr" or "latency" */
SKITB_API skitb_status skitb_report_write(const skitb_report* report, const char* out_dir, const char* what);

/* Datasets */
/* Lists annotation files; calls `visit` once per path in sorted order. */
SKITB_API skitb_status skitb_dataset_list(const char* dataset_dir, void (*visit)(const char* path, void* user),
                                          void* user);
SKITB_API skitb_status skitb_simulate(const char* out_dir, const skitb_simulation* spec);
/* condition: "date", "athlete" or "location". Writes a JSON split description to out_path. */
SKITB_API skitb_status skitb_split(const skitb_video* const* videos, size_t n, const char* condition,
                                   double train_fraction, uint64_t seed, const char* out_path);
SKITB_API skitb_status skitb_attributes_write(const skitb_video* const* videos, size_t n, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* SKITB_SKITB_H */
