#pragma once

// Gradient / vertical-Laplacian overtake detector used as the classical
// baseline. It never reports lane changes.

#include <vector>

#include "mprof/core.hpp"
#include "mprof/profile.hpp"
#include "mprof/records.hpp"

namespace mprof::classic {

struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<double> gx;         // d/dx, row-major T x W
    std::vector<double> gt;         // d/dt
    std::vector<double> magnitude;
    std::vector<double> angle;      // atan2(gt, gx), in (-pi, pi]

    std::size_t index(int t, int x) const { return static_cast<std::size_t>(t) * width + x; }
};

/// Single-channel intensity plane as doubles (luma for color profiles).
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int t, int x) const { return values[static_cast<std::size_t>(t) * width + x]; }
};

Plane to_plane(const MotionProfile& p);

struct ColumnSpan {
    int begin = 0;
    int end = 0;  // exclusive
    int size() const { return end - begin; }
};

/// Left band [0, W/4) and right band [W - W/4, W); mirror images of each other.
ColumnSpan left_band(int width);
ColumnSpan right_band(int width);

struct ClassicParams {
    double magnitude_thresh = 20.0;
    int half_step = 5;
    double response_thresh = 8.0;
    int min_duration = 15;
    /// Above-threshold runs separated by fewer rows than this merge into one
    /// interval, so the entry and exit responses of a trace form one event.
    int merge_gap = 60;
    /// Sign of g_x * g_t that marks a trace moving outward in the left band;
    /// the right band uses the opposite sign.
    int left_outward_sign = 1;

    /// Throws InvalidArgument.
    void validate() const;
    bool operator==(const ClassicParams&) const = default;
};

Json params_to_json(const ClassicParams& p);
/// Missing keys keep their defaults; unknown keys throw InvalidArgument.
ClassicParams params_from_json(const Json& j);

/// Central differences inside, one-sided at the borders. Throws ProfileTooSmall
/// below 3 x 3.
GradientField gradient_field(const Plane& p);
GradientField gradient_field(const MotionProfile& p);

/// L(t) = mean over band columns of I(t-k) - 2 I(t) + I(t+k); rows whose
/// stencil leaves the profile are 0. Throws InvalidArgument on an empty band
/// or k outside [1, T/2).
std::vector<double> vertical_laplacian(const Plane& p, ColumnSpan band, int k);
std::vector<double> vertical_laplacian(const MotionProfile& p, ColumnSpan band, int k);

struct Interval {
    int begin = 0;
    int end = 0;  // exclusive
    bool operator==(const Interval&) const = default;
};

/// Runs of |signal| > thresh, merged across gaps shorter than merge_gap rows,
/// keeping those at least min_duration long.
std::vector<Interval> threshold_intervals(const std::vector<double>& signal, double thresh,
                                          int merge_gap, int min_duration);

/// Overtake detections with score 1, in time order (left band first on ties).
std::vector<DetectionBox> detect_classic(const MotionProfile& p, int v_x, const ClassicParams& params = {});

}  // namespace mprof::classic
