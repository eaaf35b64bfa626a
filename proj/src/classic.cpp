#include "mprof/classic.hpp"

#include <cmath>

namespace mprof::classic {

Plane to_plane(const MotionProfile& p) {
    p.dims.validate();
    Plane out{p.dims.width, p.dims.height, {}};
    out.values.resize(static_cast<std::size_t>(p.dims.width) * p.dims.height);
    for (int t = 0; t < p.dims.height; ++t) {
        for (int x = 0; x < p.dims.width; ++x) {
            double v = p.at(t, x, 0);
            if (p.dims.channels == 3)
                v = 0.299 * p.at(t, x, 0) + 0.587 * p.at(t, x, 1) + 0.114 * p.at(t, x, 2);
            out.values[static_cast<std::size_t>(t) * p.dims.width + x] = v;
        }
    }
    return out;
}

ColumnSpan left_band(int width) { return {0, width / 4}; }
ColumnSpan right_band(int width) { return {width - width / 4, width}; }

void ClassicParams::validate() const {
    if (!(magnitude_thresh > 0.0)) throw Error(ErrorCode::InvalidArgument, "magnitude threshold must be > 0");
    if (!(response_thresh > 0.0)) throw Error(ErrorCode::InvalidArgument, "response threshold must be > 0");
    if (half_step < 1) throw Error(ErrorCode::InvalidArgument, "half_step must be >= 1");
    if (min_duration < 1) throw Error(ErrorCode::InvalidArgument, "min_duration must be >= 1");
    if (merge_gap < 0) throw Error(ErrorCode::InvalidArgument, "merge_gap must be >= 0");
    if (left_outward_sign != 1 && left_outward_sign != -1)
        throw Error(ErrorCode::InvalidArgument, "left_outward_sign must be +1 or -1");
}

Json params_to_json(const ClassicParams& p) {
    Json j;
    j["magnitude_thresh"] = p.magnitude_thresh;
    j["half_step"] = p.half_step;
    j["response_thresh"] = p.response_thresh;
    j["min_duration"] = p.min_duration;
    j["merge_gap"] = p.merge_gap;
    j["left_outward_sign"] = p.left_outward_sign;
    return j;
}

ClassicParams params_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "classic params must be a JSON object");
    ClassicParams p;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "magnitude_thresh") p.magnitude_thresh = value.get<double>();
            else if (key == "half_step") p.half_step = value.get<int>();
            else if (key == "response_thresh") p.response_thresh = value.get<double>();
            else if (key == "min_duration") p.min_duration = value.get<int>();
            else if (key == "merge_gap") p.merge_gap = value.get<int>();
            else if (key == "left_outward_sign") p.left_outward_sign = value.get<int>();
            else throw Error(ErrorCode::InvalidArgument, "unknown classic parameter '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad classic parameter: ") + e.what());
    }
    p.validate();
    return p;
}

GradientField gradient_field(const Plane& p) {
    if (p.width < 3 || p.height < 3)
        throw Error(ErrorCode::ProfileTooSmall, "gradient needs at least 3x3, got " + std::to_string(p.width) +
                                                    "x" + std::to_string(p.height));
    GradientField g;
    g.width = p.width;
    g.height = p.height;
    const std::size_t n = p.values.size();
    g.gx.resize(n);
    g.gt.resize(n);
    g.magnitude.resize(n);
    g.angle.resize(n);
    for (int t = 0; t < p.height; ++t) {
        for (int x = 0; x < p.width; ++x) {
            double dx;
            if (x == 0) dx = p.at(t, 1) - p.at(t, 0);
            else if (x == p.width - 1) dx = p.at(t, x) - p.at(t, x - 1);
            else dx = 0.5 * (p.at(t, x + 1) - p.at(t, x - 1));
            double dt;
            if (t == 0) dt = p.at(1, x) - p.at(0, x);
            else if (t == p.height - 1) dt = p.at(t, x) - p.at(t - 1, x);
            else dt = 0.5 * (p.at(t + 1, x) - p.at(t - 1, x));
            const std::size_t i = g.index(t, x);
            g.gx[i] = dx;
            g.gt[i] = dt;
            g.magnitude[i] = std::hypot(dx, dt);
            g.angle[i] = std::atan2(dt, dx);
        }
    }
    return g;
}

GradientField gradient_field(const MotionProfile& p) {
    if (p.dims.width < 3 || p.dims.height < 3)
        throw Error(ErrorCode::ProfileTooSmall, "gradient needs at least 3x3");
    return gradient_field(to_plane(p));
}

std::vector<double> vertical_laplacian(const Plane& p, ColumnSpan band, int k) {
    if (band.size() <= 0 || band.begin < 0 || band.end > p.width)
        throw Error(ErrorCode::InvalidArgument, "band must be a non-empty column span inside the profile");
    if (k < 1 || 2 * k >= p.height)
        throw Error(ErrorCode::InvalidArgument, "laplacian half-step must satisfy 1 <= k < T/2");
    std::vector<double> out(static_cast<std::size_t>(p.height), 0.0);
    for (int t = k; t + k < p.height; ++t) {
        double acc = 0.0;
        for (int x = band.begin; x < band.end; ++x) acc += p.at(t - k, x) - 2.0 * p.at(t, x) + p.at(t + k, x);
        out[static_cast<std::size_t>(t)] = acc / band.size();
    }
    return out;
}

std::vector<double> vertical_laplacian(const MotionProfile& p, ColumnSpan band, int k) {
    return vertical_laplacian(to_plane(p), band, k);
}

std::vector<Interval> threshold_intervals(const std::vector<double>& signal, double thresh, int merge_gap,
                                          int min_duration) {
    std::vector<Interval> runs;
    const int n = static_cast<int>(signal.size());
    for (int t = 0; t < n;) {
        if (std::abs(signal[static_cast<std::size_t>(t)]) <= thresh) {
            ++t;
            continue;
        }
        int e = t;
        while (e < n && std::abs(signal[static_cast<std::size_t>(e)]) > thresh) ++e;
        if (!runs.empty() && t - runs.back().end < merge_gap) runs.back().end = e;
        else runs.push_back({t, e});
        t = e;
    }
    std::erase_if(runs, [&](const Interval& r) { return r.end - r.begin < min_duration; });
    return runs;
}

namespace {

// Sign of the summed g_x * g_t over strong gradients, relative to `outward`.
// Weighting by the product lets a fast trace outvote slowly drifting lane
// markings whose edges are strong but nearly static.
int dominant_sign(const GradientField& g, ColumnSpan band, Interval rows, double mag_thresh, int outward) {
    double sum = 0.0;
    for (int t = rows.begin; t < rows.end; ++t) {
        for (int x = band.begin; x < band.end; ++x) {
            const std::size_t i = g.index(t, x);
            if (g.magnitude[i] > mag_thresh) sum += g.gx[i] * g.gt[i];
        }
    }
    sum *= outward;
    return sum > 0.0 ? 1 : (sum < 0.0 ? -1 : 0);
}

}  // namespace

std::vector<DetectionBox> detect_classic(const MotionProfile& p, int v_x, const ClassicParams& params) {
    params.validate();
    const Plane plane = to_plane(p);
    const GradientField g = gradient_field(plane);
    if (2 * params.half_step >= plane.height) return {};

    struct Side {
        ManeuverClass cls;
        ColumnSpan band;
        int outward;
    };
    const Side sides[] = {
        {ManeuverClass::OvertakeLeft, left_band(plane.width), params.left_outward_sign},
        {ManeuverClass::OvertakeRight, right_band(plane.width), -params.left_outward_sign},
    };

    std::vector<DetectionBox> out;
    for (const auto& side : sides) {
        if (side.band.size() <= 0) continue;
        const auto lap = vertical_laplacian(plane, side.band, params.half_step);
        for (const auto& iv : threshold_intervals(lap, params.response_thresh, params.merge_gap,
                                                  params.min_duration)) {
            if (dominant_sign(g, side.band, iv, params.magnitude_thresh, side.outward) <= 0) continue;
            DetectionBox b = event_to_bbox({side.cls, iv.begin, iv.end}, v_x, p.dims);
            b.score = 1.0;
            out.push_back(b);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const DetectionBox& a, const DetectionBox& b) { return a.t_min < b.t_min; });
    return out;
}

}  // namespace mprof::classic
