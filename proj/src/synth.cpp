#include "mprof/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mprof {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
    dims.validate();
    if (v_x < 1 || v_x >= dims.width)
        throw Error(ErrorCode::InvalidArgument, "v_x must lie in [1, W)");
    if (noise_sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
    if (background.curve_count < 0 || background.curve_half_width <= 0.0 ||
        background.drift_period <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "invalid background parameters");
    for (const auto& m : maneuvers) {
        if (m.t_start < 0 || m.t_start >= m.t_end || m.t_end > dims.height)
            throw Error(ErrorCode::InvalidEvent, "maneuver interval outside [0, T)");
        if (m.thickness < 1) throw Error(ErrorCode::InvalidArgument, "thickness must be >= 1");
        if (m.intensity < 0 || m.intensity > 255 || m.slope < 0.0)
            throw Error(ErrorCode::InvalidArgument, "invalid maneuver intensity/slope");
    }
    for (std::size_t a = 0; a < maneuvers.size(); ++a) {
        for (std::size_t b = a + 1; b < maneuvers.size(); ++b) {
            const auto& ma = maneuvers[a];
            const auto& mb = maneuvers[b];
            const bool overlap = ma.t_start < mb.t_end && mb.t_start < ma.t_end;
            if (overlap && is_left(ma.cls) == is_left(mb.cls))
                throw Error(ErrorCode::OverlapUnrenderable,
                            "two same-side maneuvers overlap in time");
        }
    }
}

SceneSpec SceneSpec::mirrored() const {
    SceneSpec m = *this;
    m.v_x = dims.width - v_x;
    m.background.drift_amplitude = -background.drift_amplitude;
    for (auto& man : m.maneuvers) man.cls = mprof::mirrored(man.cls);
    return m;
}

namespace {

double smoothstep(double s) {
    s = std::clamp(s, 0.0, 1.0);
    return s * s * (3.0 - 2.0 * s);
}

// Coverage of a band of the given width centered at distance d, with a one
// pixel linear edge.
double band_coverage(double d, double width) {
    return std::clamp(width / 2.0 + 0.5 - std::abs(d), 0.0, 1.0);
}

}  // namespace

SynthSample render_profile(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int W = spec.dims.width;
    const int T = spec.dims.height;
    const auto& bg = spec.background;
    const double vx = spec.v_x;
    const double lane_shift = W / 8.0;
    const double spacing = bg.curve_count > 0 ? static_cast<double>(W) / bg.curve_count : 0.0;

    std::vector<double> curve_base(static_cast<std::size_t>(bg.curve_count));
    for (int i = 0; i < bg.curve_count; ++i)
        curve_base[static_cast<std::size_t>(i)] = (i - (bg.curve_count - 1) / 2.0) * spacing;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

    MotionProfile profile;
    profile.dims = spec.dims;
    profile.samples.resize(spec.dims.sample_count());
    profile.provenance.video_id = spec.video_id;
    profile.provenance.belt = kMediumBelt;
    profile.provenance.v_x = spec.v_x;
    profile.provenance.fps = 30.0;

    std::vector<double> curve_offset(curve_base.size());
    std::vector<double> band_center;
    std::vector<const ManeuverSpec*> band_spec;
    for (int t = 0; t < T; ++t) {
        const double tc = t + 0.5;
        const double drift =
            bg.drift_amplitude * std::sin(2.0 * std::numbers::pi * t / bg.drift_period + bg.drift_phase);
        // The scene slides opposite to the ego motion: a change to the left
        // moves the markings right.
        double shift = 0.0;
        band_center.clear();
        band_spec.clear();
        for (const auto& m : spec.maneuvers) {
            const double s = (tc - m.t_start) / (m.t_end - m.t_start);
            if (is_lane_change(m.cls)) {
                const double sign = m.cls == ManeuverClass::LaneLeft ? 1.0 : -1.0;
                shift += sign * lane_shift * smoothstep(s);
            } else if (t >= m.t_start && t < m.t_end) {
                const bool left = m.cls == ManeuverClass::OvertakeLeft;
                const bool translated = !left && spec.right_style == RightSideStyle::Translate;
                const double dist = (left || translated) ? vx : W - vx;
                const double progress = m.slope > 0.0 ? m.slope * (tc - m.t_start) : dist * s;
                double center;
                if (translated) {
                    center = (W - vx) - progress;
                } else {
                    center = left ? -progress : progress;
                }
                band_center.push_back(center);
                band_spec.push_back(&m);
            }
        }
        for (std::size_t i = 0; i < curve_base.size(); ++i) curve_offset[i] = curve_base[i] + drift + shift;

        for (int x = 0; x < W; ++x) {
            // lateral position relative to v_x; mirrors to its exact negation
            const double u = (x + 0.5) - vx;
            double marking = 0.0;
            for (double off : curve_offset)
                marking = std::max(marking, 1.0 - std::abs(u - off) / bg.curve_half_width);
            double value = bg.base_intensity + bg.curve_contrast * marking;
            for (std::size_t b = 0; b < band_center.size(); ++b) {
                const double cov = band_coverage(u - band_center[b], band_spec[b]->thickness);
                value = std::max(value, band_spec[b]->intensity * cov);
            }
            if (spec.noise_sigma > 0.0) value += noise(rng);
            const auto v = static_cast<std::uint8_t>(std::clamp(std::floor(value + 0.5), 0.0, 255.0));
            for (int c = 0; c < spec.dims.channels; ++c) profile.at(t, x, c) = v;
        }
    }

    SynthSample sample;
    for (const auto& m : spec.maneuvers) {
        const ManeuverEvent e{m.cls, m.t_start, m.t_end};
        profile.provenance.events.push_back(e);
        sample.ground_truth.push_back(event_to_bbox(e, spec.v_x, spec.dims));
    }
    sample.profile = std::move(profile);
    return sample;
}

Json dataset_config_to_json(const DatasetConfig& cfg) {
    Json j;
    j["count"] = cfg.count;
    j["width"] = cfg.dims.width;
    j["height"] = cfg.dims.height;
    j["channels"] = cfg.dims.channels;
    j["class_mix"] = cfg.class_mix;
    j["seed"] = cfg.seed;
    j["noise_sigma"] = cfg.noise_sigma;
    j["second_event_prob"] = cfg.second_event_prob;
    j["position_critical"] = cfg.position_critical;
    return j;
}

DatasetConfig dataset_config_from_json(const Json& j) {
    DatasetConfig cfg;
    cfg.count = j.at("count").get<int>();
    cfg.dims = {j.at("width").get<int>(), j.at("height").get<int>(), j.value("channels", 1)};
    cfg.class_mix = j.at("class_mix").get<std::array<double, kNumClasses>>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.noise_sigma = j.value("noise_sigma", 6.0);
    cfg.second_event_prob = j.value("second_event_prob", 0.25);
    cfg.position_critical = j.value("position_critical", false);
    return cfg;
}

namespace {

// Position-critical sets drop the lane-change classes from the mix.
std::array<double, kNumClasses> effective_mix(const DatasetConfig& cfg) {
    auto mix = cfg.class_mix;
    if (cfg.position_critical)
        for (int c = 0; c < kNumClasses; ++c)
            if (is_lane_change(class_from_code(c))) mix[static_cast<std::size_t>(c)] = 0.0;
    return mix;
}

double mix_total(const DatasetConfig& cfg) {
    double total = 0.0;
    for (double m : effective_mix(cfg)) total += m;
    return total;
}

// Class of the first maneuver of sample `index`: the class whose running
// quota is furthest behind, so small datasets already follow the mix.
ManeuverClass quota_class(const DatasetConfig& cfg, int index) {
    const double total = mix_total(cfg);
    const auto mix = effective_mix(cfg);
    std::array<int, kNumClasses> assigned{};
    ManeuverClass pick = ManeuverClass::LaneRight;
    for (int i = 0; i <= index; ++i) {
        double best = -1e300;
        int best_c = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            if (mix[static_cast<std::size_t>(c)] <= 0.0) continue;
            const double deficit = mix[static_cast<std::size_t>(c)] / total * (i + 1) -
                                   assigned[static_cast<std::size_t>(c)];
            if (deficit > best) {
                best = deficit;
                best_c = c;
            }
        }
        ++assigned[static_cast<std::size_t>(best_c)];
        pick = class_from_code(best_c);
    }
    return pick;
}

ManeuverClass sample_class(const DatasetConfig& cfg, std::mt19937_64& rng) {
    const auto mix = effective_mix(cfg);
    std::discrete_distribution<int> dist(mix.begin(), mix.end());
    return class_from_code(dist(rng));
}

}  // namespace

SceneSpec random_scene(const DatasetConfig& cfg, int index) {
    const int W = cfg.dims.width;
    const int T = cfg.dims.height;
    std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(index));
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto uniform_int = [&rng](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };
    const double wscale = W / 256.0;

    SceneSpec spec;
    spec.dims = cfg.dims;
    spec.noise_sigma = cfg.noise_sigma;
    spec.v_x = W / 2;
    // v_x in [W/2 + W/32, W/2 + 3W/32): box centers (v_x, v_x/2, (v_x+W)/2)
    // stay clear of the 32-column grid cell edges, also after mirroring
    if (!cfg.position_critical) spec.v_x += uniform_int(W / 32, std::max(W / 32, 3 * W / 32 - 1));
    spec.right_style = cfg.position_critical ? RightSideStyle::Translate : RightSideStyle::Mirror;

    auto& bg = spec.background;
    bg.curve_count = 4;
    bg.base_intensity = uniform_int(45, 90);
    bg.curve_contrast = uniform_int(70, 120);
    bg.curve_half_width = 3.0 * wscale;
    bg.drift_amplitude = uniform(-5.0, 5.0) * wscale;
    bg.drift_period = uniform(1.5, 3.0) * T;
    bg.drift_phase = uniform(0.0, 2.0 * std::numbers::pi);

    std::vector<ManeuverClass> classes{quota_class(cfg, index)};
    if (uniform(0.0, 1.0) < cfg.second_event_prob) classes.push_back(sample_class(cfg, rng));

    const int margin = std::max(2, T / 40);
    // 0.25T..0.42T keeps every event on the middle anchor of the default head
    const int min_len = std::max(4, static_cast<int>(0.25 * T));
    const int max_len = std::max(min_len, static_cast<int>(0.42 * T));
    // two events occupy disjoint halves of the time axis
    const int slots = static_cast<int>(classes.size());
    const bool swap_order = slots == 2 && uniform(0.0, 1.0) < 0.5;
    for (int k = 0; k < slots; ++k) {
        const int slot = swap_order ? slots - 1 - k : k;
        const int lo = margin + slot * T / slots;
        const int hi = (slot + 1) * T / slots - margin;
        const int len = uniform_int(std::min(min_len, hi - lo), std::min(max_len, hi - lo));
        const int start = uniform_int(lo, hi - len);
        ManeuverSpec m;
        m.cls = classes[static_cast<std::size_t>(k)];
        m.t_start = start;
        m.t_end = start + len;
        m.thickness = std::max(1, static_cast<int>(std::lround(uniform(8.0, 16.0) * wscale)));
        m.intensity = uniform_int(190, 240);
        spec.maneuvers.push_back(m);
    }
    std::sort(spec.maneuvers.begin(), spec.maneuvers.end(),
              [](const ManeuverSpec& a, const ManeuverSpec& b) { return a.t_start < b.t_start; });
    return spec;
}

std::vector<std::string> DatasetIndex::ids_in(const std::string& split) const {
    std::vector<std::string> ids;
    for (const auto& e : entries)
        if (split.empty() || split == "all" || e.split == split) ids.push_back(e.id);
    return ids;
}

int DatasetIndex::count_in(const std::string& split) const {
    return static_cast<int>(ids_in(split).size());
}

std::vector<std::string> assign_splits(const std::vector<int>& strata, std::uint64_t seed) {
    const int n = static_cast<int>(strata.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [&strata](int a, int b) {
        return strata[static_cast<std::size_t>(a)] < strata[static_cast<std::size_t>(b)];
    });

    static const std::array<const char*, 3> names{"train", "val", "test"};
    static const std::array<double, 3> fractions{0.6, 0.2, 0.2};
    std::array<int, 3> assigned{};
    std::vector<std::string> split(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        int best = 0;
        double best_deficit = -1e300;
        for (int s = 0; s < 3; ++s) {
            const double deficit = fractions[static_cast<std::size_t>(s)] * (k + 1) -
                                   assigned[static_cast<std::size_t>(s)];
            if (deficit > best_deficit + 1e-12) {
                best_deficit = deficit;
                best = s;
            }
        }
        ++assigned[static_cast<std::size_t>(best)];
        split[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
            names[static_cast<std::size_t>(best)];
    }
    return split;
}

namespace {

std::string sample_id(int index, int count) {
    const int digits = std::max(4, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
    std::string s = std::to_string(index);
    return std::string(static_cast<std::size_t>(std::max(0, digits - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

DatasetIndex make_dataset(const DatasetConfig& cfg, const fs::path& out_dir) {
    if (cfg.count < 1) throw Error(ErrorCode::InvalidArgument, "dataset count must be >= 1");
    if (mix_total(cfg) <= 0.0) throw Error(ErrorCode::InvalidArgument, "class mix sums to zero");
    cfg.dims.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    DatasetIndex index;
    index.config = cfg;
    std::vector<int> strata;
    std::vector<DetectionRecord> gt_records;
    for (int i = 0; i < cfg.count; ++i) {
        SceneSpec spec = random_scene(cfg, i);
        spec.video_id = sample_id(i, cfg.count);
        const std::uint64_t render_seed = (cfg.seed ^ static_cast<std::uint64_t>(i)) + 0x9E3779B97F4A7C15ULL;
        SynthSample sample = render_profile(spec, render_seed);

        const fs::path profile_path = out_dir / (spec.video_id + ".profile");
        export_profile(sample.profile, profile_path);
        Json meta = provenance_to_json(sample.profile);
        Json gt = Json::array();
        for (const auto& b : sample.ground_truth) gt.push_back(box_to_json(b));
        meta["ground_truth"] = gt;
        write_json_file(sidecar_path(profile_path), meta);

        DatasetEntry entry{spec.video_id, "", {}};
        int mask = 0;
        for (const auto& m : spec.maneuvers) {
            entry.classes.push_back(m.cls);
            mask |= 1 << code(m.cls);
        }
        for (const auto& b : sample.ground_truth) gt_records.push_back({spec.video_id, b});
        strata.push_back(mask);
        index.entries.push_back(std::move(entry));
    }
    const auto splits = assign_splits(strata, cfg.seed);
    for (std::size_t i = 0; i < splits.size(); ++i) index.entries[i].split = splits[i];
    for (const char* s : {"train", "val", "test"}) {
        if (index.count_in(s) == 0)
            index.warnings.push_back(std::string("split '") + s + "' is empty");
    }
    write_detections_jsonl(out_dir / "ground_truth.jsonl", gt_records);
    for (const char* s : {"train", "val", "test"}) {
        const auto ids = index.ids_in(s);
        std::vector<DetectionRecord> part;
        for (const auto& r : gt_records)
            if (std::find(ids.begin(), ids.end(), r.video_id) != ids.end()) part.push_back(r);
        write_detections_jsonl(out_dir / (std::string("ground_truth_") + s + ".jsonl"), part);
    }
    write_json_file(out_dir / "index.json", index_to_json(index));
    return index;
}

Json index_to_json(const DatasetIndex& index) {
    Json j;
    j["version"] = 1;
    j["generator"] = dataset_config_to_json(index.config);
    j["count"] = index.entries.size();
    Json splits;
    for (const char* s : {"train", "val", "test"}) splits[s] = index.ids_in(s);
    j["splits"] = splits;
    Json stats;
    for (auto c : kAllClasses) stats[std::string(short_name(c))] = 0;
    Json samples = Json::array();
    for (const auto& e : index.entries) {
        Json classes = Json::array();
        for (auto c : e.classes) {
            classes.push_back(std::string(short_name(c)));
            stats[std::string(short_name(c))] = stats[std::string(short_name(c))].get<int>() + 1;
        }
        samples.push_back({{"id", e.id},
                           {"profile", e.id + ".profile"},
                           {"meta", e.id + ".meta.json"},
                           {"split", e.split},
                           {"classes", classes}});
    }
    j["class_stats"] = stats;
    j["samples"] = samples;
    j["warnings"] = index.warnings;
    return j;
}

DatasetIndex load_index(const fs::path& index_path) {
    const Json j = read_json_file(index_path);
    DatasetIndex index;
    try {
        index.config = dataset_config_from_json(j.at("generator"));
        for (const auto& s : j.at("samples")) {
            DatasetEntry e{s.at("id").get<std::string>(), s.at("split").get<std::string>(), {}};
            for (const auto& c : s.at("classes")) e.classes.push_back(parse_class(c.get<std::string>()));
            index.entries.push_back(std::move(e));
        }
        if (j.contains("warnings")) index.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, index_path.string() + ": " + e.what());
    }
    return index;
}

std::vector<DetectionBox> ground_truth_of(const MotionProfile& profile) {
    std::vector<DetectionBox> out;
    for (const auto& e : profile.provenance.events)
        out.push_back(event_to_bbox(e, profile.provenance.v_x, profile.dims));
    return out;
}

std::vector<DatasetSample> load_split(const fs::path& dataset_dir, const std::string& split) {
    const DatasetIndex index = load_index(dataset_dir / "index.json");
    std::vector<DatasetSample> out;
    for (const auto& e : index.entries) {
        if (!(split.empty() || split == "all" || e.split == split)) continue;
        DatasetSample s;
        s.id = e.id;
        s.split = e.split;
        s.profile = import_profile(dataset_dir / (e.id + ".profile"));
        s.ground_truth = ground_truth_of(s.profile);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace mprof
