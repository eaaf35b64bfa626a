#pragma once

// Synthetic motion profiles with exact ground truth.
//
// Backgrounds are near-vertical lane-marking curves with a slow lateral drift.
// Lane changes shear every curve sideways by W/8 over the maneuver; overtakes
// draw a bright band that leaves v_x at t_start and reaches the class-side
// edge at t_end. Right-class scenes are exact column mirrors of left-class
// scenes unless the translated style is requested.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mprof/core.hpp"
#include "mprof/profile.hpp"

namespace mprof {

struct ManeuverSpec {
    ManeuverClass cls = ManeuverClass::LaneLeft;
    int t_start = 0;
    int t_end = 0;
    int thickness = 12;    // overtake band width, columns
    double slope = 0.0;    // overtake band speed, columns/row; 0 = reach the edge at t_end
    int intensity = 220;   // overtake band brightness
};

struct BackgroundSpec {
    int curve_count = 4;
    int base_intensity = 70;
    int curve_contrast = 110;
    double curve_half_width = 3.0;
    double drift_amplitude = 4.0;  // signed, columns
    double drift_period = 400.0;   // rows
    double drift_phase = 0.0;      // radians
};

/// How right-side overtakes are drawn.
///  Mirror:    exact mirror image of the left-side pattern.
///  Translate: the left-side pattern shifted by W - v_x columns, so both sides
///             differ only in where the pattern sits.
enum class RightSideStyle { Mirror, Translate };

struct SceneSpec {
    ProfileDims dims{256, 256, 1};
    int v_x = 128;
    BackgroundSpec background;
    double noise_sigma = 6.0;
    std::vector<ManeuverSpec> maneuvers;
    RightSideStyle right_style = RightSideStyle::Mirror;
    std::string video_id = "synthetic";

    /// Throws InvalidArgument, InvalidEvent, OverlapUnrenderable.
    void validate() const;
    /// Left/right swapped scene: v_x -> W - v_x, classes mirrored, drift negated.
    SceneSpec mirrored() const;
};

struct SynthSample {
    MotionProfile profile;
    std::vector<DetectionBox> ground_truth;  // one per maneuver, in spec order
};

/// Deterministic in (spec, seed).
SynthSample render_profile(const SceneSpec& spec, std::uint64_t seed);

struct DatasetConfig {
    int count = 100;
    ProfileDims dims{256, 256, 1};
    std::array<double, kNumClasses> class_mix{0.25, 0.25, 0.25, 0.25};  // LR, LL, OR, OL
    std::uint64_t seed = 0;
    double noise_sigma = 6.0;
    double second_event_prob = 0.25;
    /// Overtakes only, fixed v_x = W/2, translated right-side style.
    bool position_critical = false;
};

Json dataset_config_to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const Json& j);

/// Scene for sample `index` of a dataset; seeded with seed ^ index.
SceneSpec random_scene(const DatasetConfig& cfg, int index);

struct DatasetEntry {
    std::string id;
    std::string split;  // "train" | "val" | "test"
    std::vector<ManeuverClass> classes;
};

struct DatasetIndex {
    DatasetConfig config;
    std::vector<DatasetEntry> entries;
    std::vector<std::string> warnings;

    std::vector<std::string> ids_in(const std::string& split) const;
    int count_in(const std::string& split) const;
};

/// Split assignment: 60/20/20 by largest quota deficit, walking samples
/// grouped by class-presence stratum (shuffled within stratum by `seed`).
std::vector<std::string> assign_splits(const std::vector<int>& strata, std::uint64_t seed);

/// Writes `<id>.profile`, `<id>.meta.json`, `ground_truth.jsonl`,
/// `ground_truth_<split>.jsonl` and `index.json` under `out_dir`.
DatasetIndex make_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir);

Json index_to_json(const DatasetIndex& index);
DatasetIndex load_index(const std::filesystem::path& index_path);

struct DatasetSample {
    std::string id;
    std::string split;
    MotionProfile profile;
    std::vector<DetectionBox> ground_truth;
};

/// Ground-truth boxes derived from the profile's labeled events.
std::vector<DetectionBox> ground_truth_of(const MotionProfile& profile);

/// Samples of one split ("" or "all" loads everything), in index order.
std::vector<DatasetSample> load_split(const std::filesystem::path& dataset_dir,
                                      const std::string& split);

}  // namespace mprof
