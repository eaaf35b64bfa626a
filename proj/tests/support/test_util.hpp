#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "mprof/core.hpp"
#include "mprof/profile.hpp"

namespace mprof::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mprof_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Pixel-membership IoU over the integer grid; boxes must have integer corners.
inline double brute_iou(const DetectionBox& a, const DetectionBox& b) {
    const int x0 = static_cast<int>(std::min(a.x_min, b.x_min));
    const int x1 = static_cast<int>(std::max(a.x_max, b.x_max));
    const int t0 = static_cast<int>(std::min(a.t_min, b.t_min));
    const int t1 = static_cast<int>(std::max(a.t_max, b.t_max));
    long inter = 0;
    long uni = 0;
    for (int t = t0; t < t1; ++t) {
        for (int x = x0; x < x1; ++x) {
            const bool in_a = x >= a.x_min && x < a.x_max && t >= a.t_min && t < a.t_max;
            const bool in_b = x >= b.x_min && x < b.x_max && t >= b.t_min && t < b.t_max;
            inter += (in_a && in_b) ? 1 : 0;
            uni += (in_a || in_b) ? 1 : 0;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline MotionProfile random_profile(int w, int h, std::uint64_t seed, int channels = 1) {
    MotionProfile p;
    p.dims = {w, h, channels};
    p.samples.resize(p.dims.sample_count());
    std::mt19937_64 rng(seed);
    for (auto& v : p.samples) v = static_cast<std::uint8_t>(rng() & 0xFF);
    p.provenance.video_id = "rand" + std::to_string(seed);
    p.provenance.v_x = w / 2;
    return p;
}

inline MotionProfile constant_profile(int w, int h, std::uint8_t value) {
    MotionProfile p;
    p.dims = {w, h, 1};
    p.samples.assign(p.dims.sample_count(), value);
    p.provenance.video_id = "const";
    p.provenance.v_x = w / 2;
    return p;
}

}  // namespace mprof::test
