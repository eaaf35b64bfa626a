#include "mprof/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "mprof/profile.hpp"

namespace mprof {

BenchReport bench_strip(const BenchOptions& options) {
    if (options.iterations < 100)
        throw Error(ErrorCode::UsageError, "bench needs at least 100 iterations, got " +
                                               std::to_string(options.iterations));
    if (options.width < 1 || options.belt_height < 1 || (options.channels != 1 && options.channels != 3) ||
        options.warmup < 0)
        throw Error(ErrorCode::InvalidArgument, "invalid bench geometry");

    // Frames are sized so that a horizon at mid-height leaves room for the belt.
    const int v_y = std::max(options.belt_height, 360);
    const int frame_height = v_y + options.belt_height;
    const PixelBelt belt = belt_rows(v_y, {0, options.belt_height}, frame_height);

    constexpr int kFrames = 8;
    std::mt19937_64 rng(options.seed);
    std::vector<Frame> frames(kFrames);
    for (int f = 0; f < kFrames; ++f) {
        auto& fr = frames[static_cast<std::size_t>(f)];
        fr.width = options.width;
        fr.height = frame_height;
        fr.channels = options.channels;
        fr.index = f;
        fr.data.resize(static_cast<std::size_t>(options.width) * frame_height * options.channels);
        for (auto& v : fr.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
    }
    std::vector<std::uint8_t> strip(static_cast<std::size_t>(options.width) * options.channels);

    using clock = std::chrono::steady_clock;
    std::uint64_t sink = 0;
    for (int i = 0; i < options.warmup; ++i) {
        extract_strip(frames[static_cast<std::size_t>(i % kFrames)], belt, strip);
        sink += strip[0];
    }
    std::vector<double> ms(static_cast<std::size_t>(options.iterations));
    for (int i = 0; i < options.iterations; ++i) {
        const auto t0 = clock::now();
        extract_strip(frames[static_cast<std::size_t>(i % kFrames)], belt, strip);
        const auto t1 = clock::now();
        sink += strip[static_cast<std::size_t>(i) % strip.size()];
        ms[static_cast<std::size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    volatile std::uint64_t observed = sink;  // keeps the extraction live
    (void)observed;

    BenchReport r;
    r.options = options;
    r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    std::vector<double> sorted = ms;
    std::sort(sorted.begin(), sorted.end());
    const auto p95_index = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
    r.p95_ms = sorted[p95_index];
    r.max_ms = sorted.back();
    r.strips_per_second = r.mean_ms > 0.0 ? 1000.0 / r.mean_ms : 0.0;
    r.budget_ratio = r.mean_ms / kFrameBudgetMs;
    r.within_budget = r.mean_ms <= kFrameBudgetMs;
    return r;
}

Json bench_to_json(const BenchReport& r) {
    Json j;
    j["width"] = r.options.width;
    j["belt_height"] = r.options.belt_height;
    j["channels"] = r.options.channels;
    j["iterations"] = r.options.iterations;
    j["mean_ms"] = r.mean_ms;
    j["p95_ms"] = r.p95_ms;
    j["max_ms"] = r.max_ms;
    j["strips_per_second"] = r.strips_per_second;
    j["budget_ms"] = kFrameBudgetMs;
    j["budget_ratio"] = r.budget_ratio;
    j["within_budget"] = r.within_budget;
    return j;
}

}  // namespace mprof
