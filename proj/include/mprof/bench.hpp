#pragma once

#include <cstdint>

#include "mprof/records.hpp"

namespace mprof {

inline constexpr double kFrameBudgetMs = 1000.0 / 60.0;

struct BenchOptions {
    int width = 1280;
    int belt_height = 65;
    int channels = 1;
    int iterations = 1000;
    int warmup = 20;
    std::uint64_t seed = 0;
};

struct BenchReport {
    BenchOptions options;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
    double strips_per_second = 0.0;
    double budget_ratio = 0.0;  // mean / 60 fps frame budget
    bool within_budget = false;
};

/// Times extract_strip on random frames. Throws UsageError below 100
/// iterations, InvalidArgument on bad geometry.
BenchReport bench_strip(const BenchOptions& options = {});

Json bench_to_json(const BenchReport& r);

}  // namespace mprof
