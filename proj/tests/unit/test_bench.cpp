#include <doctest.h>

#include "mprof/bench.hpp"
#include "mprof/error.hpp"

using namespace mprof;

TEST_CASE("strip benchmark reports timings within the frame budget") {
    BenchOptions o;
    o.iterations = 200;
    const auto r = bench_strip(o);
    CHECK(r.mean_ms > 0.0);
    CHECK(r.p95_ms > 0.0);
    CHECK(r.max_ms >= r.p95_ms);
    CHECK(r.strips_per_second > 0.0);
    CHECK(r.budget_ratio == doctest::Approx(r.mean_ms / kFrameBudgetMs));
    CHECK(r.within_budget == (r.mean_ms <= kFrameBudgetMs));
    const Json j = bench_to_json(r);
    for (const char* key : {"mean_ms", "p95_ms", "max_ms", "strips_per_second", "within_budget"})
        CHECK(j.contains(key));
}

TEST_CASE("benchmark argument errors") {
    BenchOptions o;
    o.iterations = 0;
    try {
        bench_strip(o);
        FAIL("expected UsageError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UsageError);
    }
    o.iterations = 99;
    CHECK_THROWS_AS(bench_strip(o), Error);
    o.iterations = 100;
    o.channels = 2;
    CHECK_THROWS_AS(bench_strip(o), Error);
}
