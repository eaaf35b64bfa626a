// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "mprof/bench.hpp"
#include "mprof/classic.hpp"
#include "mprof/eval.hpp"
#include "mprof/nn/train.hpp"
#include "mprof/profile.hpp"
#include "mprof/synth.hpp"
#include "test_util.hpp"

using namespace mprof;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------- AC1

class VectorSource final : public FrameSource {
public:
    explicit VectorSource(const std::vector<Frame>& frames) : frames_(frames) {}
    std::optional<Frame> next() override {
        if (cursor_ >= frames_.size()) return std::nullopt;
        return frames_[cursor_++];
    }
    void rewind() override { cursor_ = 0; }
    int size() const override { return static_cast<int>(frames_.size()); }

private:
    const std::vector<Frame>& frames_;
    std::size_t cursor_ = 0;
};

Outcome profile_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const std::array<BeltOffsets, 4> belts{kFarBelt, kMediumBelt, kCloseBelt, BeltOffsets{5, 20}};
    long mismatches = 0;
    long checked = 0;
    for (int v = 0; v < 50; ++v) {
        const int w = pick(64, 160), h = pick(64, 240), n = pick(30, 48), c = v % 3 == 0 ? 3 : 1;
        BeltOffsets belt = belts[static_cast<std::size_t>(v % 4)];
        if (belt.lo >= h) belt = kFarBelt;
        const int vy = pick(0, h - belt.lo - 1);
        std::vector<Frame> frames;
        for (int k = 0; k < n; ++k) {
            Frame f{w, h, c, k, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * c)};
            for (auto& px : f.data) px = static_cast<std::uint8_t>(rng() & 0xFF);
            frames.push_back(std::move(f));
        }
        VideoManifest m;
        m.id = "v" + std::to_string(v);
        m.source = "/memory";
        m.width = w;
        m.height = h;
        m.num_frames = n;
        m.vanishing_point = {w / 2.0, static_cast<double>(vy)};
        VectorSource src(frames);
        const MotionProfile p = build_profile(src, m, belt, c);
        const int r0 = vy + belt.lo, r1 = std::min(vy + belt.hi, h);
        for (int t = 0; t < n; ++t)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    long sum = 0;
                    for (int r = r0; r < r1; ++r) sum += frames[t].at(r, x, ch);
                    const long rows = r1 - r0;
                    const long mean = (2 * sum + rows) / (2 * rows);  // round half up
                    mismatches += p.at(t, x, ch) != mean;
                    ++checked;
                }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 5.0,
            fmt("50 videos, %ld samples, %ld mismatches, %.2f s (limit 5 s)", checked, mismatches, secs)};
}

// ---------------------------------------------------------------- AC2

Outcome geometry() {
    struct Fixture {
        ManeuverClass cls;
        int v_x, width;
        double x_min, x_max;
    };
    using C = ManeuverClass;
    // lane changes span v_x +- W/4 clamped; overtakes run from the class-side edge to v_x
    const std::vector<Fixture> fx{
        {C::LaneLeft, 128, 256, 64, 192},     {C::LaneRight, 128, 256, 64, 192},
        {C::LaneLeft, 640, 1280, 320, 960},   {C::LaneRight, 700, 1280, 380, 1020},
        {C::LaneLeft, 30, 256, 0, 94},        {C::LaneRight, 1, 256, 0, 65},
        {C::LaneLeft, 240, 256, 176, 256},    {C::LaneRight, 255, 256, 191, 256},
        {C::LaneLeft, 64, 256, 0, 128},       {C::LaneRight, 192, 256, 128, 256},
        {C::OvertakeLeft, 128, 256, 0, 128},  {C::OvertakeRight, 128, 256, 128, 256},
        {C::OvertakeLeft, 640, 1280, 0, 640}, {C::OvertakeRight, 640, 1280, 640, 1280},
        {C::OvertakeLeft, 1, 256, 0, 1},      {C::OvertakeRight, 255, 256, 255, 256},
        {C::OvertakeLeft, 200, 256, 0, 200},  {C::OvertakeRight, 37, 256, 37, 256},
        {C::LaneLeft, 100, 200, 50, 150},     {C::OvertakeRight, 150, 200, 150, 200},
    };
    int bad = 0;
    for (std::size_t i = 0; i < fx.size(); ++i) {
        const auto& f = fx[i];
        const ProfileDims dims{f.width, 480, 1};
        const int ts = static_cast<int>(7 * i), te = ts + 40;
        const DetectionBox b = event_to_bbox(ManeuverEvent{f.cls, ts, te}, f.v_x, dims);
        const bool ok = b.cls == f.cls && b.x_min == f.x_min && b.x_max == f.x_max && b.t_min == ts &&
                        b.t_max == te && b.score == 1.0;
        if (!ok) {
            ++bad;
            std::printf("    fixture %zu: got [%g, %g] x [%g, %g]\n", i, b.x_min, b.x_max, b.t_min, b.t_max);
        }
    }
    return {bad == 0, fmt("%zu fixtures, %d mismatches", fx.size(), bad)};
}

// ---------------------------------------------------------------- AC3

using nn::TensorD;

TensorD random_tensor(int n, int c, int h, int w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    TensorD t(n, c, h, w);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// ||a - b|| / max(||a||, ||b||) over whole gradient vectors.
double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::max(std::sqrt(std::max(na, nb)), 1e-12);
    return std::sqrt(diff) / scale;
}

constexpr double kStep = 1e-5;

std::vector<double> central_differences(std::vector<double>& x, const std::function<double()>& f) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + kStep;
        const double up = f();
        x[i] = keep - kStep;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2 * kStep);
    }
    return g;
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

nn::ConvLayer<double> random_conv(int in, int out, int k, int s, int p, bool coord, std::mt19937_64& rng) {
    auto l = nn::ConvLayer<double>::make(in, out, k, s, p, coord);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& v : l.weights) v = u(rng);
    for (auto& v : l.bias) v = u(rng);
    return l;
}

// Worst relative error over parameters and input of conv (optionally followed by leaky relu).
double conv_instance(bool coord, bool with_act, std::mt19937_64& rng) {
    const int in = 1 + static_cast<int>(rng() % 3), out = 1 + static_cast<int>(rng() % 3);
    const int stride = 1 + static_cast<int>(rng() % 2);
    auto x = random_tensor(1 + static_cast<int>(rng() % 2), in, 5 + static_cast<int>(rng() % 3),
                           5 + static_cast<int>(rng() % 3), rng);
    auto layer = random_conv(in, out, 3, stride, 1, coord, rng);
    auto forward = [&] {
        auto y = nn::conv2d_forward(x, layer);
        return with_act ? nn::leaky_relu_forward(y) : y;
    };
    const auto y0 = forward();
    const auto r = random_tensor(y0.n(), y0.c(), y0.h(), y0.w(), rng);
    auto pre = nn::conv2d_forward(x, layer);
    const auto up = with_act ? nn::leaky_relu_backward(pre, r) : r;
    const auto g = nn::conv2d_backward(x, layer, up);
    auto obj = [&] { return dot(forward(), r); };
    double worst = rel_err(g.grad_w, central_differences(layer.weights, obj));
    worst = std::max(worst, rel_err(g.grad_b, central_differences(layer.bias, obj)));
    worst = std::max(worst, rel_err(g.grad_x.values(), central_differences(x.values(), obj)));
    return worst;
}

double leaky_instance(std::mt19937_64& rng) {
    auto x = random_tensor(2, 3, 4, 5, rng);
    for (auto& v : x.values())
        if (std::abs(v) < 0.05) v += v < 0 ? -0.05 : 0.05;  // keep away from the kink
    const auto r = random_tensor(2, 3, 4, 5, rng);
    const auto g = nn::leaky_relu_backward(x, r);
    auto obj = [&] { return dot(nn::leaky_relu_forward(x), r); };
    return rel_err(g.values(), central_differences(x.values(), obj));
}

double loss_instance(std::mt19937_64& rng) {
    nn::DetectorConfig cfg;
    cfg.input_width = 96;
    cfg.input_height = 64;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<nn::Targets> targets;
    for (int n = 0; n < 2; ++n) {
        std::vector<DetectionBox> gt;
        for (int k = 0; k < 2; ++k) {
            const double w = 10 + 60 * u(rng), h = 10 + 40 * u(rng);
            const double x0 = (96 - w) * u(rng), t0 = (64 - h) * u(rng);
            gt.push_back({class_from_code(static_cast<int>(rng() % 4)), x0, t0, x0 + w, t0 + h});
        }
        targets.push_back(nn::assign_targets(gt, cfg));
    }
    auto raw = random_tensor(2, cfg.head_channels(), cfg.grid_height(), cfg.grid_width(), rng, -2.0, 2.0);
    const auto res = nn::yolo_loss(raw, targets, cfg);
    auto obj = [&] { return nn::yolo_loss(raw, targets, cfg).total; };
    return rel_err(res.grad.values(), central_differences(raw.values(), obj));
}

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(99);
    struct Family {
        const char* name;
        std::function<double()> run;
        double worst = 0.0;
    };
    std::vector<Family> families{
        {"conv2d", [&] { return conv_instance(false, false, rng); }},
        {"leaky-relu", [&] { return leaky_instance(rng); }},
        {"coordconv", [&] { return conv_instance(true, true, rng); }},
        {"yolo-loss", [&] { return loss_instance(rng); }},
    };
    bool ok = true;
    std::string detail;
    for (auto& f : families) {
        for (int i = 0; i < 12; ++i) f.worst = std::max(f.worst, f.run());
        ok = ok && f.worst <= 1e-4;
        detail += fmt("%s %.1e, ", f.name, f.worst);
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 60.0;
    return {ok, "worst rel err over 12 instances each: " + detail + fmt("%.1f s (limit 60 s)", secs)};
}

// ---------------------------------------------------------------- AC4

Outcome inflation() {
    std::mt19937_64 rng(4);
    // dyadic weights make every channel mean exactly representable
    auto dyadic = [&rng] { return static_cast<double>(static_cast<int>(rng() % 257) - 128) / 64.0; };
    long bad = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const int in = 1 + trial % 4, out = 2 + trial % 3;
        auto layer = nn::ConvLayer<double>::make(in, out, 3, 2, 1, false);
        for (auto& w : layer.weights) w = dyadic();
        const auto inflated = nn::inflate_weights(layer);
        for (int o = 0; o < out; ++o)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double sum = 0.0;
                    for (int i = 0; i < in; ++i) {
                        sum += layer.weight(o, i, ky, kx);
                        bad += inflated.weight(o, i, ky, kx) != layer.weight(o, i, ky, kx);
                    }
                    bad += inflated.weight(o, in, ky, kx) != sum / in;
                    bad += inflated.weight(o, in + 1, ky, kx) != sum / in;
                }
    }
    nn::DetectorConfig plain;
    plain.coordconv = false;
    nn::Detector<float> det(plain);
    det.initialize(1);
    const nn::TensorF x(1, 1, 256, 256, 0.3f);
    const auto before = det.forward(x).shape();
    nn::DetectorConfig coord = plain;
    coord.coordconv = true;
    nn::Detector<float> converted(coord);
    auto& layers = converted.layers();
    for (std::size_t i = 0; i < layers.size(); ++i)
        layers[i] = i + 1 < layers.size() ? nn::inflate_weights(det.layers()[i]) : det.layers()[i];
    const auto after = converted.forward(x).shape();
    const bool same_shape = before == after;
    return {bad == 0 && same_shape,
            fmt("%ld slice mismatches over 10 layers; head output %dx%dx%dx%d before and after conversion (%s)", bad,
                after[0], after[1], after[2], after[3], same_shape ? "equal" : "differs")};
}

// ---------------------------------------------------------------- AC5

Outcome metric_arithmetic() {
    const std::vector<double> ours{0.391, 0.400, 0.402, 0.225}, base{0.511, 0.398, 0.254, 0.075};
    const double m1 = eval::mean_ap(ours), m2 = eval::mean_ap(base);
    const double f1 = eval::f1_score(0.95, 0.64), f2 = eval::f1_score(0.82, 0.70);
    // the first mean sits exactly on its tolerance edge in decimal; allow float rounding there
    const bool ok = std::abs(m1 - 0.354) <= 0.0005 + 1e-12 && std::abs(m2 - 0.310) <= 0.0005 + 1e-12 &&
                    std::abs(f1 - 0.76) <= 0.005 && std::abs(f2 - 0.76) <= 0.005;
    return {ok, fmt("mAP %.4f and %.4f, F1 %.4f and %.4f", m1, m2, f1, f2)};
}

// ---------------------------------------------------------------- AC6 / AC7

struct RunResult {
    double map = 0.0;
    double seconds = 0.0;
    nn::DetectorCheckpoint checkpoint;
};

RunResult train_and_score(const std::filesystem::path& data, bool coordconv, std::uint64_t seed,
                          const std::vector<ManeuverClass>& classes) {
    const auto t0 = Clock::now();
    nn::DetectorConfig det;
    det.coordconv = coordconv;
    nn::TrainConfig tc;
    tc.max_epochs = 20;
    tc.batch_size = 2;
    tc.seed = seed;
    const auto res = nn::train_on_dataset(data, det, tc);
    std::vector<DetectionRecord> dets, gts;
    for (const auto& s : load_split(data, "test")) {
        for (const auto& b : nn::infer(s.profile, res.checkpoint)) dets.push_back({s.id, b});
        for (const auto& b : s.ground_truth) gts.push_back({s.id, b});
    }
    eval::EvalOptions opts;
    opts.classes = classes;
    return {eval::evaluate(dets, gts, opts).map, seconds_since(t0), res.checkpoint};
}

Outcome end_to_end(const test::TempDir& dir, nn::DetectorCheckpoint& trained) {
    DatasetConfig cfg;
    cfg.count = 250;  // 150 train, 50 val, 50 test
    cfg.seed = 1;
    const auto data = dir / "e2e";
    const auto t0 = Clock::now();
    make_dataset(cfg, data);
    const auto run = train_and_score(data, true, 1, {kAllClasses.begin(), kAllClasses.end()});
    const double secs = seconds_since(t0);
    trained = run.checkpoint;

    // clean single-maneuver samples: the top detection names the right class
    int right = 0;
    DatasetConfig clean = cfg;
    clean.noise_sigma = 0.0;
    clean.second_event_prob = 0.0;
    clean.seed = 500;
    // consecutive indices cycle through the four classes
    for (int k = 0; k < 8; ++k) {
        SceneSpec spec = random_scene(clean, k);
        const auto sample = render_profile(spec, clean.seed + k);
        const auto boxes = nn::infer(sample.profile, trained);
        right += !boxes.empty() && boxes.front().cls == sample.ground_truth.front().cls;
    }
    return {run.map >= 0.80 && secs <= 1800.0,
            fmt("test mAP@0.3 %.3f (target 0.80) on 50 held-out profiles; %.0f s (limit 1800 s); top class right on %d/8 clean samples",
                run.map, secs, right)};
}

Outcome coordconv_ablation(const test::TempDir& dir) {
    const std::vector<ManeuverClass> overtakes{ManeuverClass::OvertakeRight, ManeuverClass::OvertakeLeft};
    double with = 0.0, without = 0.0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        DatasetConfig cfg;
        cfg.count = 250;
        cfg.seed = seed;
        cfg.position_critical = true;
        const auto data = dir / ("pc" + std::to_string(seed));
        make_dataset(cfg, data);
        const double a = train_and_score(data, true, seed, overtakes).map;
        const double b = train_and_score(data, false, seed, overtakes).map;
        with += a / 3;
        without += b / 3;
        detail += fmt("seed %d: %.3f vs %.3f; ", static_cast<int>(seed), a, b);
        std::filesystem::remove_all(data);
    }
    return {with - without >= 0.05,
            detail + fmt("mean CoordConv %.3f vs plain %.3f, gap %.3f (target 0.05)", with, without, with - without)};
}

// ---------------------------------------------------------------- AC8

Outcome classic_sanity() {
    DatasetConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.second_event_prob = 0.0;
    cfg.class_mix = {0.0, 0.0, 0.5, 0.5};
    cfg.seed = 8;
    std::vector<DetectionRecord> dets, gts;
    long mirror_bad = 0;
    for (int i = 0; i < 20; ++i) {
        const SceneSpec spec = random_scene(cfg, i);
        const auto sample = render_profile(spec, 1000 + i);
        const std::string id = "s" + std::to_string(i);
        const auto found = classic::detect_classic(sample.profile, spec.v_x);
        for (const auto& b : found) dets.push_back({id, b});
        for (const auto& b : sample.ground_truth) gts.push_back({id, b});
        const auto mirrored_found =
            classic::detect_classic(mirror_profile(sample.profile), spec.dims.width - spec.v_x);
        if (mirrored_found.size() != found.size()) {
            ++mirror_bad;
            continue;
        }
        for (const auto& b : found) {
            const auto expect = mirror_box(b, spec.dims.width);
            mirror_bad += std::find(mirrored_found.begin(), mirrored_found.end(), expect) == mirrored_found.end();
        }
    }
    eval::EvalOptions opts;
    opts.classes = {ManeuverClass::OvertakeRight, ManeuverClass::OvertakeLeft};
    const auto rep = eval::evaluate(dets, gts, opts);
    eval::Counts total;
    for (const auto& m : rep.classes) {
        total.tp += m.counts.tp;
        total.fp += m.counts.fp;
        total.fn += m.counts.fn;
    }
    const double f1 = eval::precision_recall_f1(total).f1;
    long uniform_dets = 0;
    for (int v : {0, 37, 128, 255})
        uniform_dets += static_cast<long>(classic::detect_classic(test::constant_profile(256, 256, static_cast<std::uint8_t>(v)), 128).size());
    return {f1 == 1.0 && uniform_dets == 0 && mirror_bad == 0,
            fmt("F1 %.3f (TP %ld FP %ld FN %ld) on 20 noiseless overtakes; %ld detections on uniform profiles; %ld mirror mismatches",
                f1, total.tp, total.fp, total.fn, uniform_dets, mirror_bad)};
}

// ---------------------------------------------------------------- AC9

Outcome realtime() {
    BenchOptions o;
    o.width = 1280;
    o.belt_height = 65;
    const auto r = bench_strip(o);
    return {r.mean_ms <= 5.0, fmt("mean %.4f ms, p95 %.4f ms per 1280-column strip of 65 rows (limit 5 ms, frame budget %.2f ms)",
                                  r.mean_ms, r.p95_ms, kFrameBudgetMs)};
}

// ---------------------------------------------------------------- AC10

int shell(const std::filesystem::path& cwd, const std::string& args) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" + MPROF_CLI_PATH + "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const test::TempDir& dir) {
    const std::vector<std::string> steps{
        "synth --count 12 --width 128 --height 128 --seed 3 --out ds",
        "train --data ds --out model.ckpt --epochs 2 --batch-size 4 --seed 5 --input-width 128 --input-height 128",
        "detect --checkpoint model.ckpt --data ds --split all --out nn.jsonl --conf 0.01",
        "detect --method classic --data ds --split all --out classic.jsonl",
        "eval --dets nn.jsonl --gt ds/ground_truth.jsonl --out report.json --csv report.csv",
    };
    std::array<std::filesystem::path, 2> runs{dir / "run1", dir / "run2"};
    for (const auto& r : runs) {
        std::filesystem::create_directories(r);
        for (const auto& s : steps)
            if (shell(r, s) != 0) return {false, "command failed: mprof " + s};
    }
    long files = 0, differing = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(runs[0])) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), runs[0]);
        ++files;
        if (slurp(entry.path()) != slurp(runs[1] / rel)) {
            ++differing;
            std::printf("    differs: %s\n", rel.string().c_str());
        }
    }
    return {differing == 0 && files > 0, fmt("%ld output files compared across two runs, %ld differ", files, differing)};
}

}  // namespace

int main() {
    test::TempDir dir("acceptance");
    nn::DetectorCheckpoint trained;
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"profile oracle equivalence", profile_oracle},
        {"event geometry", geometry},
        {"gradient suite", gradient_suite},
        {"coordconv weight inflation", inflation},
        {"metric arithmetic", metric_arithmetic},
        {"end-to-end synthetic detection", [&] { return end_to_end(dir, trained); }},
        {"coordconv ablation", [&] { return coordconv_ablation(dir); }},
        {"classic baseline sanity", classic_sanity},
        {"strip extraction budget", realtime},
        {"cli determinism", [&] { return determinism(dir); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("AC%zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failures);
    return failures == 0 ? 0 : 1;
}
