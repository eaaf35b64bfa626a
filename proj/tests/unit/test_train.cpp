#include <doctest.h>

#include <chrono>
#include <fstream>
#include <iterator>

#include "mprof/error.hpp"
#include "mprof/nn/train.hpp"
#include "mprof/synth.hpp"
#include "test_util.hpp"

using namespace mprof;
using namespace mprof::nn;

namespace {

std::vector<TrainExample> synth_examples(int count, std::uint64_t seed, const DetectorConfig& cfg,
                                         double noise = 6.0) {
    DatasetConfig dc;
    dc.count = count;
    dc.seed = seed;
    dc.noise_sigma = noise;
    std::vector<TrainExample> out;
    for (int i = 0; i < count; ++i) {
        const auto s = render_profile(random_scene(dc, i), seed + i);
        out.push_back(make_example(s.profile, s.ground_truth, cfg));
    }
    return out;
}

DetectorCheckpoint small_checkpoint() {
    DetectorCheckpoint ck;
    ck.config.input_width = 64;
    ck.config.input_height = 32;
    ck.config.channels = {4, 4};
    ck.seed = 77;
    Detector<float> det(ck.config);
    det.initialize(77);
    ck.parameters = det.parameters();
    return ck;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

ErrorCode load_error(const std::filesystem::path& p) {
    try {
        load_checkpoint(p);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("checkpoint round trip and corruption") {
    test::TempDir dir("ckpt");
    const auto ck = small_checkpoint();
    save_checkpoint(dir / "m.ckpt", ck);
    CHECK(load_checkpoint(dir / "m.ckpt") == ck);

    const std::string bytes = slurp(dir / "m.ckpt");
    const auto nl = bytes.find('\n');
    REQUIRE(nl != std::string::npos);
    const Json header = Json::parse(bytes.substr(0, nl));
    CHECK(header["format"] == "mprof-detector");
    CHECK(header["parameter_count"] == ck.parameters.size());
    CHECK(bytes.size() == nl + 1 + 4 * ck.parameters.size());

    CHECK(load_error(dir / "absent.ckpt") == ErrorCode::MissingFile);
    spit(dir / "trunc.ckpt", bytes.substr(0, bytes.size() - 3));
    CHECK(load_error(dir / "trunc.ckpt") == ErrorCode::Corrupt);
    spit(dir / "long.ckpt", bytes + "xxxx");
    CHECK(load_error(dir / "long.ckpt") == ErrorCode::Corrupt);
    spit(dir / "junk.ckpt", "not a checkpoint\n");
    CHECK(load_error(dir / "junk.ckpt") == ErrorCode::Corrupt);

    Json h = header;
    h["config_hash"] = "0000000000000000";
    spit(dir / "hash.ckpt", h.dump() + bytes.substr(nl));
    CHECK(load_error(dir / "hash.ckpt") == ErrorCode::VersionMismatch);
    h = header;
    h["version"] = kCheckpointVersion + 1;
    spit(dir / "ver.ckpt", h.dump() + bytes.substr(nl));
    CHECK(load_error(dir / "ver.ckpt") == ErrorCode::VersionMismatch);
}

TEST_CASE("bilinear resize") {
    TensorF x(1, 1, 2, 2);
    x.values() = {0, 1, 2, 3};
    const auto same = resize_bilinear(x, 2, 2);
    CHECK(same.values() == x.values());
    const auto up = resize_bilinear(x, 4, 4);
    // half-pixel centres: output (0,0) maps onto input (-0.25, -0.25), clamped to the corner
    CHECK(up(0, 0, 0, 0) == doctest::Approx(0.0));
    CHECK(up(0, 0, 1, 1) == doctest::Approx(0.75));
    CHECK(up(0, 0, 3, 3) == doctest::Approx(3.0));
    const auto down = resize_bilinear(TensorF(1, 1, 4, 6, 2.5f), 2, 3);
    for (float v : down.values()) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("examples scale ground truth into the input window") {
    DetectorConfig cfg;
    MotionProfile p = test::constant_profile(1280, 480, 255);
    const DetectionBox gt{ManeuverClass::OvertakeLeft, 0, 96, 640, 384};
    const auto ex = make_example(p, {gt}, cfg);
    CHECK(ex.input.shape() == std::array<int, 4>{1, 1, 256, 256});
    CHECK(ex.input(0, 0, 10, 10) == doctest::Approx(1.0));
    REQUIRE(ex.gt.size() == 1);
    CHECK(ex.gt[0].x_max == doctest::Approx(128.0));
    CHECK(ex.gt[0].t_min == doctest::Approx(51.2));
    CHECK(ex.gt[0].t_max == doctest::Approx(204.8));
}

TEST_CASE("inference maps boxes back to profile coordinates") {
    DetectorConfig cfg;
    Detector<float> det(cfg);
    det.initialize(1);
    auto& head = det.layers().back();
    std::fill(head.weights.begin(), head.weights.end(), 0.0f);
    std::fill(head.bias.begin(), head.bias.end(), -10.0f);
    const int a = 1;
    for (int k = 0; k < 4; ++k) head.bias[a * kSlotChannels + k] = 0.0f;
    head.bias[a * kSlotChannels + 4] = 10.0f;
    head.bias[a * kSlotChannels + kBoxFields + code(ManeuverClass::LaneLeft)] = 10.0f;

    const auto boxes = infer(test::random_profile(1280, 480, 3), det);
    REQUIRE_FALSE(boxes.empty());
    bool full_size = false;
    for (const auto& b : boxes) {
        CHECK(b.cls == ManeuverClass::LaneLeft);
        CHECK(b.score > 0.2);
        CHECK(b.x_min >= 0.0);
        CHECK(b.x_max <= 1280.0);
        CHECK(b.t_min >= 0.0);
        CHECK(b.t_max <= 480.0);
        // anchor 128 x 96 scaled by (5, 1.875)
        if (std::abs(b.width() - 640.0) < 1e-3 && std::abs(b.height() - 180.0) < 1e-3) full_size = true;
        CHECK(b.width() <= 640.0 + 1e-3);
        CHECK(b.height() <= 180.0 + 1e-3);
    }
    CHECK(full_size);

    DetectorCheckpoint ck{cfg, kCheckpointVersion, 1, det.parameters()};
    CHECK(infer(test::random_profile(1280, 480, 3), ck).size() == boxes.size());
    ck.config.input_channels = 3;
    Detector<float> color(ck.config);
    ck.parameters = color.parameters();
    CHECK_THROWS_AS(infer(test::random_profile(256, 256, 4), ck), Error);
}

TEST_CASE("training overfits a handful of profiles") {
    DetectorConfig cfg;
    const auto data = synth_examples(10, 31, cfg, 0.0);
    TrainConfig tc;
    tc.batch_size = 5;
    tc.lr = 3e-3;
    tc.max_epochs = 100;
    tc.max_steps = 200;
    tc.weight_decay = 0.0;
    tc.seed = 5;
    const auto res = train(data, {}, cfg, tc);
    CHECK(res.steps == 200);
    CHECK(res.epochs_run == 100);
    REQUIRE(res.log.front().epoch == 0);
    const double initial = res.log.front().loss;
    Detector<float> det(cfg);
    det.set_parameters(res.checkpoint.parameters);
    const double final_loss = evaluate_loss(det, data);
    MESSAGE("initial " << initial << " final " << final_loss);
    CHECK(final_loss < 0.1 * initial);
}

TEST_CASE("training is deterministic across thread counts") {
    DetectorConfig cfg;
    cfg.input_width = 128;
    cfg.input_height = 128;
    const auto data = synth_examples(6, 3, cfg);
    const auto val = synth_examples(2, 90, cfg);
    TrainConfig tc;
    tc.batch_size = 3;
    tc.max_epochs = 2;
    tc.seed = 11;
    tc.mirror_augment = true;
    tc.threads = 1;
    std::vector<LossRecord> seen;
    const auto a = train(data, val, cfg, tc, [&](const LossRecord& r) { seen.push_back(r); });
    tc.threads = 4;
    const auto b = train(data, val, cfg, tc);
    CHECK(a.checkpoint == b.checkpoint);
    CHECK(a.epochs_run == 2);
    CHECK(a.log.size() == 6);  // train and val for epochs 0, 1, 2
    CHECK(seen.size() == a.log.size());
    CHECK(a.log[1].split == "val");
    tc.seed = 12;
    CHECK_FALSE(train(data, val, cfg, tc).checkpoint == a.checkpoint);

    test::TempDir dir("train");
    write_loss_log(dir / "loss.csv", a.log);
    std::ifstream in(dir / "loss.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,split,loss");
    std::getline(in, line);
    CHECK(line.rfind("0,train,", 0) == 0);
}

TEST_CASE("training configuration errors") {
    DetectorConfig cfg;
    TrainConfig tc;
    try {
        train({}, {}, cfg, tc);
        FAIL("expected EmptySplit");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySplit);
    }
    tc.lr = 0.0;
    CHECK_THROWS_AS(tc.validate(), Error);
    tc = {};
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), Error);
    test::TempDir dir("train");
    CHECK_THROWS_AS(train_on_dataset(dir.path(), cfg, TrainConfig{}), Error);
}
