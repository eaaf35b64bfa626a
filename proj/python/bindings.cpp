#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mprof/bench.hpp"
#include "mprof/classic.hpp"
#include "mprof/eval.hpp"
#include "mprof/ingest.hpp"
#include "mprof/nn/train.hpp"
#include "mprof/profile.hpp"
#include "mprof/synth.hpp"

namespace py = pybind11;
using namespace mprof;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const Json& j) { return j.dump(); }

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

U8Array samples_array(const MotionProfile& p) {
    std::vector<py::ssize_t> shape{p.dims.height, p.dims.width};
    if (p.dims.channels > 1) shape.push_back(p.dims.channels);
    U8Array out(shape);
    std::copy(p.samples.begin(), p.samples.end(), out.mutable_data());
    return out;
}

MotionProfile profile_from_array(const U8Array& a, int v_x, const std::string& video_id) {
    if (a.ndim() != 2 && a.ndim() != 3) throw Error(ErrorCode::InvalidArgument, "profile array must be T x W or T x W x C");
    MotionProfile p;
    p.dims = {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1};
    p.dims.validate();
    p.samples.assign(a.data(), a.data() + a.size());
    p.provenance.video_id = video_id;
    p.provenance.v_x = v_x < 0 ? p.dims.width / 2 : v_x;
    return p;
}

std::string boxes_json(const std::vector<DetectionBox>& boxes) {
    Json j = Json::array();
    for (const auto& b : boxes) j.push_back(box_to_json(b));
    return j.dump();
}

std::vector<DetectionRecord> records_from_json(const std::string& text) {
    std::vector<DetectionRecord> out;
    for (const auto& item : Json::parse(text)) {
        const auto r = parse_label_record(item);
        if (!r.box) throw Error(ErrorCode::MalformedInput, "record for '" + r.video_id + "' has no box fields");
        out.push_back({r.video_id, *r.box});
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_mprof, m) {
    m.doc() = "Motion-profile maneuver detection toolkit (native core)";

    // raised with args (code name, message)
    static py::exception<Error> mprof_error(m, "MprofError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(mprof_error.ptr(),
                            py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
        }
    });

    m.def("iou", [](std::array<double, 4> a, std::array<double, 4> b) {
        return iou(DetectionBox{ManeuverClass::LaneRight, a[0], a[1], a[2], a[3]},
                   DetectionBox{ManeuverClass::LaneRight, b[0], b[1], b[2], b[3]});
    }, py::arg("a"), py::arg("b"), "IoU of two (x_min, t_min, x_max, t_max) boxes.");

    m.def("event_to_bbox", [](const std::string& cls, int t_start, int t_end, int v_x, int width, int height) {
        return dump(box_to_json(event_to_bbox({parse_class(cls), t_start, t_end}, v_x, {width, height, 1})));
    }, py::arg("cls"), py::arg("t_start"), py::arg("t_end"), py::arg("v_x"), py::arg("width"), py::arg("height"));

    m.def("build_profile", [](const std::filesystem::path& manifest, const std::string& belt, int channels) {
        const auto man = load_manifest(manifest);
        auto source = open_source(man);
        MotionProfile p;
        {
            py::gil_scoped_release release;
            p = build_profile(*source, man, parse_belt(belt), channels);
        }
        return py::make_tuple(samples_array(p), dump(provenance_to_json(p)));
    }, py::arg("manifest"), py::arg("belt") = "medium", py::arg("channels") = 1);

    m.def("load_profile", [](const std::filesystem::path& path) {
        const auto p = import_profile(path);
        return py::make_tuple(samples_array(p), dump(provenance_to_json(p)));
    }, py::arg("path"));

    m.def("make_dataset", [](const std::filesystem::path& out, int count, std::uint64_t seed, int width, int height,
                             double noise, bool position_critical) {
        DatasetConfig cfg;
        cfg.count = count;
        cfg.seed = seed;
        cfg.dims = {width, height, 1};
        cfg.noise_sigma = noise;
        cfg.position_critical = position_critical;
        DatasetIndex idx;
        {
            py::gil_scoped_release release;
            idx = make_dataset(cfg, out);
        }
        return dump(index_to_json(idx));
    }, py::arg("out"), py::arg("count") = 100, py::arg("seed") = 0, py::arg("width") = 256,
       py::arg("height") = 256, py::arg("noise") = 6.0, py::arg("position_critical") = false);

    m.def("detect_classic", [](const U8Array& profile, int v_x) {
        return boxes_json(classic::detect_classic(profile_from_array(profile, v_x, "array"), v_x));
    }, py::arg("profile"), py::arg("v_x"));

    m.def("infer", [](const std::filesystem::path& checkpoint, const U8Array& profile, double conf, double nms) {
        const auto ck = nn::load_checkpoint(checkpoint);
        const auto p = profile_from_array(profile, -1, "array");
        std::vector<DetectionBox> boxes;
        {
            py::gil_scoped_release release;
            boxes = nn::infer(p, ck, {conf, nms});
        }
        return boxes_json(boxes);
    }, py::arg("checkpoint"), py::arg("profile"), py::arg("conf") = 0.2, py::arg("nms") = 0.5);

    m.def("evaluate", [](const std::string& dets, const std::string& gts, double iou_thresh, double conf_thresh,
                         const std::vector<std::string>& classes, const std::string& dataset_id) {
        eval::EvalOptions opts;
        opts.iou_thresh = iou_thresh;
        opts.conf_thresh = conf_thresh;
        opts.dataset_id = dataset_id;
        if (!classes.empty()) {
            opts.classes.clear();
            for (const auto& c : classes) opts.classes.push_back(parse_class(c));
        }
        return dump(eval::report_to_json(eval::evaluate(records_from_json(dets), records_from_json(gts), opts)));
    }, py::arg("dets"), py::arg("gts"), py::arg("iou_thresh") = 0.3, py::arg("conf_thresh") = 0.2,
       py::arg("classes") = std::vector<std::string>{}, py::arg("dataset_id") = "");

    m.def("mean_ap", [](const std::vector<double>& aps) { return eval::mean_ap(aps); }, py::arg("aps"));
    m.def("f1_score", &eval::f1_score, py::arg("precision"), py::arg("recall"));

    m.def("bench_strip", [](int width, int belt_height, int channels, int iterations, std::uint64_t seed) {
        BenchOptions o;
        o.width = width;
        o.belt_height = belt_height;
        o.channels = channels;
        o.iterations = iterations;
        o.seed = seed;
        BenchReport r;
        {
            py::gil_scoped_release release;
            r = bench_strip(o);
        }
        return dump(bench_to_json(r));
    }, py::arg("width") = 1280, py::arg("belt_height") = 65, py::arg("channels") = 1, py::arg("iterations") = 1000,
       py::arg("seed") = 0);
}
