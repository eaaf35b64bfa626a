#include "mprof/records.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mprof {

namespace {

template <class T>
T require(const Json& j, const char* key) {
    if (!j.contains(key))
        throw Error(ErrorCode::MalformedInput, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedInput, std::string("bad field '") + key + "': " + e.what());
    }
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

}  // namespace

Json event_to_json(const ManeuverEvent& e) {
    Json j;
    j["class"] = std::string(short_name(e.cls));
    j["t_start"] = e.t_start;
    j["t_end"] = e.t_end;
    return j;
}

ManeuverEvent event_from_json(const Json& j) {
    ManeuverEvent e;
    e.cls = parse_class(require<std::string>(j, "class"));
    e.t_start = require<int>(j, "t_start");
    e.t_end = require<int>(j, "t_end");
    return e;
}

Json box_to_json(const DetectionBox& b) {
    Json j;
    j["class"] = std::string(short_name(b.cls));
    j["x_min"] = b.x_min;
    j["t_min"] = b.t_min;
    j["x_max"] = b.x_max;
    j["t_max"] = b.t_max;
    j["score"] = b.score;
    return j;
}

DetectionBox box_from_json(const Json& j) {
    DetectionBox b;
    b.cls = parse_class(require<std::string>(j, "class"));
    b.x_min = require<double>(j, "x_min");
    b.t_min = require<double>(j, "t_min");
    b.x_max = require<double>(j, "x_max");
    b.t_max = require<double>(j, "t_max");
    b.score = j.contains("score") ? require<double>(j, "score") : 1.0;
    if (!b.valid()) throw Error(ErrorCode::MalformedInput, "degenerate box");
    return b;
}

Json to_json(const EventRecord& r) {
    Json j;
    j["video_id"] = r.video_id;
    const Json ev = event_to_json(r.event);
    for (const auto& [k, v] : ev.items()) j[k] = v;
    return j;
}

Json to_json(const DetectionRecord& r) {
    Json j;
    j["video_id"] = r.video_id;
    j["class"] = std::string(short_name(r.box.cls));
    const int t_start = static_cast<int>(std::floor(r.box.t_min));
    j["t_start"] = t_start;
    j["t_end"] = std::max(t_start + 1, static_cast<int>(std::ceil(r.box.t_max)));
    j["x_min"] = r.box.x_min;
    j["t_min"] = r.box.t_min;
    j["x_max"] = r.box.x_max;
    j["t_max"] = r.box.t_max;
    j["score"] = r.box.score;
    return j;
}

LabelRecord parse_label_record(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedInput, "record is not a JSON object");
    LabelRecord r;
    r.video_id = require<std::string>(j, "video_id");
    const bool has_box = j.contains("x_min");
    if (has_box) {
        r.box = box_from_json(j);
        r.event.cls = r.box->cls;
        r.event.t_start = j.contains("t_start") ? require<int>(j, "t_start")
                                                : static_cast<int>(std::floor(r.box->t_min));
        r.event.t_end = j.contains("t_end") ? require<int>(j, "t_end")
                                            : static_cast<int>(std::ceil(r.box->t_max));
    } else {
        r.event = event_from_json(j);
    }
    return r;
}

std::vector<LabelRecord> read_label_jsonl(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    std::vector<LabelRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::MalformedInput,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back(parse_label_record(j));
    }
    return out;
}

std::vector<DetectionRecord> read_detections_jsonl(const std::filesystem::path& path) {
    std::vector<DetectionRecord> out;
    for (auto& r : read_label_jsonl(path)) {
        if (!r.box) throw Error(ErrorCode::MalformedInput, "detection record without box fields");
        out.push_back({r.video_id, *r.box});
    }
    return out;
}

void write_detections_jsonl(const std::filesystem::path& path,
                            const std::vector<DetectionRecord>& records) {
    auto out = open_for_write(path);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void write_events_jsonl(const std::filesystem::path& path, const std::vector<EventRecord>& records) {
    auto out = open_for_write(path);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::Malformed, path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace mprof
