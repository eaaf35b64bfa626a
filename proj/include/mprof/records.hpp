#pragma once

// JSONL interchange records for labeled events and detections.
//
//   event:     {"video_id", "class", "t_start", "t_end"}
//   detection: event fields + {"x_min", "t_min", "x_max", "t_max", "score"}

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mprof/core.hpp"

namespace mprof {

using Json = nlohmann::ordered_json;

struct EventRecord {
    std::string video_id;
    ManeuverEvent event;
};

struct DetectionRecord {
    std::string video_id;
    DetectionBox box;
};

Json to_json(const EventRecord& r);
Json to_json(const DetectionRecord& r);
Json box_to_json(const DetectionBox& b);
DetectionBox box_from_json(const Json& j);
ManeuverEvent event_from_json(const Json& j);
Json event_to_json(const ManeuverEvent& e);

/// A ground-truth or detection line: box fields are optional so that plain
/// event records can be read too. Throws MalformedInput / UnknownClass.
struct LabelRecord {
    std::string video_id;
    ManeuverEvent event;
    std::optional<DetectionBox> box;
};
LabelRecord parse_label_record(const Json& j);

std::vector<LabelRecord> read_label_jsonl(const std::filesystem::path& path);
std::vector<DetectionRecord> read_detections_jsonl(const std::filesystem::path& path);
void write_detections_jsonl(const std::filesystem::path& path,
                            const std::vector<DetectionRecord>& records);
void write_events_jsonl(const std::filesystem::path& path, const std::vector<EventRecord>& records);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace mprof
