#pragma once

// Detection scoring: greedy IoU matching, per-class AP (all-point), mAP and
// P/R/F1 at a confidence cut.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mprof/core.hpp"
#include "mprof/records.hpp"

namespace mprof::eval {

struct Counts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    bool operator==(const Counts&) const = default;
};

struct MatchResult {
    std::vector<bool> det_tp;     // per detection, input order
    std::vector<int> det_gt;      // matched gt index or -1
    std::vector<bool> gt_matched;
    Counts counts;
};

/// Detections claim, in descending score order (input order on ties), the
/// unmatched same-class gt with the highest IoU (first in list on ties) if
/// that IoU exceeds iou_thresh.
MatchResult match_detections(std::span<const DetectionBox> dets, std::span<const DetectionBox> gts,
                             double iou_thresh = 0.3);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// 0/0 is 0 for every ratio.
PRF precision_recall_f1(const Counts& c);
double f1_score(double precision, double recall);

/// All-point interpolated area under the precision envelope. `tp` holds the
/// match flags of detections sorted by descending score.
double ap_from_ranked(const std::vector<bool>& tp, long num_gt);

double average_precision(std::span<const DetectionBox> dets, std::span<const DetectionBox> gts,
                         double iou_thresh = 0.3);

/// Unweighted mean; 0 for an empty list.
double mean_ap(std::span<const double> aps);

struct EvalOptions {
    double iou_thresh = 0.3;
    double conf_thresh = 0.2;
    std::vector<ManeuverClass> classes{kAllClasses.begin(), kAllClasses.end()};
    std::string dataset_id;
};

struct ClassMetrics {
    ManeuverClass cls{};
    double ap = 0.0;
    PRF prf;
    Counts counts;      // at the confidence cut
    long num_gt = 0;
    long num_dets = 0;  // all scored detections
    bool in_map = true;
};

struct EvalReport {
    std::string dataset_id;
    double iou_thresh = 0.3;
    double conf_thresh = 0.2;
    std::vector<ClassMetrics> classes;
    double map = 0.0;
    std::vector<std::string> warnings;

    const ClassMetrics& metrics(ManeuverClass c) const;
};

/// Matching is restricted to equal (video_id, class). Classes with neither
/// gt nor detections are left out of the mAP with a warning.
EvalReport evaluate(const std::vector<DetectionRecord>& dets, const std::vector<DetectionRecord>& gts,
                    const EvalOptions& options = {});
/// Throws MalformedInput, UnknownClass, MissingFile.
EvalReport evaluate_files(const std::filesystem::path& dets, const std::filesystem::path& gts,
                          const EvalOptions& options = {});

Json report_to_json(const EvalReport& r);
std::string report_to_csv(const EvalReport& r);

}  // namespace mprof::eval
