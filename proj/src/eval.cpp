#include "mprof/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

namespace mprof::eval {

namespace {

std::vector<std::size_t> score_order(std::span<const DetectionBox> dets) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    return order;
}

}  // namespace

MatchResult match_detections(std::span<const DetectionBox> dets, std::span<const DetectionBox> gts,
                             double iou_thresh) {
    MatchResult r;
    r.det_tp.assign(dets.size(), false);
    r.det_gt.assign(dets.size(), -1);
    r.gt_matched.assign(gts.size(), false);
    for (const std::size_t d : score_order(dets)) {
        int best = -1;
        double best_iou = iou_thresh;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (r.gt_matched[g] || gts[g].cls != dets[d].cls) continue;
            const double o = iou(dets[d], gts[g]);
            if (o > best_iou) {
                best_iou = o;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            r.gt_matched[static_cast<std::size_t>(best)] = true;
            r.det_tp[d] = true;
            r.det_gt[d] = best;
            ++r.counts.tp;
        } else {
            ++r.counts.fp;
        }
    }
    r.counts.fn = static_cast<long>(std::count(r.gt_matched.begin(), r.gt_matched.end(), false));
    return r;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

PRF precision_recall_f1(const Counts& c) {
    PRF out;
    if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.f1 = f1_score(out.precision, out.recall);
    return out;
}

double ap_from_ranked(const std::vector<bool>& tp, long num_gt) {
    if (num_gt <= 0 || tp.empty()) return 0.0;
    const std::size_t n = tp.size();
    std::vector<double> precision(n);
    std::vector<double> recall(n);
    long hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        hits += tp[i] ? 1 : 0;
        precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(hits) / static_cast<double>(num_gt);
    }
    for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double average_precision(std::span<const DetectionBox> dets, std::span<const DetectionBox> gts,
                         double iou_thresh) {
    const auto m = match_detections(dets, gts, iou_thresh);
    std::vector<bool> ranked;
    for (const std::size_t d : score_order(dets)) ranked.push_back(m.det_tp[d]);
    return ap_from_ranked(ranked, static_cast<long>(gts.size()));
}

double mean_ap(std::span<const double> aps) {
    if (aps.empty()) return 0.0;
    return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

const ClassMetrics& EvalReport::metrics(ManeuverClass c) const {
    for (const auto& m : classes)
        if (m.cls == c) return m;
    throw Error(ErrorCode::UnknownClass, "class " + std::string(short_name(c)) + " not in report");
}

namespace {

struct Group {
    std::vector<DetectionBox> dets;
    std::vector<std::size_t> det_ids;  // position in the class-wide detection list
    std::vector<DetectionBox> gts;
};

// Per-video matching for one class. Returns the TP flag of every detection in
// class-list order plus the FN count.
std::pair<std::vector<bool>, long> match_class(const std::vector<DetectionRecord>& dets,
                                               const std::vector<DetectionRecord>& gts, double iou_thresh) {
    std::map<std::string, Group> groups;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        auto& g = groups[dets[i].video_id];
        g.dets.push_back(dets[i].box);
        g.det_ids.push_back(i);
    }
    for (const auto& r : gts) groups[r.video_id].gts.push_back(r.box);
    std::vector<bool> tp(dets.size(), false);
    long fn = 0;
    for (const auto& [id, g] : groups) {
        const auto m = match_detections(g.dets, g.gts, iou_thresh);
        for (std::size_t k = 0; k < g.dets.size(); ++k) tp[g.det_ids[k]] = m.det_tp[k];
        fn += m.counts.fn;
    }
    return {tp, fn};
}

}  // namespace

EvalReport evaluate(const std::vector<DetectionRecord>& dets, const std::vector<DetectionRecord>& gts,
                    const EvalOptions& options) {
    EvalReport report;
    report.dataset_id = options.dataset_id;
    report.iou_thresh = options.iou_thresh;
    report.conf_thresh = options.conf_thresh;
    std::vector<double> aps;
    for (const ManeuverClass cls : options.classes) {
        std::vector<DetectionRecord> cd;
        std::vector<DetectionRecord> cg;
        for (const auto& r : dets)
            if (r.box.cls == cls) cd.push_back(r);
        for (const auto& r : gts)
            if (r.box.cls == cls) cg.push_back(r);

        ClassMetrics m;
        m.cls = cls;
        m.num_gt = static_cast<long>(cg.size());
        m.num_dets = static_cast<long>(cd.size());

        const auto [tp_all, fn_all] = match_class(cd, cg, options.iou_thresh);
        std::vector<std::size_t> order(cd.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return cd[a].box.score > cd[b].box.score; });
        std::vector<bool> ranked;
        for (const std::size_t i : order) ranked.push_back(tp_all[i]);
        m.ap = ap_from_ranked(ranked, m.num_gt);

        std::vector<DetectionRecord> confident;
        for (const auto& r : cd)
            if (r.box.score >= options.conf_thresh) confident.push_back(r);
        const auto [tp_conf, fn_conf] = match_class(confident, cg, options.iou_thresh);
        m.counts.tp = static_cast<long>(std::count(tp_conf.begin(), tp_conf.end(), true));
        m.counts.fp = static_cast<long>(confident.size()) - m.counts.tp;
        m.counts.fn = fn_conf;
        m.prf = precision_recall_f1(m.counts);

        if (m.num_gt == 0 && m.num_dets == 0) {
            m.in_map = false;
            report.warnings.push_back("class " + std::string(short_name(cls)) +
                                      " has no ground truth and no detections; excluded from mAP");
        } else {
            aps.push_back(m.ap);
        }
        report.classes.push_back(m);
    }
    if (aps.empty() && !options.classes.empty()) report.warnings.push_back("no class contributes to mAP");
    report.map = mean_ap(aps);
    return report;
}

EvalReport evaluate_files(const std::filesystem::path& dets, const std::filesystem::path& gts,
                          const EvalOptions& options) {
    return evaluate(read_detections_jsonl(dets), read_detections_jsonl(gts), options);
}

Json report_to_json(const EvalReport& r) {
    Json j;
    j["dataset_id"] = r.dataset_id;
    j["iou_thresh"] = r.iou_thresh;
    j["conf_thresh"] = r.conf_thresh;
    j["interpolation"] = "all-point";
    j["mAP"] = r.map;
    Json classes = Json::array();
    for (const auto& m : r.classes) {
        Json c;
        c["class"] = short_name(m.cls);
        c["ap"] = m.ap;
        c["precision"] = m.prf.precision;
        c["recall"] = m.prf.recall;
        c["f1"] = m.prf.f1;
        c["tp"] = m.counts.tp;
        c["fp"] = m.counts.fp;
        c["fn"] = m.counts.fn;
        c["num_gt"] = m.num_gt;
        c["num_dets"] = m.num_dets;
        c["in_map"] = m.in_map;
        classes.push_back(c);
    }
    j["classes"] = classes;
    j["warnings"] = r.warnings;
    return j;
}

std::string report_to_csv(const EvalReport& r) {
    std::string out = "class,ap,precision,recall,f1,tp,fp,fn\n";
    char buf[256];
    for (const auto& m : r.classes) {
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%ld,%ld,%ld\n",
                      std::string(short_name(m.cls)).c_str(), m.ap, m.prf.precision, m.prf.recall, m.prf.f1,
                      m.counts.tp, m.counts.fp, m.counts.fn);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "mAP,%.4f,,,,,,\n", r.map);
    out += buf;
    return out;
}

}  // namespace mprof::eval
