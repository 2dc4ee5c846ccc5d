#pragma once

// Tracklet-level detection evaluation: greedy 3-D IoU matching, all-points
// average precision, mAP and discovered mAP, grounding accuracy.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/joint_crf.hpp"
#include "docdisc/track_model.hpp"
#include "docdisc/version.hpp"

namespace docdisc {

struct Detection {
  const Tracklet* tracklet = nullptr;
  int class_id = 0;
  double score = 0;
};

struct EvalConfig {
  double iou_threshold = 0.3;
};

struct PrPoint {
  double score;
  double precision;
  double recall;
};

struct ClassMetrics {
  std::string name;
  std::optional<double> ap;  // undefined when the class has no ground truth
  int num_gt = 0;
  int num_det = 0;
  bool discovered = false;   // at least one detection from a category mapped to this class
  std::vector<PrPoint> pr;
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;  // sorted by name
  double map = 0;
  double discovered_map = 0;
  bool discovered_defined = false;    // false: nothing was discovered and discovered_map is reported as 0
};

/// Greedy matching of one class's detections in descending score (ties by
/// tracklet id). A detection is a TP when its best still-unmatched ground
/// truth has iou_3d >= threshold. Flags are returned in input order.
inline std::vector<bool> match_detections(const std::vector<Detection>& detections,
                                          const std::vector<const GroundTruthTrack*>& ground_truth,
                                          double iou_threshold) {
  std::vector<std::size_t> order(detections.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (detections[a].score != detections[b].score) return detections[a].score > detections[b].score;
    return detections[a].tracklet->id < detections[b].tracklet->id;
  });
  std::vector<bool> matched(ground_truth.size(), false);
  std::vector<bool> tp(detections.size(), false);
  for (std::size_t k : order) {
    double best = -1;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (matched[g]) continue;
      const double iou = iou_3d(*detections[k].tracklet, *ground_truth[g]);
      if (iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best >= iou_threshold) {
      matched[best_g] = true;
      tp[k] = true;
    }
  }
  return tp;
}

struct ApResult {
  std::optional<double> ap;
  std::vector<PrPoint> pr;
};

/// All-points interpolated AP: the area under the precision envelope, with
/// recall measured against num_gt. Ties in score keep input order.
inline ApResult average_precision(const std::vector<double>& scores, const std::vector<bool>& tp, int num_gt) {
  if (scores.size() != tp.size()) throw DimensionMismatch("scores and flags differ in length");
  ApResult out;
  std::vector<std::size_t> order(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (num_gt <= 0) return out;

  int hits = 0;
  std::vector<double> precision;
  std::vector<double> recall;
  for (std::size_t n = 0; n < order.size(); ++n) {
    if (tp[order[n]]) ++hits;
    precision.push_back(static_cast<double>(hits) / static_cast<double>(n + 1));
    recall.push_back(static_cast<double>(hits) / num_gt);
    out.pr.push_back({scores[order[n]], precision.back(), recall.back()});
  }
  for (std::size_t n = precision.size(); n-- > 1;) precision[n - 1] = std::max(precision[n - 1], precision[n]);
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t n = 0; n < precision.size(); ++n) {
    ap += (recall[n] - prev_recall) * precision[n];
    prev_recall = recall[n];
  }
  out.ap = ap;
  return out;
}

/// Ground-truth class names covered by each category: a category maps to a
/// class when the (lowercased) class name is one of its lemmas.
inline std::map<int, std::vector<std::string>> map_categories(const CategorySet& categories,
                                                              const std::set<std::string>& class_names) {
  std::map<int, std::vector<std::string>> out;
  for (const auto& [id, lemmas] : categories.lemmas) {
    if (id == kBackground) continue;
    auto& names = out[id];
    for (const auto& name : class_names)
      if (lemmas.count(text_detail::to_lower(name))) names.push_back(name);
  }
  return out;
}

/// Detections of a category mapped to a class count for that class;
/// detections of unmapped categories are entered as candidates in every
/// class, where they can only be false positives or steal matches.
inline MetricsReport compute_metrics(const std::vector<Detection>& detections, const CategorySet& categories,
                                     const GroundTruthFile& ground_truth, const EvalConfig& cfg = {}) {
  std::set<std::string> names;
  for (const auto& g : ground_truth.tracks) names.insert(g.class_name);
  const auto mapping = map_categories(categories, names);

  std::map<std::string, std::vector<Detection>> per_class;
  std::map<std::string, std::vector<bool>> mapped_flag;
  std::vector<std::string> unknown;
  for (const auto& d : detections) {
    auto it = mapping.find(d.class_id);
    if (it == mapping.end()) {
      unknown.push_back(std::to_string(d.class_id));
      continue;
    }
    const bool mapped = !it->second.empty();
    for (const auto& name : mapped ? it->second : std::vector<std::string>(names.begin(), names.end())) {
      per_class[name].push_back(d);
      mapped_flag[name].push_back(mapped);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "detections reference unknown categories:";
    for (const auto& u : unknown) msg += " " + u;
    throw UnmappedClass(msg);
  }

  MetricsReport report;
  double sum_all = 0;
  double sum_disc = 0;
  int n_all = 0;
  int n_disc = 0;
  for (const auto& name : names) {
    ClassMetrics cm;
    cm.name = name;
    std::vector<const GroundTruthTrack*> gts;
    for (const auto& g : ground_truth.tracks)
      if (g.class_name == name) gts.push_back(&g);
    cm.num_gt = static_cast<int>(gts.size());
    const auto& dets = per_class[name];
    const auto& flags = mapped_flag[name];
    cm.num_det = static_cast<int>(std::count(flags.begin(), flags.end(), true));
    cm.discovered = cm.num_det > 0;
    const std::vector<bool> tp = match_detections(dets, gts, cfg.iou_threshold);
    std::vector<double> scores;
    for (const auto& d : dets) scores.push_back(d.score);
    ApResult ap = average_precision(scores, tp, cm.num_gt);
    cm.ap = ap.ap;
    cm.pr = std::move(ap.pr);
    if (cm.ap) {
      sum_all += *cm.ap;
      ++n_all;
      if (cm.discovered) {
        sum_disc += *cm.ap;
        ++n_disc;
      }
    }
    report.classes.push_back(std::move(cm));
  }
  report.map = n_all ? sum_all / n_all : 0.0;
  report.discovered_defined = n_disc > 0;
  report.discovered_map = n_disc ? sum_disc / n_disc : 0.0;
  return report;
}

/// Positive-labelled tracklets become detections scored by `confidence`.
inline std::vector<Detection> detections_from(const std::vector<Tracklet>& tracklets, const std::map<int, int>& labels,
                                              const std::map<int, double>& confidence) {
  std::vector<Detection> out;
  for (const auto& t : tracklets) {
    const int z = labels.at(t.id);
    if (z == kBackground) continue;
    out.push_back({&t, z, confidence.at(t.id)});
  }
  return out;
}

inline void write_pr_csv(std::ostream& out, const ClassMetrics& cm) {
  out << "# docdisc.pr " << kFormatVersion << " class=" << cm.name << '\n' << "score,precision,recall\n";
  char buf[96];
  for (const auto& p : cm.pr) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.score, p.precision, p.recall);
    out << buf;
  }
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class", c.name},
                       {"AP", c.ap ? nlohmann::json(*c.ap) : nlohmann::json(nullptr)},
                       {"num_gt", c.num_gt},
                       {"num_det", c.num_det},
                       {"discovered", c.discovered}});
  }
  return {{"format", "docdisc.metrics"},
          {"version", kFormatVersion},
          {"classes", classes},
          {"mAP", r.map},
          {"discovered_mAP", r.discovered_map},
          {"discovered_mAP_defined", r.discovered_defined}};
}

/// Fraction of correctly labelled object tracklets whose most frequently
/// grounded lemma (ties: lexicographically smaller) belongs to their true
/// class. A tracklet with no grounding counts as wrong. `true_class` maps
/// tracklet id to class name (absent or empty for clutter); `lemma_class`
/// maps each lemma to the class it names.
inline std::optional<double> grounding_accuracy(const std::map<int, int>& labels, const std::set<IdPair>& groundings,
                                                const std::vector<Keyword>& keywords,
                                                const std::map<int, std::string>& true_class,
                                                const std::map<std::string, std::string>& lemma_class,
                                                const CategorySet& categories) {
  std::map<int, std::map<std::string, int>> counts;
  for (const auto& [i, j] : groundings) ++counts[i][keywords.at(j).lemma];
  int total = 0;
  int correct = 0;
  for (const auto& [id, z] : labels) {
    if (z == kBackground) continue;
    auto tc = true_class.find(id);
    if (tc == true_class.end() || tc->second.empty()) continue;
    // Only true positives: the category must stand for the tracklet's class.
    auto cat = categories.lemmas.find(z);
    if (cat == categories.lemmas.end()) continue;
    bool names_class = false;
    for (const auto& l : cat->second) {
      auto lc = lemma_class.find(l);
      if (lc != lemma_class.end() && lc->second == tc->second) names_class = true;
    }
    if (!names_class) continue;
    ++total;
    auto it = counts.find(id);
    if (it == counts.end()) continue;
    const std::string* best = nullptr;
    int best_n = 0;
    for (const auto& [lemma, n] : it->second)
      if (n > best_n) {
        best_n = n;
        best = &lemma;
      }
    auto lc = lemma_class.find(*best);
    if (lc != lemma_class.end() && lc->second == tc->second) ++correct;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / total;
}

}  // namespace docdisc
