#pragma once

// Analysis report: everything evaluation needs from a run, as one JSON
// document with sorted keys.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "docdisc/analysis_engine.hpp"
#include "docdisc/config.hpp"
#include "docdisc/error.hpp"
#include "docdisc/evaluator.hpp"
#include "docdisc/version.hpp"
#include "json.hpp"

namespace docdisc {

inline nlohmann::json iteration_to_json(const IterationReport& r) {
  nlohmann::json merged = nlohmann::json::array();
  for (const auto& [from, into] : r.categories_merged) merged.push_back({from, into});
  return {{"iteration", r.iteration},
          {"labels_changed", r.labels_changed},
          {"label_change_fraction", r.label_change_fraction},
          {"categories_merged", merged},
          {"categories_pruned", r.categories_pruned},
          {"tracklets_merged", r.tracklets_merged},
          {"screened_in", r.screened_in},
          {"num_tracklets", r.num_tracklets},
          {"num_categories", r.num_categories},
          {"joint_score", r.joint_score}};
}

inline nlohmann::json pairs_to_json(const std::set<IdPair>& pairs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [a, b] : pairs) arr.push_back({a, b});
  return arr;
}

inline nlohmann::json make_report(const EngineResult& r, const std::vector<Keyword>& keywords,
                                  const std::string& video_id, double fps, const RunConfig& cfg) {
  nlohmann::json categories = nlohmann::json::array();
  for (const auto& [id, lemmas] : r.state.categories.lemmas)
    categories.push_back({{"id", id}, {"lemmas", std::vector<std::string>(lemmas.begin(), lemmas.end())}});
  nlohmann::json tracklets = nlohmann::json::array();
  for (const auto& t : r.tracklets) {
    nlohmann::json rec = {{"id", t.id},
                          {"label", r.state.labels.at(t.id)},
                          {"confidence", r.confidence.at(t.id)},
                          {"members", t.members},
                          {"frame_start", t.frame_start},
                          {"boxes", track_detail::boxes_to_json(t.boxes)}};
    std::vector<int> interp;
    for (int k = 0; k < t.length(); ++k)
      if (t.is_interpolated(k)) interp.push_back(t.frame_start + k);
    rec["interpolated"] = interp;
    tracklets.push_back(std::move(rec));
  }
  nlohmann::json kws = nlohmann::json::array();
  for (const auto& k : keywords)
    kws.push_back({{"lemma", k.lemma}, {"span_start_ms", k.span_start}, {"span_end_ms", k.span_end}, {"tfidf", k.tfidf}});
  nlohmann::json iterations = nlohmann::json::array();
  for (const auto& it : r.reports) iterations.push_back(iteration_to_json(it));

  return {{"format", "docdisc.report"},
          {"version", kFormatVersion},
          {"tool_version", kVersionString},
          {"video_id", video_id},
          {"fps", fps},
          {"config", format_config(cfg)},
          {"categories", categories},
          {"tracklets", tracklets},
          {"groundings", pairs_to_json(r.state.groundings)},
          {"baseline_groundings", pairs_to_json(word_count_groundings(r.state.labels, r.graph, keywords))},
          {"links", pairs_to_json(r.state.links)},
          {"keywords", kws},
          {"iterations", iterations}};
}

/// The parts of a report needed for scoring.
struct LoadedReport {
  std::vector<Tracklet> tracklets;
  std::map<int, int> labels;
  std::map<int, double> confidence;
  CategorySet categories;
  std::set<IdPair> groundings;
  std::set<IdPair> baseline_groundings;
  std::vector<Keyword> keywords;
  int iterations = 0;
};

inline LoadedReport load_report(const nlohmann::json& j) {
  if (j.value("format", "") != "docdisc.report") throw ParseError("not a docdisc report");
  if (j.value("version", 0) != kFormatVersion) throw ParseError("unsupported report version");
  LoadedReport out;
  auto pairs = [](const nlohmann::json& arr) {
    std::set<IdPair> s;
    for (const auto& p : arr) s.insert({p.at(0).get<int>(), p.at(1).get<int>()});
    return s;
  };
  try {
    out.categories.lemmas.clear();
    for (const auto& c : j.at("categories")) {
      const auto lemmas = c.at("lemmas").get<std::vector<std::string>>();
      out.categories.lemmas[c.at("id").get<int>()] = std::set<std::string>(lemmas.begin(), lemmas.end());
    }
    for (const auto& rec : j.at("tracklets")) {
      Tracklet t;
      t.id = rec.at("id").get<int>();
      t.frame_start = rec.at("frame_start").get<int>();
      t.boxes = track_detail::boxes_from_json(rec.at("boxes"));
      t.members = rec.at("members").get<std::vector<int>>();
      t.objectness.assign(t.boxes.size(), 0.0);
      const auto interp = rec.at("interpolated").get<std::vector<int>>();
      if (!interp.empty()) {
        t.interpolated.assign(t.boxes.size(), false);
        for (int f : interp) {
          if (f < t.frame_start || f > t.frame_end()) throw ParseError("interpolated frame outside tracklet");
          t.interpolated[f - t.frame_start] = true;
        }
      }
      out.labels[t.id] = rec.at("label").get<int>();
      out.confidence[t.id] = rec.at("confidence").get<double>();
      out.tracklets.push_back(std::move(t));
    }
    out.groundings = pairs(j.at("groundings"));
    out.baseline_groundings = pairs(j.at("baseline_groundings"));
    for (const auto& k : j.at("keywords"))
      out.keywords.push_back({k.at("lemma").get<std::string>(), k.at("span_start_ms").get<Millis>(),
                              k.at("span_end_ms").get<Millis>(), k.at("tfidf").get<double>()});
    out.iterations = static_cast<int>(j.at("iterations").size()) - 1;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return out;
}

}  // namespace docdisc
