#pragma once

// Tracklets, geometric features, spatio-temporal overlap and the candidate
// graphs G (tracklet-keyword) and R (tracklet-tracklet).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/text_pipeline.hpp"
#include "docdisc/version.hpp"
#include "json.hpp"

namespace docdisc {

struct Box {
  double x = 0;
  double y = 0;
  double w = 1;
  double h = 1;

  double area() const { return w * h; }
  bool valid() const { return w > 0 && h > 0 && std::isfinite(x) && std::isfinite(y); }
  bool operator==(const Box&) const = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0 || ih <= 0) return 0.0;
  return iw * ih;
}

inline double iou_2d(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct GeometricFeature {
  int frame_start = 0;
  int frame_end = 0;
  Box first_box;
  Box last_box;
  double velocity_x = 0;  // pixels per frame
  double velocity_y = 0;
};

struct Tracklet {
  int id = 0;
  int frame_start = 0;
  std::vector<Box> boxes;            // one per frame from frame_start
  std::vector<bool> interpolated;    // empty, or one flag per box
  std::vector<int> feature_frames;   // absolute frame index of each feature vector
  std::vector<std::vector<double>> features;
  std::vector<double> objectness;    // one per box
  std::vector<int> members;          // ids of the original tracklets merged into this one

  int length() const { return static_cast<int>(boxes.size()); }
  int frame_end() const { return frame_start + length() - 1; }
  bool is_interpolated(int k) const { return !interpolated.empty() && interpolated[k]; }
  bool counts_in_volume(int k) const { return !is_interpolated(k); }
  int dimension() const { return features.empty() ? 0 : static_cast<int>(features.front().size()); }

  GeometricFeature geometry() const {
    GeometricFeature g;
    g.frame_start = frame_start;
    g.frame_end = frame_end();
    g.first_box = boxes.front();
    g.last_box = boxes.back();
    if (length() > 1) {
      const double span = static_cast<double>(length() - 1);
      g.velocity_x = (g.last_box.x - g.first_box.x) / span;
      g.velocity_y = (g.last_box.y - g.first_box.y) / span;
    }
    return g;
  }

  std::vector<double> mean_feature() const {
    std::vector<double> mean(dimension(), 0.0);
    for (const auto& f : features)
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += f[d];
    for (double& v : mean) v /= static_cast<double>(features.size());
    return mean;
  }

  // Throws ParseError naming the first violated invariant.
  void validate(int feature_dim) const {
    auto fail = [&](const std::string& why) {
      throw ParseError("tracklet " + std::to_string(id) + ": " + why);
    };
    if (boxes.empty()) fail("no boxes");
    for (const auto& b : boxes)
      if (!b.valid()) fail("box with non-positive size");
    if (!interpolated.empty() && interpolated.size() != boxes.size()) fail("interpolated flags length mismatch");
    if (objectness.size() != boxes.size()) fail("objectness length differs from box count");
    for (double o : objectness)
      if (!(o >= 0.0 && o <= 1.0)) fail("objectness outside [0,1]");
    if (features.empty()) fail("no feature vectors");
    if (feature_frames.size() != features.size()) fail("feature_frames length differs from features");
    for (const auto& f : features) {
      if (static_cast<int>(f.size()) != feature_dim) fail("feature dimension mismatch");
      for (double v : f)
        if (!std::isfinite(v)) fail("non-finite feature value");
    }
    for (int fr : feature_frames)
      if (fr < frame_start || fr > frame_end()) fail("feature frame outside tracklet span");
  }
};

// Anything with frame_start, boxes and a per-frame volume mask.
template <class T>
concept BoxTube = requires(const T& t, int k) {
  { t.frame_start } -> std::convertible_to<int>;
  { t.boxes.size() } -> std::convertible_to<std::size_t>;
  { t.counts_in_volume(k) } -> std::convertible_to<bool>;
};

template <BoxTube T>
double tube_volume(const T& t) {
  double v = 0;
  for (std::size_t k = 0; k < t.boxes.size(); ++k)
    if (t.counts_in_volume(static_cast<int>(k))) v += t.boxes[k].area();
  return v;
}

/// Spatio-temporal IoU: per-frame areas summed over time. Frames flagged as
/// interpolated contribute no volume.
template <BoxTube A, BoxTube B>
double iou_3d(const A& a, const B& b) {
  const int a_end = a.frame_start + static_cast<int>(a.boxes.size());
  const int b_end = b.frame_start + static_cast<int>(b.boxes.size());
  double inter = 0;
  for (int f = std::max<int>(a.frame_start, b.frame_start); f < std::min(a_end, b_end); ++f) {
    const int ka = f - a.frame_start;
    const int kb = f - b.frame_start;
    if (a.counts_in_volume(ka) && b.counts_in_volume(kb)) inter += intersection_area(a.boxes[ka], b.boxes[kb]);
  }
  const double uni = tube_volume(a) + tube_volume(b) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct GraphConfig {
  double lambda_t = 15.0;        // temporal decay, frames
  int max_gap = 30;              // frames
  double link_floor = 0.05;
  double span_dilation_ms = 0.0;
};

/// exp(-gap / lambda_t) * IoU(u1's last box advanced by its velocity over the
/// gap, u2's first box). Requires u1 to end no later than u2 starts.
inline double geometric_consistency(const GeometricFeature& u1, const GeometricFeature& u2,
                                    const GraphConfig& cfg) {
  const int gap = u2.frame_start - u1.frame_end;
  if (gap < 0 || gap > cfg.max_gap) return 0.0;
  Box predicted = u1.last_box;
  predicted.x += u1.velocity_x * gap;
  predicted.y += u1.velocity_y * gap;
  return std::exp(-static_cast<double>(gap) / cfg.lambda_t) * iou_2d(predicted, u2.first_box);
}

// Consistency of an unordered pair, evaluated in temporal order. Pairs that
// overlap by more than one frame cannot be consecutive segments.
inline double pair_consistency(const Tracklet& a, const Tracklet& b, const GraphConfig& cfg) {
  if (a.frame_end() <= b.frame_start) return geometric_consistency(a.geometry(), b.geometry(), cfg);
  if (b.frame_end() <= a.frame_start) return geometric_consistency(b.geometry(), a.geometry(), cfg);
  return 0.0;
}

struct TimeSpan {
  double start_ms;
  double end_ms;  // exclusive
};

inline TimeSpan tracklet_span_ms(const Tracklet& t, double fps) {
  return {t.frame_start * 1000.0 / fps, (t.frame_end() + 1) * 1000.0 / fps};
}

inline bool spans_overlap(const TimeSpan& a, const TimeSpan& b) {
  return a.start_ms < b.end_ms && b.start_ms < a.end_ms;
}

using IdPair = std::pair<int, int>;

struct CandidateGraph {
  std::set<IdPair> keyword_pairs;         // (tracklet id, keyword index)
  std::map<IdPair, double> link_pairs;    // (smaller id, larger id) -> consistency

  std::vector<int> keywords_of(int tracklet_id) const {
    std::vector<int> out;
    for (auto it = keyword_pairs.lower_bound({tracklet_id, -1});
         it != keyword_pairs.end() && it->first == tracklet_id; ++it)
      out.push_back(it->second);
    return out;
  }
  bool has_keyword_pair(int i, int j) const { return keyword_pairs.count({i, j}) > 0; }
  bool has_link_pair(int i, int k) const { return link_pairs.count({std::min(i, k), std::max(i, k)}) > 0; }
};

inline CandidateGraph build_candidate_graph(const std::vector<Tracklet>& tracklets,
                                            const std::vector<Keyword>& keywords, double fps,
                                            const GraphConfig& cfg) {
  if (!(fps > 0)) throw ParseError("fps must be positive");
  CandidateGraph g;
  for (const auto& t : tracklets) {
    const TimeSpan ts = tracklet_span_ms(t, fps);
    for (std::size_t j = 0; j < keywords.size(); ++j) {
      const TimeSpan ks{keywords[j].span_start - cfg.span_dilation_ms, keywords[j].span_end + cfg.span_dilation_ms};
      if (spans_overlap(ts, ks)) g.keyword_pairs.insert({t.id, static_cast<int>(j)});
    }
  }
  for (std::size_t a = 0; a < tracklets.size(); ++a) {
    for (std::size_t b = a + 1; b < tracklets.size(); ++b) {
      const double s = pair_consistency(tracklets[a], tracklets[b], cfg);
      if (s > cfg.link_floor) {
        const int i = std::min(tracklets[a].id, tracklets[b].id);
        const int k = std::max(tracklets[a].id, tracklets[b].id);
        g.link_pairs[{i, k}] = s;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Files.

struct TrackletFile {
  std::string video_id;
  double fps = 25.0;
  int feature_dim = 0;
  std::vector<Tracklet> tracklets;
};

struct GroundTruthTrack {
  int id = 0;
  std::string class_name;
  int frame_start = 0;
  std::vector<Box> boxes;

  int frame_end() const { return frame_start + static_cast<int>(boxes.size()) - 1; }
  bool counts_in_volume(int) const { return true; }
};

struct GroundTruthFile {
  std::string video_id;
  double fps = 25.0;
  std::vector<GroundTruthTrack> tracks;
};

namespace track_detail {

inline nlohmann::json boxes_to_json(const std::vector<Box>& boxes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : boxes) arr.push_back({b.x, b.y, b.w, b.h});
  return arr;
}

inline std::vector<Box> boxes_from_json(const nlohmann::json& arr) {
  std::vector<Box> boxes;
  for (const auto& b : arr) {
    if (!b.is_array() || b.size() != 4) throw ParseError("box must be [x,y,w,h]");
    boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  return boxes;
}

template <class Fn>
void for_each_record(std::istream& in, const std::string& what, Fn&& fn) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text_detail::trim(line).empty()) continue;
    try {
      fn(nlohmann::json::parse(line), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(what + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace track_detail

inline nlohmann::json tracklet_to_json(const Tracklet& t, double fps) {
  nlohmann::json rec = {{"id", t.id},
                        {"fps", fps},
                        {"frame_start", t.frame_start},
                        {"boxes", track_detail::boxes_to_json(t.boxes)},
                        {"feature_frames", t.feature_frames},
                        {"features", t.features},
                        {"objectness", t.objectness}};
  std::vector<int> interp;
  for (int k = 0; k < t.length(); ++k)
    if (t.is_interpolated(k)) interp.push_back(t.frame_start + k);
  if (!interp.empty()) rec["interpolated"] = interp;
  return rec;
}

inline void write_tracklet_file(std::ostream& out, const TrackletFile& file) {
  nlohmann::json header = {{"format", "docdisc.tracklets"},
                           {"version", kFormatVersion},
                           {"video_id", file.video_id},
                           {"fps", file.fps},
                           {"feature_dim", file.feature_dim}};
  out << header.dump() << '\n';
  for (const auto& t : file.tracklets) out << tracklet_to_json(t, file.fps).dump() << '\n';
}

inline TrackletFile read_tracklet_file(std::istream& in) {
  TrackletFile file;
  bool header_seen = false;
  std::set<int> ids;
  track_detail::for_each_record(in, "tracklet file", [&](const nlohmann::json& rec, int) {
    if (!header_seen) {
      if (rec.value("format", "") != "docdisc.tracklets") throw ParseError("missing docdisc.tracklets header");
      file.video_id = rec.value("video_id", "");
      file.fps = rec.at("fps").get<double>();
      file.feature_dim = rec.at("feature_dim").get<int>();
      if (!(file.fps > 0)) throw ParseError("fps must be positive");
      if (file.feature_dim <= 0) throw ParseError("feature_dim must be positive");
      header_seen = true;
      return;
    }
    Tracklet t;
    t.id = rec.at("id").get<int>();
    t.frame_start = rec.at("frame_start").get<int>();
    t.boxes = track_detail::boxes_from_json(rec.at("boxes"));
    t.feature_frames = rec.at("feature_frames").get<std::vector<int>>();
    t.features = rec.at("features").get<std::vector<std::vector<double>>>();
    t.objectness = rec.at("objectness").get<std::vector<double>>();
    if (rec.contains("interpolated")) {
      t.interpolated.assign(t.boxes.size(), false);
      for (int f : rec["interpolated"].get<std::vector<int>>()) {
        if (f < t.frame_start || f > t.frame_end()) throw ParseError("interpolated frame outside tracklet");
        t.interpolated[f - t.frame_start] = true;
      }
    }
    if (rec.contains("fps") && rec["fps"].get<double>() != file.fps)
      throw ParseError("tracklet fps differs from header fps");
    t.validate(file.feature_dim);
    if (!ids.insert(t.id).second) throw ParseError("duplicate tracklet id " + std::to_string(t.id));
    t.members = {t.id};
    file.tracklets.push_back(std::move(t));
  });
  if (!header_seen) throw ParseError("tracklet file is empty");
  return file;
}

inline void write_ground_truth_file(std::ostream& out, const GroundTruthFile& file) {
  nlohmann::json header = {{"format", "docdisc.groundtruth"},
                           {"version", kFormatVersion},
                           {"video_id", file.video_id},
                           {"fps", file.fps}};
  out << header.dump() << '\n';
  for (const auto& g : file.tracks) {
    nlohmann::json rec = {{"id", g.id},
                          {"class_name", g.class_name},
                          {"frame_start", g.frame_start},
                          {"boxes", track_detail::boxes_to_json(g.boxes)}};
    out << rec.dump() << '\n';
  }
}

inline GroundTruthFile read_ground_truth_file(std::istream& in) {
  GroundTruthFile file;
  bool header_seen = false;
  track_detail::for_each_record(in, "ground-truth file", [&](const nlohmann::json& rec, int) {
    if (!header_seen) {
      if (rec.value("format", "") != "docdisc.groundtruth") throw ParseError("missing docdisc.groundtruth header");
      file.video_id = rec.value("video_id", "");
      file.fps = rec.value("fps", 25.0);
      header_seen = true;
      return;
    }
    GroundTruthTrack g;
    g.id = rec.at("id").get<int>();
    g.class_name = rec.at("class_name").get<std::string>();
    g.frame_start = rec.at("frame_start").get<int>();
    g.boxes = track_detail::boxes_from_json(rec.at("boxes"));
    if (g.boxes.empty()) throw ParseError("ground-truth track without boxes");
    for (const auto& b : g.boxes)
      if (!b.valid()) throw ParseError("ground-truth box with non-positive size");
    file.tracks.push_back(std::move(g));
  });
  if (!header_seen) throw ParseError("ground-truth file is empty");
  return file;
}

}  // namespace docdisc
