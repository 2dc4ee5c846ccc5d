#pragma once

// Initialization and the iterative joint analysis loop: screening,
// classifier updates, classification, keyword grounding, tracklet merging
// and category merging.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "docdisc/emd.hpp"
#include "docdisc/error.hpp"
#include "docdisc/joint_crf.hpp"
#include "docdisc/linear_classifier.hpp"
#include "docdisc/mean_shift.hpp"
#include "docdisc/text_pipeline.hpp"
#include "docdisc/track_model.hpp"

namespace docdisc {

enum class GroundingMode { kThreshold, kSample, kWordCount };

struct EngineConfig {
  double bandwidth = 1.2;
  double confidence_threshold = 0.5;
  // length, mean objectness, objectness stability, classification margin
  std::array<double, 4> confidence_weights{0.2, 0.3, 0.2, 0.3};
  double ground_threshold = 0.5;
  double strong_link_threshold = 0.3;
  double weak_link_threshold = 0.1;
  std::optional<double> emd_merge_threshold;  // unset: emd_merge_scale * median inter-mode distance
  double emd_merge_scale = 0.5;
  int max_iterations = 5;
  double convergence_epsilon = 0.01;
  std::uint64_t seed = 0;

  double eta_epsilon = 0.05;
  double eta_smoothing = 1.0;
  double hard_negative_objectness = 0.4;
  GroundingMode grounding_mode = GroundingMode::kThreshold;
  bool strong_links = true;
  bool weak_links = true;
  bool category_merge = true;

  GraphConfig graph;
  TrainConfig train;

  void validate() const {
    auto bad = [](const std::string& what) { throw ConfigError(what); };
    if (!(bandwidth > 0)) bad("bandwidth must be > 0");
    if (!(ground_threshold > 0 && ground_threshold < 1)) bad("ground_threshold must lie in (0,1)");
    if (!(strong_link_threshold > 0 && strong_link_threshold < 1)) bad("strong_link_threshold must lie in (0,1)");
    if (!(weak_link_threshold > 0 && weak_link_threshold < 1)) bad("weak_link_threshold must lie in (0,1)");
    if (weak_link_threshold > strong_link_threshold) bad("weak_link_threshold must not exceed strong_link_threshold");
    if (emd_merge_threshold && !(*emd_merge_threshold > 0)) bad("emd_merge_threshold must be > 0");
    if (!(emd_merge_scale > 0)) bad("emd_merge_scale must be > 0");
    if (max_iterations < 0) bad("max_iterations must be >= 0");
    if (!(convergence_epsilon > 0 && convergence_epsilon < 1)) bad("convergence_epsilon must lie in (0,1)");
    if (!(eta_epsilon > 0 && eta_epsilon < 1)) bad("eta_epsilon must lie in (0,1)");
    if (!(eta_smoothing > 0)) bad("eta_smoothing must be > 0");
    if (!(graph.lambda_t > 0) || graph.max_gap < 0 || graph.link_floor < 0) bad("invalid link geometry settings");
  }
};

struct IterationReport {
  int iteration = 0;
  int labels_changed = 0;
  double label_change_fraction = 0;
  std::vector<std::pair<int, int>> categories_merged;  // (from, into)
  std::vector<int> categories_pruned;
  std::vector<std::vector<int>> tracklets_merged;      // chains, survivor first
  int screened_in = 0;
  int num_tracklets = 0;
  int num_categories = 0;
  double joint_score = 0;

  bool operator==(const IterationReport&) const = default;
};

// ---------------------------------------------------------------------------
// Initialization.

struct Initialization {
  AnalysisState state;
  KeywordClassTable eta;
  PosteriorTable posterior;  // keyword-vote distribution of each tracklet's cluster
  std::vector<std::vector<double>> modes;
  std::vector<int> cluster_of;  // per input tracklet
};

inline Initialization initialize(const std::vector<Tracklet>& tracklets, const std::vector<Keyword>& keywords,
                                 const CandidateGraph& graph, const EngineConfig& cfg) {
  if (keywords.empty()) throw NoKeywords("initialization needs at least one keyword");
  Initialization init;

  std::set<std::string> distinct;
  for (const auto& k : keywords) distinct.insert(k.lemma);
  std::map<std::string, int> lemma_class;
  int next_id = 1;
  for (const auto& lemma : distinct) {
    lemma_class[lemma] = next_id;
    init.state.categories.lemmas[next_id] = {lemma};
    ++next_id;
  }
  const std::vector<int> class_ids = init.state.categories.ids();
  init.eta = KeywordClassTable::identity_like(lemma_class, class_ids, cfg.eta_epsilon, cfg.eta_smoothing);
  init.posterior.class_ids = class_ids;
  if (tracklets.empty()) return init;

  std::vector<std::vector<double>> points;
  points.reserve(tracklets.size());
  for (const auto& t : tracklets) points.push_back(t.mean_feature());
  MeanShiftResult ms = mean_shift(points, cfg.bandwidth);
  init.modes = ms.modes;
  init.cluster_of = ms.assignment;

  std::vector<std::map<std::string, int>> votes(ms.modes.size());
  for (std::size_t i = 0; i < tracklets.size(); ++i)
    for (int j : graph.keywords_of(tracklets[i].id)) ++votes[ms.assignment[i]][keywords[j].lemma];

  std::vector<int> cluster_label(ms.modes.size(), kBackground);
  std::vector<std::vector<double>> cluster_q(ms.modes.size());
  for (std::size_t c = 0; c < ms.modes.size(); ++c) {
    int best = 0;
    int total = 0;
    std::map<int, int> by_class;
    for (const auto& [lemma, n] : votes[c]) {  // lexicographic order: ties keep the smaller lemma
      total += n;
      by_class[lemma_class.at(lemma)] += n;
      if (n > best) {
        best = n;
        cluster_label[c] = lemma_class.at(lemma);
      }
    }
    std::vector<double> q(class_ids.size());
    for (std::size_t k = 0; k < class_ids.size(); ++k)
      q[k] = (by_class[class_ids[k]] + 1.0) / (total + static_cast<double>(class_ids.size()));
    cluster_q[c] = std::move(q);
  }

  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    init.state.labels[tracklets[i].id] = cluster_label[ms.assignment[i]];
    init.posterior.rows[tracklets[i].id] = cluster_q[ms.assignment[i]];
  }
  return init;
}

// ---------------------------------------------------------------------------
// Screening.

struct ScreenResult {
  std::map<int, double> confidence;
  std::set<int> confident;
};

struct ObjectnessStats {
  double mean = 0;
  double stddev = 0;
};

inline ObjectnessStats objectness_stats(const Tracklet& t) {
  double sum = 0;
  int n = 0;
  for (int k = 0; k < t.length(); ++k)
    if (!t.is_interpolated(k)) {
      sum += t.objectness[k];
      ++n;
    }
  ObjectnessStats s;
  if (n == 0) return s;
  s.mean = sum / n;
  double var = 0;
  for (int k = 0; k < t.length(); ++k)
    if (!t.is_interpolated(k)) var += (t.objectness[k] - s.mean) * (t.objectness[k] - s.mean);
  s.stddev = std::sqrt(var / n);
  return s;
}

inline double classification_margin(const std::vector<double>& q) {
  if (q.size() < 2) return 1.0;
  double top1 = -1;
  double top2 = -1;
  for (double v : q) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

/// confidence = w . (min-max normalized length, mean objectness,
/// 1 - stddev objectness, top1 - top2 posterior margin).
inline ScreenResult screen(const std::vector<Tracklet>& tracklets, const PosteriorTable& posterior,
                           const EngineConfig& cfg) {
  ScreenResult out;
  if (tracklets.empty()) return out;
  int min_len = tracklets.front().length();
  int max_len = min_len;
  for (const auto& t : tracklets) {
    min_len = std::min(min_len, t.length());
    max_len = std::max(max_len, t.length());
  }
  const auto& w = cfg.confidence_weights;
  for (const auto& t : tracklets) {
    auto row = posterior.rows.find(t.id);
    if (row == posterior.rows.end())
      throw InconsistentState("no posterior for tracklet " + std::to_string(t.id));
    const double len = max_len > min_len ? static_cast<double>(t.length() - min_len) / (max_len - min_len) : 1.0;
    const ObjectnessStats obj = objectness_stats(t);
    const double conf =
        w[0] * len + w[1] * obj.mean + w[2] * (1.0 - obj.stddev) + w[3] * classification_margin(row->second);
    out.confidence[t.id] = conf;
    if (conf >= cfg.confidence_threshold) out.confident.insert(t.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grounding.

inline std::set<IdPair> word_count_groundings(const std::map<int, int>& labels, const CandidateGraph& graph,
                                              const std::vector<Keyword>& keywords) {
  std::set<IdPair> out;
  for (const auto& [id, label] : labels) {
    if (label == kBackground) continue;
    const std::vector<int> js = graph.keywords_of(id);
    std::map<std::string, int> counts;
    for (int j : js) ++counts[keywords[j].lemma];
    const std::string* best = nullptr;
    int best_n = 0;
    for (const auto& [lemma, n] : counts)
      if (n > best_n) {
        best_n = n;
        best = &lemma;
      }
    if (!best) continue;
    for (int j : js)
      if (keywords[j].lemma == *best) out.insert({id, j});
  }
  return out;
}

/// Grounds keywords to positively labelled tracklets, then (when `confident`
/// is given) re-estimates eta from the groundings of confident tracklets.
inline void ground_keywords(AnalysisState& state, KeywordClassTable& eta, const CandidateGraph& graph,
                            const std::vector<Keyword>& keywords, const std::set<int>* confident,
                            const EngineConfig& cfg, std::mt19937_64& rng) {
  state.groundings.clear();
  if (cfg.grounding_mode == GroundingMode::kWordCount) {
    state.groundings = word_count_groundings(state.labels, graph, keywords);
  } else {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& [i, j] : graph.keyword_pairs) {
      auto it = state.labels.find(i);
      if (it == state.labels.end() || it->second == kBackground) continue;
      const double p = eta.probability(keywords[j].lemma, it->second);
      const bool grounded = cfg.grounding_mode == GroundingMode::kThreshold ? p >= cfg.ground_threshold
                                                                            : unit(rng) < p;
      if (grounded) state.groundings.insert({i, j});
    }
  }
  if (!confident) return;

  std::set<std::string> lemmas;
  for (const auto& k : keywords) lemmas.insert(k.lemma);
  std::map<std::string, std::map<int, int>> counts;
  for (const auto& [i, j] : state.groundings)
    if (confident->count(i)) ++counts[keywords[j].lemma][state.labels.at(i)];
  eta.reestimate(lemmas, counts);
}

// ---------------------------------------------------------------------------
// Tracklet merging.

/// Joins time-ordered tracklets into one. Frames covered by an earlier
/// member win; gaps get linearly interpolated boxes flagged as interpolated
/// and carry no features.
inline Tracklet merge_chain(const std::vector<const Tracklet*>& chain) {
  Tracklet out;
  const Tracklet& head = *chain.front();
  out.id = head.id;
  out.frame_start = head.frame_start;
  int end = head.frame_start - 1;
  for (const Tracklet* t : chain) {
    if (t->frame_start > end + 1 && !out.boxes.empty()) {
      const Box a = out.boxes.back();
      const double oa = out.objectness.back();
      const Box b = t->boxes.front();
      const double ob = t->objectness.front();
      const int steps = t->frame_start - end;
      for (int f = end + 1; f < t->frame_start; ++f) {
        const double u = static_cast<double>(f - end) / steps;
        out.boxes.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y), a.w + u * (b.w - a.w), a.h + u * (b.h - a.h)});
        out.objectness.push_back(oa + u * (ob - oa));
        out.interpolated.push_back(true);
      }
    }
    for (int k = 0; k < t->length(); ++k) {
      const int f = t->frame_start + k;
      if (f <= end) continue;
      out.boxes.push_back(t->boxes[k]);
      out.objectness.push_back(t->objectness[k]);
      out.interpolated.push_back(t->is_interpolated(k));
    }
    for (std::size_t k = 0; k < t->features.size(); ++k) {
      if (t->feature_frames[k] <= end) continue;
      out.feature_frames.push_back(t->feature_frames[k]);
      out.features.push_back(t->features[k]);
    }
    for (int m : t->members) out.members.push_back(m);
    end = std::max(end, t->frame_end());
  }
  if (std::none_of(out.interpolated.begin(), out.interpolated.end(), [](bool b) { return b; }))
    out.interpolated.clear();
  return out;
}

struct MergeResult {
  std::vector<Tracklet> tracklets;          // sorted by id
  std::vector<std::vector<int>> chains;     // merged chains only, survivor first
  std::map<int, int> survivor_of;           // every input id -> output id
};

/// Greedy linking in descending consistency: a link is accepted when both
/// ends are still free (one successor, one predecessor per tracklet), so
/// accepted links form disjoint time-ordered chains.
inline MergeResult merge_tracklets(const std::map<int, int>& labels, const std::vector<Tracklet>& tracklets,
                                   const CandidateGraph& graph, const EngineConfig& cfg) {
  std::map<int, const Tracklet*> by_id;
  for (const auto& t : tracklets) by_id[t.id] = &t;

  struct Link {
    double s;
    int early;
    int late;
  };
  std::vector<Link> strong;
  if (cfg.strong_links) {
    for (const auto& [pair, s] : graph.link_pairs) {
      if (s < cfg.strong_link_threshold) continue;
      if (labels.at(pair.first) != labels.at(pair.second)) continue;
      const Tracklet& a = *by_id.at(pair.first);
      const Tracklet& b = *by_id.at(pair.second);
      // Same orientation rule as pair_consistency.
      const bool a_first = a.frame_end() <= b.frame_start;
      strong.push_back({s, a_first ? a.id : b.id, a_first ? b.id : a.id});
    }
  }
  std::stable_sort(strong.begin(), strong.end(), [](const Link& x, const Link& y) { return x.s > y.s; });

  std::map<int, int> next;
  std::map<int, int> prev;
  for (const auto& l : strong) {
    if (next.count(l.early) || prev.count(l.late)) continue;
    next[l.early] = l.late;
    prev[l.late] = l.early;
  }

  MergeResult out;
  std::set<int> placed;
  for (const auto& t : tracklets) {
    if (prev.count(t.id)) continue;  // not a chain head
    std::vector<const Tracklet*> chain{&t};
    int cur = t.id;
    while (next.count(cur)) {
      cur = next.at(cur);
      chain.push_back(by_id.at(cur));
      if (chain.size() > tracklets.size()) throw InconsistentState("cycle in tracklet links");
    }
    for (const Tracklet* m : chain) {
      out.survivor_of[m->id] = t.id;
      placed.insert(m->id);
    }
    if (chain.size() == 1) {
      out.tracklets.push_back(t);
    } else {
      out.tracklets.push_back(merge_chain(chain));
      std::vector<int> ids;
      for (const Tracklet* m : chain) ids.push_back(m->id);
      out.chains.push_back(std::move(ids));
    }
  }
  // Every tracklet is in exactly one chain; anything unplaced means a cycle.
  if (placed.size() != tracklets.size()) throw InconsistentState("cycle in tracklet links");
  std::sort(out.tracklets.begin(), out.tracklets.end(), [](const Tracklet& a, const Tracklet& b) { return a.id < b.id; });
  return out;
}

/// Same-label candidate pairs recorded as links (r = 1): weak links when
/// enabled, otherwise only strong pairs that were left unmerged.
inline std::set<IdPair> record_links(const std::map<int, int>& labels, const CandidateGraph& graph,
                                     const EngineConfig& cfg) {
  std::set<IdPair> links;
  if (!cfg.weak_links && !cfg.strong_links) return links;
  const double floor = cfg.weak_links ? cfg.weak_link_threshold : cfg.strong_link_threshold;
  for (const auto& [pair, s] : graph.link_pairs)
    if (s >= floor && labels.at(pair.first) == labels.at(pair.second)) links.insert(pair);
  return links;
}

// ---------------------------------------------------------------------------
// Category merging.

inline std::size_t nearest_mode(const std::vector<double>& x, const std::vector<std::vector<double>>& modes) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const double d = euclidean(x, modes[m]);
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

inline double median_mode_distance(const std::vector<std::vector<double>>& modes) {
  std::vector<double> d;
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = a + 1; b < modes.size(); ++b) d.push_back(euclidean(modes[a], modes[b]));
  if (d.empty()) return 0.0;
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

struct CategoryMerge {
  std::vector<std::pair<int, int>> merged;  // (from, into)
  std::map<std::pair<int, int>, double> distances;
};

/// Signature of a class: its members' mean features binned to the nearest
/// mode, each weighted by its frame count so short clutter counts for little. Classes whose pairwise EMD (Euclidean mode-to-mode
/// ground cost) is below `threshold` are merged; the smallest id survives.
inline CategoryMerge merge_categories(AnalysisState& state, KeywordClassTable& eta,
                                      const std::vector<Tracklet>& tracklets,
                                      const std::vector<std::vector<double>>& modes, double threshold) {
  CategoryMerge out;
  if (modes.empty()) return out;
  std::map<int, std::vector<double>> hist;
  for (const auto& t : tracklets) {
    const int z = state.labels.at(t.id);
    if (z == kBackground) continue;
    auto& h = hist[z];
    if (h.empty()) h.assign(modes.size(), 0.0);
    h[nearest_mode(t.mean_feature(), modes)] += static_cast<double>(t.length());
  }
  if (hist.size() < 2) return out;
  for (auto& [z, h] : hist) {
    const double total = std::accumulate(h.begin(), h.end(), 0.0);
    for (double& v : h) v /= total;
  }
  CostMatrix cost(modes.size(), std::vector<double>(modes.size()));
  for (std::size_t a = 0; a < modes.size(); ++a)
    for (std::size_t b = 0; b < modes.size(); ++b) cost[a][b] = euclidean(modes[a], modes[b]);

  std::map<int, int> parent;
  for (const auto& [z, _] : hist) parent[z] = z;
  std::function<int(int)> find = [&](int z) { return parent[z] == z ? z : parent[z] = find(parent[z]); };
  for (auto a = hist.begin(); a != hist.end(); ++a) {
    for (auto b = std::next(a); b != hist.end(); ++b) {
      const double d = emd(a->second, b->second, cost);
      out.distances[{a->first, b->first}] = d;
      if (d < threshold) {
        const int ra = find(a->first);
        const int rb = find(b->first);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  for (const auto& [z, _] : hist) {
    const int root = find(z);
    if (root == z) continue;
    out.merged.push_back({z, root});
  }
  for (const auto& [from, into] : out.merged) {
    for (auto& [id, label] : state.labels)
      if (label == from) label = into;
    auto& dst = state.categories.lemmas[into];
    for (const auto& l : state.categories.lemmas[from]) dst.insert(l);
    state.categories.lemmas.erase(from);
    eta.merge_class(from, into);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The loop.

struct EngineResult {
  AnalysisState state;
  std::vector<Tracklet> tracklets;
  std::optional<ClassifierModel> model;
  KeywordClassTable eta;
  PosteriorTable posterior;
  std::map<int, double> confidence;
  std::vector<IterationReport> reports;
  CandidateGraph graph;
  std::vector<std::vector<double>> modes;
  double emd_threshold = 0;
};

/// Called after initialization (iteration 0) and after every iteration.
using IterationObserver = std::function<void(const IterationReport&, const EngineResult&)>;

namespace engine_detail {

inline std::vector<Keyword> overlapping(const CandidateGraph& graph, const std::vector<Keyword>& keywords, int id) {
  std::vector<Keyword> out;
  for (int j : graph.keywords_of(id)) out.push_back(keywords[j]);
  return out;
}

// Posterior over the current categories: classifier columns whose class has
// been merged away are folded into the survivor.
inline PosteriorTable compute_posterior(const std::vector<Tracklet>& tracklets, const ClassifierModel& model,
                                        const KeywordClassTable& eta, const CandidateGraph& graph,
                                        const std::vector<Keyword>& keywords, const std::map<int, int>& remap,
                                        const std::set<int>& dropped = {}) {
  auto resolve = [&](int z) {
    for (auto it = remap.find(z); it != remap.end(); it = remap.find(z)) z = it->second;
    return z;
  };
  PosteriorTable table;
  std::set<int> cols;
  for (int z : model.class_ids)
    if (!dropped.count(resolve(z))) cols.insert(resolve(z));
  table.class_ids.assign(cols.begin(), cols.end());
  for (const auto& t : tracklets) {
    const std::vector<double> q = posterior(t, model, eta, overlapping(graph, keywords, t.id));
    std::vector<double> row(table.class_ids.size(), 0.0);
    double kept = 0;
    for (int c = 0; c < model.num_classes(); ++c) {
      const int z = resolve(model.class_ids[c]);
      if (dropped.count(z)) continue;
      row[std::lower_bound(table.class_ids.begin(), table.class_ids.end(), z) - table.class_ids.begin()] += q[c];
      kept += q[c];
    }
    // Conditioning on the surviving classes.
    if (kept > 0)
      for (double& v : row) v /= kept;
    table.rows[t.id] = std::move(row);
  }
  return table;
}

inline int argmax_class(const std::vector<int>& class_ids, const std::vector<double>& q) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < q.size(); ++c)
    if (q[c] > q[best]) best = c;  // strict: ties keep the smaller class id
  return class_ids[best];
}

}  // namespace engine_detail

/// Background samples are confident background tracklets plus every
/// tracklet whose mean objectness is below the hard-negative cutoff.
inline std::vector<Sample> training_samples(const std::vector<Tracklet>& tracklets, const AnalysisState& state,
                                            const std::set<int>& confident, const EngineConfig& cfg) {
  std::vector<Sample> samples;
  for (const auto& t : tracklets) {
    int label;
    if (objectness_stats(t).mean < cfg.hard_negative_objectness) {
      label = kBackground;
    } else if (confident.count(t.id)) {
      label = state.labels.at(t.id);
    } else {
      continue;
    }
    for (const auto& f : t.features) samples.push_back({f, label});
  }
  return samples;
}

inline EngineResult run(std::vector<Tracklet> tracklets, const std::vector<Keyword>& keywords, double fps,
                        const EngineConfig& cfg, const IterationObserver& observer = {}) {
  cfg.validate();
  EngineResult r;
  if (tracklets.empty()) return r;
  std::sort(tracklets.begin(), tracklets.end(), [](const Tracklet& a, const Tracklet& b) { return a.id < b.id; });
  for (auto& t : tracklets)
    if (t.members.empty()) t.members = {t.id};

  r.graph = build_candidate_graph(tracklets, keywords, fps, cfg.graph);
  Initialization init = initialize(tracklets, keywords, r.graph, cfg);
  r.state = std::move(init.state);
  r.eta = std::move(init.eta);
  r.posterior = std::move(init.posterior);
  r.modes = std::move(init.modes);
  r.emd_threshold = cfg.emd_merge_threshold ? *cfg.emd_merge_threshold
                                            : cfg.emd_merge_scale * median_mode_distance(r.modes);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  ground_keywords(r.state, r.eta, r.graph, keywords, nullptr, cfg, rng);
  r.tracklets = std::move(tracklets);
  r.confidence = screen(r.tracklets, r.posterior, cfg).confidence;

  IterationReport rep0;
  rep0.num_tracklets = static_cast<int>(r.tracklets.size());
  rep0.num_categories = static_cast<int>(r.state.categories.size());
  rep0.joint_score = joint_score(r.state, r.tracklets, keywords, r.graph, nullptr, r.eta, cfg.graph);
  r.reports.push_back(rep0);
  if (observer) observer(rep0, r);

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    IterationReport rep;
    rep.iteration = it;

    // 1. screen samples, 2. update classifiers
    const ScreenResult scr = screen(r.tracklets, r.posterior, cfg);
    rep.screened_in = static_cast<int>(scr.confident.size());
    const std::vector<Sample> samples = training_samples(r.tracklets, r.state, scr.confident, cfg);
    std::set<int> present;
    for (const auto& s : samples) present.insert(s.label);
    if (!present.count(kBackground)) throw EmptyClass("background class has no training samples");
    // Same shuffle seed every iteration: an unchanged training set yields an
    // unchanged classifier, so the loop can reach a fixed point.
    TrainConfig tc = cfg.train;
    tc.seed = cfg.train.seed + cfg.seed * 1000003ULL;
    r.model = train(samples, std::vector<int>(present.begin(), present.end()), tc);

    // 3. classify tracklets
    r.posterior = engine_detail::compute_posterior(r.tracklets, *r.model, r.eta, r.graph, keywords, {});
    std::map<int, int> labels;
    for (const auto& t : r.tracklets)
      labels[t.id] = engine_detail::argmax_class(r.posterior.class_ids, r.posterior.rows.at(t.id));
    const std::map<int, int> previous = std::exchange(r.state.labels, std::move(labels));

    // 4. ground keywords
    ground_keywords(r.state, r.eta, r.graph, keywords, &scr.confident, cfg, rng);

    // 5. merge tracklets
    MergeResult mr = merge_tracklets(r.state.labels, r.tracklets, r.graph, cfg);
    rep.tracklets_merged = mr.chains;
    if (!mr.chains.empty()) {
      std::map<int, int> labels2;
      for (const auto& [id, z] : r.state.labels) labels2[mr.survivor_of.at(id)] = z;
      std::set<IdPair> g2;
      for (const auto& [i, j] : r.state.groundings) g2.insert({mr.survivor_of.at(i), j});
      r.state.labels = std::move(labels2);
      r.state.groundings = std::move(g2);
      r.tracklets = std::move(mr.tracklets);
      r.graph = build_candidate_graph(r.tracklets, keywords, fps, cfg.graph);
    }

    // 6. merge categories
    std::map<int, int> remap;
    if (cfg.category_merge) {
      const CategoryMerge cm = merge_categories(r.state, r.eta, r.tracklets, r.modes, r.emd_threshold);
      rep.categories_merged = cm.merged;
      for (const auto& [from, into] : cm.merged) remap[from] = into;
    }
    // Final labels follow the posterior over the surviving classes. Pruning a
    // class that no tracklet picks can move others, so repeat until stable.
    std::set<int> dropped;
    while (true) {
      r.posterior = engine_detail::compute_posterior(r.tracklets, *r.model, r.eta, r.graph, keywords, remap, dropped);
      std::set<int> used;
      for (const auto& t : r.tracklets) {
        const int z = engine_detail::argmax_class(r.posterior.class_ids, r.posterior.rows.at(t.id));
        r.state.labels[t.id] = z;
        used.insert(z);
      }
      bool pruned = false;
      for (int z : r.state.categories.ids()) {
        if (z == kBackground || used.count(z)) continue;
        rep.categories_pruned.push_back(z);
        r.state.categories.lemmas.erase(z);
        r.eta.remove_class(z);
        dropped.insert(z);
        pruned = true;
      }
      if (!pruned) break;
    }
    r.confidence = screen(r.tracklets, r.posterior, cfg).confidence;

    // A change is counted against the previous iteration's label carried
    // through both kinds of merge.
    for (const auto& t : r.tracklets) {
      int before = previous.at(t.id);
      for (auto f = remap.find(before); f != remap.end(); f = remap.find(before)) before = f->second;
      if (before != r.state.labels.at(t.id)) ++rep.labels_changed;
    }
    rep.label_change_fraction = static_cast<double>(rep.labels_changed) / static_cast<double>(r.tracklets.size());
    r.state.links = record_links(r.state.labels, r.graph, cfg);

    rep.num_tracklets = static_cast<int>(r.tracklets.size());
    rep.num_categories = static_cast<int>(r.state.categories.size());
    // The classifier predates category merging; score appearance under the
    // surviving class by folding merged-away rows into it.
    ClassifierModel scoring = *r.model;
    for (int c = 0; c < scoring.num_classes(); ++c)
      for (auto f = remap.find(scoring.class_ids[c]); f != remap.end(); f = remap.find(scoring.class_ids[c]))
        scoring.class_ids[c] = f->second;
    rep.joint_score = joint_score(r.state, r.tracklets, keywords, r.graph, &scoring, r.eta, cfg.graph);
    r.reports.push_back(rep);
    if (observer) observer(rep, r);
    if (rep.label_change_fraction < cfg.convergence_epsilon) break;
  }
  return r;
}

}  // namespace docdisc
