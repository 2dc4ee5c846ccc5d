#pragma once

// Appearance, keyword-tracklet and geometric potentials, the per-tracklet
// variational posterior, and the unnormalized joint log-density.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/linear_classifier.hpp"
#include "docdisc/text_pipeline.hpp"
#include "docdisc/track_model.hpp"

namespace docdisc {

inline constexpr int kBackground = 0;

/// Discovered categories: class id -> the keyword lemmas it stands for.
/// Background (0) is always present with an empty lemma set.
struct CategorySet {
  std::map<int, std::set<std::string>> lemmas{{kBackground, {}}};

  bool contains(int id) const { return lemmas.count(id) > 0; }
  std::vector<int> ids() const {
    std::vector<int> out;
    for (const auto& [id, _] : lemmas) out.push_back(id);
    return out;
  }
  std::size_t size() const { return lemmas.size(); }
};

/// Conditional probability table p(class | keyword lemma).
class KeywordClassTable {
 public:
  KeywordClassTable() = default;
  explicit KeywordClassTable(std::vector<int> class_ids, double smoothing = 1.0)
      : class_ids_(std::move(class_ids)), smoothing_(smoothing) {
    std::sort(class_ids_.begin(), class_ids_.end());
  }

  /// Each lemma puts 1 - epsilon on its own class and spreads epsilon evenly
  /// over the others.
  static KeywordClassTable identity_like(const std::map<std::string, int>& lemma_class,
                                         std::vector<int> class_ids, double epsilon, double smoothing = 1.0) {
    KeywordClassTable t(std::move(class_ids), smoothing);
    const std::size_t n = t.class_ids_.size();
    for (const auto& [lemma, cls] : lemma_class) {
      std::vector<double> row(n, n > 1 ? epsilon / static_cast<double>(n - 1) : 0.0);
      row[t.column(cls)] = n > 1 ? 1.0 - epsilon : 1.0;
      t.rows_[lemma] = std::move(row);
    }
    return t;
  }

  const std::vector<int>& class_ids() const { return class_ids_; }
  const std::map<std::string, std::vector<double>>& rows() const { return rows_; }
  double smoothing() const { return smoothing_; }

  /// Unseen lemmas get the uniform row; classes that are not columns get 0.
  double probability(const std::string& lemma, int class_id) const {
    auto col = std::lower_bound(class_ids_.begin(), class_ids_.end(), class_id);
    if (col == class_ids_.end() || *col != class_id) return 0.0;
    auto it = rows_.find(lemma);
    if (it == rows_.end()) return 1.0 / static_cast<double>(class_ids_.size());
    return it->second[col - class_ids_.begin()];
  }

  std::vector<double> row(const std::string& lemma) const {
    auto it = rows_.find(lemma);
    if (it != rows_.end()) return it->second;
    return std::vector<double>(class_ids_.size(), 1.0 / static_cast<double>(class_ids_.size()));
  }

  void set_row(const std::string& lemma, std::vector<double> row) {
    if (row.size() != class_ids_.size()) throw DimensionMismatch("eta row has wrong length");
    rows_[lemma] = std::move(row);
  }

  /// Laplace-smoothed re-estimate of every listed lemma from
  /// (lemma, class) counts: (n + s) / (N + s |C|).
  void reestimate(const std::set<std::string>& lemmas,
                  const std::map<std::string, std::map<int, int>>& counts) {
    const double k = static_cast<double>(class_ids_.size());
    for (const auto& lemma : lemmas) {
      std::vector<double> row(class_ids_.size(), 0.0);
      double total = 0;
      auto it = counts.find(lemma);
      if (it != counts.end())
        for (const auto& [cls, n] : it->second) total += n;
      for (std::size_t c = 0; c < class_ids_.size(); ++c) {
        double n = 0;
        if (it != counts.end()) {
          auto jt = it->second.find(class_ids_[c]);
          if (jt != it->second.end()) n = jt->second;
        }
        row[c] = (n + smoothing_) / (total + smoothing_ * k);
      }
      rows_[lemma] = std::move(row);
    }
  }

  /// Moves the mass of column `from` into column `into` and drops `from`.
  void merge_class(int from, int into) {
    const std::size_t f = column(from);
    const std::size_t t = column(into);
    for (auto& [lemma, row] : rows_) {
      row[t] += row[f];
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(f));
    }
    class_ids_.erase(class_ids_.begin() + static_cast<std::ptrdiff_t>(f));
  }

  /// Drops column `id` and renormalizes each row over the remaining classes.
  void remove_class(int id) {
    const std::size_t f = column(id);
    for (auto& [lemma, row] : rows_) {
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(f));
      double sum = 0;
      for (double v : row) sum += v;
      if (sum > 0) {
        for (double& v : row) v /= sum;
      } else {
        for (double& v : row) v = 1.0 / static_cast<double>(row.size());
      }
    }
    class_ids_.erase(class_ids_.begin() + static_cast<std::ptrdiff_t>(f));
  }

  /// Text dump, one "lemma<TAB>class_id<TAB>probability" record per cell.
  void dump(std::ostream& out) const {
    out << "# docdisc.eta " << kFormatVersion << '\n';
    char buf[64];
    for (const auto& [lemma, row] : rows_) {
      for (std::size_t c = 0; c < class_ids_.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        out << lemma << '\t' << class_ids_[c] << '\t' << buf << '\n';
      }
    }
  }

 private:
  std::size_t column(int class_id) const {
    auto it = std::lower_bound(class_ids_.begin(), class_ids_.end(), class_id);
    if (it == class_ids_.end() || *it != class_id)
      throw InconsistentState("class " + std::to_string(class_id) + " is not an eta column");
    return static_cast<std::size_t>(it - class_ids_.begin());
  }

  std::vector<int> class_ids_;
  std::map<std::string, std::vector<double>> rows_;
  double smoothing_ = 1.0;
};

/// q_i over `class_ids`, one row per tracklet id.
struct PosteriorTable {
  std::vector<int> class_ids;
  std::map<int, std::vector<double>> rows;

  double probability(int tracklet_id, int class_id) const {
    auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end()) return 0.0;
    return rows.at(tracklet_id)[it - class_ids.begin()];
  }
};

struct AnalysisState {
  std::map<int, int> labels;       // tracklet id -> class id
  std::set<IdPair> groundings;     // (tracklet id, keyword index) with a_ij = 1
  std::set<IdPair> links;          // (smaller id, larger id) with r = 1
  CategorySet categories;
};

/// Per-class appearance potentials sum_t log p(z | v_t), in model.class_ids order.
inline std::vector<double> appearance_potentials(const Tracklet& tracklet, const ClassifierModel& model) {
  std::vector<double> acc(model.num_classes(), 0.0);
  for (const auto& f : tracklet.features) {
    const std::vector<double> lp = log_predict(model, f);
    for (int c = 0; c < model.num_classes(); ++c) acc[c] += lp[c];
  }
  return acc;
}

inline double appearance_potential(const Tracklet& tracklet, int class_id, const ClassifierModel& model) {
  const auto idx = model.index_of(class_id);
  if (!idx) return -std::numeric_limits<double>::infinity();
  return appearance_potentials(tracklet, model)[*idx];
}

inline double keyword_potential(int class_id, const Keyword& keyword, const KeywordClassTable& eta) {
  return std::log(eta.probability(keyword.lemma, class_id));
}

inline double geometric_potential(bool linked, int z1, int z2, const GeometricFeature& u1,
                                  const GeometricFeature& u2, const GraphConfig& cfg) {
  if (!linked || z1 != z2) return 0.0;
  return geometric_consistency(u1, u2, cfg);
}

namespace crf_detail {

inline std::vector<double> normalize_log(std::vector<double> logq) {
  const double m = *std::max_element(logq.begin(), logq.end());
  if (!std::isfinite(m)) {
    std::fill(logq.begin(), logq.end(), 1.0 / static_cast<double>(logq.size()));
    return logq;
  }
  double sum = 0;
  for (double& v : logq) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : logq) v /= sum;
  return logq;
}

}  // namespace crf_detail

/// q(z) proportional to exp(appearance(z) + sum_j log p(z | w_j)) over the
/// classifier's classes, normalized in log space.
inline std::vector<double> posterior(const Tracklet& tracklet, const ClassifierModel& model,
                                     const KeywordClassTable& eta, const std::vector<Keyword>& overlapping) {
  std::vector<double> logq = appearance_potentials(tracklet, model);
  for (const auto& kw : overlapping)
    for (int c = 0; c < model.num_classes(); ++c) logq[c] += keyword_potential(model.class_ids[c], kw, eta);
  return crf_detail::normalize_log(std::move(logq));
}

/// Unnormalized log-density of (z, a, r). The keyword term over G uses the
/// grounding form a log p(z|w) + (1 - a) log(1 - p(z|w)), under which
/// p(a = 1 | z) = p(z | w). Without a model the appearance term is omitted.
inline double joint_score(const AnalysisState& state, const std::vector<Tracklet>& tracklets,
                          const std::vector<Keyword>& keywords, const CandidateGraph& graph,
                          const ClassifierModel* model, const KeywordClassTable& eta, const GraphConfig& cfg) {
  for (const auto& g : state.groundings)
    if (!graph.has_keyword_pair(g.first, g.second))
      throw InconsistentState("grounding (" + std::to_string(g.first) + "," + std::to_string(g.second) +
                              ") is outside G");
  for (const auto& l : state.links)
    if (!graph.has_link_pair(l.first, l.second))
      throw InconsistentState("link (" + std::to_string(l.first) + "," + std::to_string(l.second) +
                              ") is outside R");

  std::map<int, const Tracklet*> by_id;
  for (const auto& t : tracklets) {
    by_id[t.id] = &t;
    if (!state.labels.count(t.id)) throw InconsistentState("tracklet " + std::to_string(t.id) + " has no label");
  }
  auto label_of = [&](int id) {
    auto it = state.labels.find(id);
    if (it == state.labels.end()) throw InconsistentState("tracklet " + std::to_string(id) + " has no label");
    return it->second;
  };

  double score = 0;
  if (model)
    for (const auto& t : tracklets) score += appearance_potential(t, label_of(t.id), *model);

  for (const auto& [i, j] : graph.keyword_pairs) {
    if (!by_id.count(i)) continue;
    const double p = eta.probability(keywords.at(j).lemma, label_of(i));
    score += state.groundings.count({i, j}) ? std::log(p) : std::log1p(-p);
  }

  for (const auto& [pair, s] : graph.link_pairs) {
    if (!state.links.count(pair)) continue;
    const Tracklet& a = *by_id.at(pair.first);
    const Tracklet& b = *by_id.at(pair.second);
    const bool a_first = a.frame_end() <= b.frame_start;
    const Tracklet& early = a_first ? a : b;
    const Tracklet& late = a_first ? b : a;
    score += geometric_potential(true, label_of(early.id), label_of(late.id), early.geometry(), late.geometry(), cfg);
  }
  return score;
}

}  // namespace docdisc
