#pragma once

// Independent brute-force references used by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "docdisc/joint_crf.hpp"
#include "docdisc/linear_classifier.hpp"
#include "docdisc/track_model.hpp"

namespace oracle {

// Integer-coordinate tube: one box per frame, all frames counted.
struct IntTube {
  int frame_start = 0;
  std::vector<std::array<int, 4>> boxes;  // x, y, w, h
};

// Counts unit voxels (x, y, frame) covered by each tube.
inline double voxel_iou(const IntTube& a, const IntTube& b) {
  std::set<std::tuple<int, int, int>> va;
  std::set<std::tuple<int, int, int>> vb;
  auto fill = [](const IntTube& t, std::set<std::tuple<int, int, int>>& out) {
    for (std::size_t k = 0; k < t.boxes.size(); ++k) {
      const auto& b = t.boxes[k];
      for (int x = b[0]; x < b[0] + b[2]; ++x)
        for (int y = b[1]; y < b[1] + b[3]; ++y) out.insert({x, y, t.frame_start + static_cast<int>(k)});
    }
  };
  fill(a, va);
  fill(b, vb);
  std::size_t inter = 0;
  for (const auto& v : va) inter += vb.count(v);
  const std::size_t uni = va.size() + vb.size() - inter;
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline docdisc::Tracklet to_tracklet(const IntTube& t, int id) {
  docdisc::Tracklet out;
  out.id = id;
  out.frame_start = t.frame_start;
  for (const auto& b : t.boxes) {
    out.boxes.push_back({static_cast<double>(b[0]), static_cast<double>(b[1]), static_cast<double>(b[2]),
                         static_cast<double>(b[3])});
    out.objectness.push_back(0.5);
  }
  return out;
}

// Minimum transport cost by enumerating every spanning-tree basis of the
// bipartite transportation graph. Each basis fixes a unique flow (peel
// leaves); the feasible ones are exactly the vertices of the polytope.
inline double transport_lp(const std::vector<double>& p, const std::vector<double>& q,
                           const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(p.size());
  const int n = static_cast<int>(q.size());
  const int nodes = m + n;
  const int need = nodes - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> chosen;

  auto evaluate = [&]() {
    std::vector<double> mass(nodes);
    for (int i = 0; i < m; ++i) mass[i] = p[i];
    for (int j = 0; j < n; ++j) mass[m + j] = q[j];
    std::vector<int> degree(nodes, 0);
    for (int cell : chosen) {
      ++degree[cell / n];
      ++degree[m + cell % n];
    }
    std::vector<bool> used(chosen.size(), false);
    double total = 0;
    for (int step = 0; step < need; ++step) {
      int pick = -1;
      int leaf = -1;
      for (std::size_t e = 0; e < chosen.size() && pick < 0; ++e) {
        if (used[e]) continue;
        const int r = chosen[e] / n;
        const int c = m + chosen[e] % n;
        if (degree[r] == 1) {
          pick = static_cast<int>(e);
          leaf = r;
        } else if (degree[c] == 1) {
          pick = static_cast<int>(e);
          leaf = c;
        }
      }
      const int r = chosen[pick] / n;
      const int c = m + chosen[pick] % n;
      const int other = leaf == r ? c : r;
      const double f = mass[leaf];
      if (f < -1e-12) return;
      mass[leaf] = 0;
      mass[other] -= f;
      used[pick] = true;
      --degree[r];
      --degree[c];
      total += f * cost[chosen[pick] / n][chosen[pick] % n];
    }
    best = std::min(best, total);
  };

  std::function<void(int, std::vector<int>)> search = [&](int cell, std::vector<int> parent) {
    if (static_cast<int>(chosen.size()) == need) {
      evaluate();
      return;
    }
    if (cell == m * n || m * n - cell < need - static_cast<int>(chosen.size())) return;
    std::function<int(std::vector<int>&, int)> find = [&](std::vector<int>& par, int x) {
      while (par[x] != x) x = par[x] = par[par[x]];
      return x;
    };
    const int a = find(parent, cell / n);
    const int b = find(parent, m + cell % n);
    if (a != b) {
      std::vector<int> next = parent;
      next[a] = b;
      chosen.push_back(cell);
      search(cell + 1, next);
      chosen.pop_back();
    }
    search(cell + 1, std::move(parent));
  };
  std::vector<int> parent(nodes);
  for (int v = 0; v < nodes; ++v) parent[v] = v;
  search(0, parent);
  return best;
}

// Probability-space softmax, written independently of the library.
inline std::vector<double> softmax_probs(const docdisc::ClassifierModel& model, const std::vector<double>& v) {
  std::vector<double> z(model.num_classes());
  double mx = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.num_classes(); ++c) {
    double s = model.bias[c];
    for (int d = 0; d < model.dim; ++d) s += model.weights[c * model.dim + d] * v[d];
    z[c] = s;
    mx = std::max(mx, s);
  }
  double sum = 0;
  for (double& x : z) sum += (x = std::exp(x - mx));
  for (double& x : z) x /= sum;
  return z;
}

// q(z) for one tracklet by enumerating every (z, a) configuration of the
// joint model restricted to that tracklet and its overlapping keywords, then
// marginalizing the groundings.
inline std::vector<double> posterior_by_enumeration(const docdisc::Tracklet& t, const docdisc::ClassifierModel& model,
                                                    const docdisc::KeywordClassTable& eta,
                                                    const std::vector<docdisc::Keyword>& keywords) {
  const int C = model.num_classes();
  const std::size_t J = keywords.size();
  std::vector<double> mass(C, 0.0);
  for (int c = 0; c < C; ++c) {
    double appearance = 1.0;
    for (const auto& f : t.features) appearance *= softmax_probs(model, f)[c];
    for (std::uint32_t a = 0; a < (1u << J); ++a) {
      double w = appearance;
      for (std::size_t j = 0; j < J; ++j) w *= eta.probability(keywords[j].lemma, model.class_ids[c]);
      mass[c] += w;
    }
  }
  double total = 0;
  for (double v : mass) total += v;
  for (double& v : mass) v /= total;
  return mass;
}

}  // namespace oracle
