#pragma once

// Earth Mover's Distance between two histograms, solved exactly as a
// transportation problem by successive shortest augmenting paths with
// Johnson potentials.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "docdisc/error.hpp"

namespace docdisc {

using CostMatrix = std::vector<std::vector<double>>;

inline double emd(std::span<const double> p, std::span<const double> q, const CostMatrix& cost) {
  if (cost.size() != p.size()) throw DimensionMismatch("cost rows must match the first histogram");
  for (const auto& row : cost)
    if (row.size() != q.size()) throw DimensionMismatch("cost columns must match the second histogram");
  double sp = 0;
  double sq = 0;
  for (double v : p) {
    if (!(v >= 0)) throw UnbalancedMass("histogram has negative or NaN mass");
    sp += v;
  }
  for (double v : q) {
    if (!(v >= 0)) throw UnbalancedMass("histogram has negative or NaN mass");
    sq += v;
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw UnbalancedMass("histograms must each sum to 1");
  for (const auto& row : cost)
    for (double c : row)
      if (!(c >= 0) || !std::isfinite(c)) throw ConfigError("EMD costs must be finite and non-negative");

  // Only bins carrying mass take part in the flow problem.
  std::vector<std::size_t> src;
  std::vector<std::size_t> snk;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) src.push_back(i);
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] > 0) snk.push_back(j);
  const std::size_t m = src.size();
  const std::size_t n = snk.size();

  std::vector<double> supply(m);
  std::vector<double> demand(n);
  for (std::size_t a = 0; a < m; ++a) supply[a] = p[src[a]];
  for (std::size_t b = 0; b < n; ++b) demand[b] = q[snk[b]];
  auto c = [&](std::size_t a, std::size_t b) { return cost[src[a]][snk[b]]; };

  std::vector<double> flow(m * n, 0.0);
  // Node layout: sources [0, m), sinks [m, m + n), sink terminal m + n.
  const std::size_t nodes = m + n + 1;
  const std::size_t terminal = m + n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = 1e-15;
  std::vector<double> potential(nodes, 0.0);
  std::vector<double> dist(nodes);
  std::vector<std::size_t> parent(nodes);
  std::vector<char> done(nodes);

  auto remaining = [](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x > kEps; });
  };

  while (remaining(supply) && remaining(demand)) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::fill(parent.begin(), parent.end(), nodes);
    // Implicit super source with zero-cost edges to every source that still
    // has supply; reduced cost of that edge is -potential[a].
    for (std::size_t a = 0; a < m; ++a)
      if (supply[a] > kEps) dist[a] = -potential[a];

    for (;;) {
      std::size_t u = nodes;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < kInf && (u == nodes || dist[v] < dist[u])) u = v;
      if (u == nodes) break;
      done[u] = 1;
      if (u == terminal) continue;
      auto relax = [&](std::size_t v, double reduced) {
        const double nd = dist[u] + std::max(reduced, 0.0);
        if (nd < dist[v]) {
          dist[v] = nd;
          parent[v] = u;
        }
      };
      if (u < m) {
        for (std::size_t b = 0; b < n; ++b) relax(m + b, c(u, b) + potential[u] - potential[m + b]);
      } else {
        const std::size_t b = u - m;
        for (std::size_t a = 0; a < m; ++a)
          if (flow[a * n + b] > kEps) relax(a, -c(a, b) + potential[u] - potential[a]);
        if (demand[b] > kEps) relax(terminal, potential[u] - potential[terminal]);
      }
    }
    if (dist[terminal] == kInf) break;

    double reach = 0;
    for (std::size_t v = 0; v < nodes; ++v)
      if (dist[v] < kInf) reach = std::max(reach, dist[v]);
    for (std::size_t v = 0; v < nodes; ++v) potential[v] += dist[v] < kInf ? dist[v] : reach;

    // Walk back from the terminal to find the bottleneck.
    const std::size_t last_sink = parent[terminal];
    double delta = demand[last_sink - m];
    std::size_t v = last_sink;
    while (parent[v] != nodes) {
      const std::size_t u = parent[v];
      if (u >= m) delta = std::min(delta, flow[v * n + (u - m)]);  // reverse edge sink u -> source v
      v = u;
    }
    delta = std::min(delta, supply[v]);

    v = last_sink;
    while (parent[v] != nodes) {
      const std::size_t u = parent[v];
      if (u < m) {
        flow[u * n + (v - m)] += delta;
      } else {
        double& f = flow[v * n + (u - m)];
        f = (f == delta) ? 0.0 : f - delta;
      }
      v = u;
    }
    supply[v] = (supply[v] == delta) ? 0.0 : supply[v] - delta;
    double& d = demand[last_sink - m];
    d = (d == delta) ? 0.0 : d - delta;
  }

  double total = 0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < n; ++b) total += flow[a * n + b] * c(a, b);
  return total;
}

}  // namespace docdisc
