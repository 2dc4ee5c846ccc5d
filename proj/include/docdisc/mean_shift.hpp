#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace docdisc {

struct MeanShiftResult {
  std::vector<int> assignment;              // cluster index per point
  std::vector<std::vector<double>> modes;   // one per cluster
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

/// Flat-kernel mean shift. Every point climbs to a mode by repeatedly moving
/// to the mean of all points within `bandwidth`; modes closer than
/// bandwidth / 2 are then merged in point order, so cluster indices follow
/// the first point that reached them.
inline MeanShiftResult mean_shift(const std::vector<std::vector<double>>& points, double bandwidth,
                                  int max_iterations = 500) {
  MeanShiftResult result;
  if (points.empty()) return result;
  const std::size_t dim = points.front().size();
  const double tolerance = 1e-9 * bandwidth;

  std::vector<std::vector<double>> converged;
  converged.reserve(points.size());
  std::vector<double> next(dim);
  for (const auto& start : points) {
    std::vector<double> y = start;
    for (int it = 0; it < max_iterations; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      int in_window = 0;
      for (const auto& p : points) {
        if (euclidean(p, y) <= bandwidth) {
          for (std::size_t d = 0; d < dim; ++d) next[d] += p[d];
          ++in_window;
        }
      }
      if (in_window == 0) break;
      for (double& v : next) v /= in_window;
      const double shift = euclidean(next, y);
      y = next;
      if (shift <= tolerance) break;
    }
    converged.push_back(std::move(y));
  }

  result.assignment.assign(points.size(), -1);
  for (std::size_t i = 0; i < converged.size(); ++i) {
    for (std::size_t m = 0; m < result.modes.size(); ++m) {
      if (euclidean(converged[i], result.modes[m]) <= bandwidth / 2) {
        result.assignment[i] = static_cast<int>(m);
        break;
      }
    }
    if (result.assignment[i] < 0) {
      result.assignment[i] = static_cast<int>(result.modes.size());
      result.modes.push_back(converged[i]);
    }
  }
  return result;
}

}  // namespace docdisc
