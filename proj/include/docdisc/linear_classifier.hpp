#pragma once

// Softmax linear classifier p(z | v; theta) over precomputed feature vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/version.hpp"

namespace docdisc {

struct ClassifierModel {
  std::vector<int> class_ids;   // background 0 first when present
  int dim = 0;
  std::vector<double> weights;  // row-major, class_ids.size() x dim
  std::vector<double> bias;

  ClassifierModel() = default;
  ClassifierModel(std::vector<int> ids, int d)
      : class_ids(std::move(ids)), dim(d), weights(class_ids.size() * d, 0.0), bias(class_ids.size(), 0.0) {}

  int num_classes() const { return static_cast<int>(class_ids.size()); }
  double& w(int c, int d) { return weights[static_cast<std::size_t>(c) * dim + d]; }
  double w(int c, int d) const { return weights[static_cast<std::size_t>(c) * dim + d]; }

  std::optional<int> index_of(int class_id) const {
    auto it = std::find(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end()) return std::nullopt;
    return static_cast<int>(it - class_ids.begin());
  }
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  int balance_cap = 200;
  int batch_size = 32;
};

struct Sample {
  std::span<const double> feature;
  int label = 0;  // a class id, not an index
};

namespace classifier_detail {

inline void check_dim(const ClassifierModel& model, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != model.dim)
    throw DimensionMismatch("feature has dimension " + std::to_string(feature.size()) + ", model expects " +
                            std::to_string(model.dim));
}

inline void logits(const ClassifierModel& model, std::span<const double> v, std::vector<double>& out) {
  out.assign(model.num_classes(), 0.0);
  for (int c = 0; c < model.num_classes(); ++c) {
    double s = model.bias[c];
    const double* row = &model.weights[static_cast<std::size_t>(c) * model.dim];
    for (int d = 0; d < model.dim; ++d) s += row[d] * v[d];
    out[c] = s;
  }
}

// In-place log-softmax.
inline void log_softmax(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : z) v -= lse;
}

}  // namespace classifier_detail

/// Log class probabilities, ordered like model.class_ids.
inline std::vector<double> log_predict(const ClassifierModel& model, std::span<const double> feature) {
  classifier_detail::check_dim(model, feature);
  std::vector<double> z;
  classifier_detail::logits(model, feature, z);
  classifier_detail::log_softmax(z);
  return z;
}

inline std::vector<double> predict(const ClassifierModel& model, std::span<const double> feature) {
  std::vector<double> p = log_predict(model, feature);
  for (double& v : p) v = std::exp(v);
  return p;
}

struct LossGradient {
  double loss = 0;
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;
};

/// Mean cross-entropy plus (l2 / 2) * ||W||^2 over `samples`, with its
/// analytic gradient. The bias is not regularized.
inline LossGradient loss_and_gradient(const ClassifierModel& model, std::span<const Sample> samples, double l2) {
  LossGradient out;
  out.grad_weights.assign(model.weights.size(), 0.0);
  out.grad_bias.assign(model.bias.size(), 0.0);
  std::vector<double> z;
  const double inv_n = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    classifier_detail::check_dim(model, s.feature);
    const auto target = model.index_of(s.label);
    if (!target) throw EmptyClass("sample label " + std::to_string(s.label) + " is not a declared class");
    classifier_detail::logits(model, s.feature, z);
    classifier_detail::log_softmax(z);
    out.loss -= z[*target] * inv_n;
    for (int c = 0; c < model.num_classes(); ++c) {
      const double g = (std::exp(z[c]) - (c == *target ? 1.0 : 0.0)) * inv_n;
      out.grad_bias[c] += g;
      double* row = &out.grad_weights[static_cast<std::size_t>(c) * model.dim];
      for (int d = 0; d < model.dim; ++d) row[d] += g * s.feature[d];
    }
  }
  double sq = 0;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    sq += model.weights[k] * model.weights[k];
    out.grad_weights[k] += l2 * model.weights[k];
  }
  out.loss += 0.5 * l2 * sq;
  return out;
}

/// Per-class subsampling at a fixed interval ceil(count / cap), starting
/// with each class's first sample. Order of the input is preserved.
inline std::vector<Sample> balance_samples(std::span<const Sample> samples, int cap) {
  std::map<int, int> count;
  for (const auto& s : samples) ++count[s.label];
  std::map<int, int> interval;
  for (const auto& [label, n] : count) interval[label] = std::max(1, (n + cap - 1) / cap);
  std::map<int, int> seen;
  std::vector<Sample> out;
  for (const auto& s : samples) {
    const int k = seen[s.label]++;
    if (k % interval[s.label] == 0) out.push_back(s);
  }
  return out;
}

/// Mini-batch gradient descent from zero weights. Deterministic for a fixed
/// seed: batches come from one seeded shuffle per epoch and gradients are
/// accumulated in sample order.
inline ClassifierModel train(std::span<const Sample> samples, const std::vector<int>& class_ids,
                             const TrainConfig& cfg) {
  if (class_ids.empty()) throw EmptyClass("no classes declared");
  if (samples.empty()) throw EmptyClass("no training samples");
  if (!(cfg.learning_rate > 0) || cfg.epochs <= 0 || cfg.l2 < 0 || cfg.balance_cap <= 0 || cfg.batch_size <= 0)
    throw ConfigError("invalid training configuration");
  const int dim = static_cast<int>(samples.front().feature.size());

  std::vector<Sample> data = balance_samples(samples, cfg.balance_cap);
  for (int id : class_ids) {
    const bool present = std::any_of(data.begin(), data.end(), [&](const Sample& s) { return s.label == id; });
    if (!present) throw EmptyClass("class " + std::to_string(id) + " has no training samples");
  }

  ClassifierModel model(class_ids, dim);
  for (const auto& s : data) classifier_detail::check_dim(model, s.feature);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;
  batch.reserve(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(data[order[k]]);
      const LossGradient lg = loss_and_gradient(model, batch, cfg.l2);
      for (std::size_t k = 0; k < model.weights.size(); ++k) model.weights[k] -= cfg.learning_rate * lg.grad_weights[k];
      for (std::size_t k = 0; k < model.bias.size(); ++k) model.bias[k] -= cfg.learning_rate * lg.grad_bias[k];
    }
  }
  return model;
}

// Checkpoint: "docdisc.model <version>", "<num_classes> <dim>", class ids,
// then one line per class of dim weights, then one bias line.
inline void write_model(std::ostream& out, const ClassifierModel& model) {
  std::ostringstream buf;
  buf << std::setprecision(std::numeric_limits<double>::max_digits10);
  buf << "docdisc.model " << kFormatVersion << '\n' << model.num_classes() << ' ' << model.dim << '\n';
  for (int c = 0; c < model.num_classes(); ++c) buf << (c ? " " : "") << model.class_ids[c];
  buf << '\n';
  for (int c = 0; c < model.num_classes(); ++c) {
    for (int d = 0; d < model.dim; ++d) buf << (d ? " " : "") << model.w(c, d);
    buf << '\n';
  }
  for (int c = 0; c < model.num_classes(); ++c) buf << (c ? " " : "") << model.bias[c];
  buf << '\n';
  out << buf.str();
}

inline ClassifierModel read_model(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "docdisc.model") throw ParseError("not a docdisc model checkpoint");
  if (version != kFormatVersion) throw ParseError("unsupported model version " + std::to_string(version));
  int classes = 0;
  int dim = 0;
  if (!(in >> classes >> dim) || classes <= 0 || dim <= 0) throw ParseError("bad model header");
  std::vector<int> ids(classes);
  for (int& id : ids)
    if (!(in >> id)) throw ParseError("truncated class ids");
  ClassifierModel model(ids, dim);
  for (double& v : model.weights)
    if (!(in >> v) || !std::isfinite(v)) throw ParseError("truncated or non-finite weights");
  for (double& v : model.bias)
    if (!(in >> v) || !std::isfinite(v)) throw ParseError("truncated or non-finite bias");
  return model;
}

}  // namespace docdisc
