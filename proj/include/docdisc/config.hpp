#pragma once

// Run configuration: engine, keyword mining and evaluation settings in one
// flat "key = value" file. Unknown keys are rejected.

#include <cstdio>
#include <istream>
#include <sstream>
#include <string>

#include "docdisc/analysis_engine.hpp"
#include "docdisc/error.hpp"
#include "docdisc/evaluator.hpp"
#include "docdisc/keyvalue.hpp"
#include "docdisc/text_pipeline.hpp"

namespace docdisc {

struct RunConfig {
  EngineConfig engine;
  KeywordOptions keywords;
  EvalConfig eval;
};

inline const char* grounding_mode_name(GroundingMode m) {
  switch (m) {
    case GroundingMode::kThreshold: return "threshold";
    case GroundingMode::kSample: return "sample";
    case GroundingMode::kWordCount: return "word_count";
  }
  return "threshold";
}

inline void apply_config_entry(RunConfig& c, const kv::Entry& e) {
  auto& g = c.engine;
  const auto d = [&] { return kv::to_double<ConfigError>(e); };
  const auto i = [&] { return static_cast<int>(kv::to_int<ConfigError>(e)); };
  const auto b = [&] { return kv::to_bool<ConfigError>(e); };
  if (e.key == "bandwidth") g.bandwidth = d();
  else if (e.key == "confidence_threshold") g.confidence_threshold = d();
  else if (e.key == "confidence_weights") {
    std::stringstream ss(e.value);
    std::string part;
    int k = 0;
    while (std::getline(ss, part, ',')) {
      if (k == 4) throw ConfigError("confidence_weights: expected 4 comma-separated numbers");
      g.confidence_weights[k++] = kv::to_double<ConfigError>({e.key, std::string(text_detail::trim(part)), e.line});
    }
    if (k != 4) throw ConfigError("confidence_weights: expected 4 comma-separated numbers");
  }
  else if (e.key == "ground_threshold") g.ground_threshold = d();
  else if (e.key == "strong_link_threshold") g.strong_link_threshold = d();
  else if (e.key == "weak_link_threshold") g.weak_link_threshold = d();
  else if (e.key == "emd_merge_threshold") {
    if (e.value == "auto") g.emd_merge_threshold.reset();
    else g.emd_merge_threshold = d();
  }
  else if (e.key == "emd_merge_scale") g.emd_merge_scale = d();
  else if (e.key == "max_iterations") g.max_iterations = i();
  else if (e.key == "convergence_epsilon") g.convergence_epsilon = d();
  else if (e.key == "seed") g.seed = kv::to_u64<ConfigError>(e);
  else if (e.key == "eta_epsilon") g.eta_epsilon = d();
  else if (e.key == "eta_smoothing") g.eta_smoothing = d();
  else if (e.key == "hard_negative_objectness") g.hard_negative_objectness = d();
  else if (e.key == "grounding_mode") {
    if (e.value == "threshold") g.grounding_mode = GroundingMode::kThreshold;
    else if (e.value == "sample") g.grounding_mode = GroundingMode::kSample;
    else if (e.value == "word_count") g.grounding_mode = GroundingMode::kWordCount;
    else throw ConfigError("grounding_mode: expected threshold, sample or word_count");
  }
  else if (e.key == "strong_links") g.strong_links = b();
  else if (e.key == "weak_links") g.weak_links = b();
  else if (e.key == "category_merge") g.category_merge = b();
  else if (e.key == "lambda_t") g.graph.lambda_t = d();
  else if (e.key == "max_gap") g.graph.max_gap = i();
  else if (e.key == "link_floor") g.graph.link_floor = d();
  else if (e.key == "span_dilation_ms") g.graph.span_dilation_ms = d();
  else if (e.key == "learning_rate") g.train.learning_rate = d();
  else if (e.key == "epochs") g.train.epochs = i();
  else if (e.key == "l2") g.train.l2 = d();
  else if (e.key == "balance_cap") g.train.balance_cap = i();
  else if (e.key == "batch_size") g.train.batch_size = i();
  else if (e.key == "keyword_threshold") c.keywords.threshold = d();
  else if (e.key == "coreference_window") c.keywords.coreference_window = i();
  else if (e.key == "iou_threshold") c.eval.iou_threshold = d();
  else throw ConfigError(e.key + ": unknown configuration key (line " + std::to_string(e.line) + ")");
}

inline void validate(const RunConfig& c) {
  c.engine.validate();
  const auto& t = c.engine.train;
  if (!(t.learning_rate > 0) || t.epochs <= 0 || t.l2 < 0 || t.balance_cap <= 0 || t.batch_size <= 0)
    throw ConfigError("invalid training settings");
  if (!(c.keywords.threshold >= 0)) throw ConfigError("keyword_threshold must be >= 0");
  if (c.keywords.coreference_window < 0) throw ConfigError("coreference_window must be >= 0");
  if (!(c.eval.iou_threshold > 0 && c.eval.iou_threshold <= 1)) throw ConfigError("iou_threshold must lie in (0,1]");
}

inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  for (const auto& e : kv::parse<ConfigError>(in, "config")) apply_config_entry(c, e);
  validate(c);
  return c;
}

/// Canonical listing of every key, parseable by parse_config.
inline std::string format_config(const RunConfig& c) {
  const auto& g = c.engine;
  std::string out;
  char buf[128];
  auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
    out += buf;
  };
  auto integer = [&](const char* key, long long v) { out += std::string(key) + " = " + std::to_string(v) + "\n"; };
  auto flag = [&](const char* key, bool v) { out += std::string(key) + " = " + (v ? "true" : "false") + "\n"; };
  num("bandwidth", g.bandwidth);
  num("confidence_threshold", g.confidence_threshold);
  std::snprintf(buf, sizeof buf, "confidence_weights = %.17g, %.17g, %.17g, %.17g\n", g.confidence_weights[0],
                g.confidence_weights[1], g.confidence_weights[2], g.confidence_weights[3]);
  out += buf;
  num("ground_threshold", g.ground_threshold);
  num("strong_link_threshold", g.strong_link_threshold);
  num("weak_link_threshold", g.weak_link_threshold);
  if (g.emd_merge_threshold) num("emd_merge_threshold", *g.emd_merge_threshold);
  else out += "emd_merge_threshold = auto\n";
  num("emd_merge_scale", g.emd_merge_scale);
  integer("max_iterations", g.max_iterations);
  num("convergence_epsilon", g.convergence_epsilon);
  out += "seed = " + std::to_string(g.seed) + "\n";
  num("eta_epsilon", g.eta_epsilon);
  num("eta_smoothing", g.eta_smoothing);
  num("hard_negative_objectness", g.hard_negative_objectness);
  out += std::string("grounding_mode = ") + grounding_mode_name(g.grounding_mode) + "\n";
  flag("strong_links", g.strong_links);
  flag("weak_links", g.weak_links);
  flag("category_merge", g.category_merge);
  num("lambda_t", g.graph.lambda_t);
  integer("max_gap", g.graph.max_gap);
  num("link_floor", g.graph.link_floor);
  num("span_dilation_ms", g.graph.span_dilation_ms);
  num("learning_rate", g.train.learning_rate);
  integer("epochs", g.train.epochs);
  num("l2", g.train.l2);
  integer("balance_cap", g.train.balance_cap);
  integer("batch_size", g.train.batch_size);
  num("keyword_threshold", c.keywords.threshold);
  integer("coreference_window", c.keywords.coreference_window);
  num("iou_threshold", c.eval.iou_threshold);
  return out;
}

}  // namespace docdisc
