// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass --verbose for per-seed numbers.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "docdisc/docdisc.hpp"
#include "oracles.hpp"
#include "synth_suite.hpp"

using namespace docdisc;

namespace {

bool verbose = false;
int failures = 0;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

constexpr int kSeeds = 10;

// ---------------------------------------------------------------------------

void oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  auto ui = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
  auto ur = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  int iou_mismatch = 0;
  for (int k = 0; k < 200; ++k) {
    oracle::IntTube a;
    oracle::IntTube b;
    for (auto* t : {&a, &b}) {
      t->frame_start = ui(0, 5);
      const int len = ui(1, 6);
      for (int f = 0; f < len; ++f) t->boxes.push_back({ui(0, 10), ui(0, 10), ui(1, 6), ui(1, 6)});
    }
    if (iou_3d(oracle::to_tracklet(a, 1), oracle::to_tracklet(b, 2)) != oracle::voxel_iou(a, b)) ++iou_mismatch;
  }

  double emd_err = 0;
  for (int k = 0; k < 100; ++k) {
    const int m = ui(1, 5);
    const int n = ui(1, 5);
    auto hist = [&](int size) {
      std::vector<double> h(size);
      double s = 0;
      for (double& v : h) s += (v = ur(0, 1) < 0.2 ? 0.0 : ur(0.01, 1.0));
      if (s == 0) s += (h[0] = 1.0);
      for (double& v : h) v /= s;
      return h;
    };
    const std::vector<double> p = hist(m);
    const std::vector<double> q = hist(n);
    CostMatrix cost(m, std::vector<double>(n));
    for (auto& row : cost)
      for (double& c : row) c = ur(0, 10);
    emd_err = std::max(emd_err, std::abs(emd(p, q, cost) - oracle::transport_lp(p, q, cost)));
  }

  double post_err = 0;
  for (int k = 0; k < 100; ++k) {
    const int C = ui(2, 4);
    const int D = ui(2, 4);
    std::vector<int> ids(C);
    for (int c = 0; c < C; ++c) ids[c] = c;
    ClassifierModel model(ids, D);
    for (double& w : model.weights) w = ur(-1.5, 1.5);
    for (double& b : model.bias) b = ur(-1, 1);
    Tracklet t;
    t.id = 1;
    const int frames = ui(1, 4);
    for (int f = 0; f < frames; ++f) {
      std::vector<double> v(D);
      for (double& x : v) x = ur(-2, 2);
      t.features.push_back(v);
    }
    KeywordClassTable eta(ids);
    const std::vector<std::string> lemmas{"alpha", "beta", "gamma"};
    for (const auto& l : lemmas) {
      std::vector<double> row(C);
      double s = 0;
      for (double& x : row) s += (x = ur(0.05, 1.0));
      for (double& x : row) x /= s;
      eta.set_row(l, row);
    }
    std::vector<Keyword> kws;
    const int J = ui(0, 3);
    for (int j = 0; j < J; ++j) kws.push_back({lemmas[ui(0, 2)], 0, 1000, 0.1});
    const auto got = posterior(t, model, eta, kws);
    const auto want = oracle::posterior_by_enumeration(t, model, eta, kws);
    for (int c = 0; c < C; ++c) post_err = std::max(post_err, std::abs(got[c] - want[c]));
  }

  const double secs = seconds_since(t0);
  const bool ok = iou_mismatch == 0 && emd_err <= 1e-9 && post_err <= 1e-9 && secs < 30;
  report(ok, "oracle_equivalence",
         fmt("iou_3d mismatches %d/200, emd max err %.3g over 100, posterior max err %.3g over 100, %.2f s",
             iou_mismatch, emd_err, post_err, secs));
}

void gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  auto ui = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };
  auto ur = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    const int C = ui(2, 5);
    const int D = ui(1, 6);
    const int N = ui(1, 12);
    std::vector<int> ids(C);
    for (int c = 0; c < C; ++c) ids[c] = c * 3;
    ClassifierModel model(ids, D);
    for (double& w : model.weights) w = ur(-1, 1);
    for (double& b : model.bias) b = ur(-1, 1);
    std::vector<std::vector<double>> feats(N, std::vector<double>(D));
    std::vector<Sample> samples;
    for (auto& f : feats) {
      for (double& x : f) x = ur(-2, 2);
      samples.push_back({f, ids[ui(0, C - 1)]});
    }
    const double l2 = ur(0, 0.1);
    const LossGradient lg = loss_and_gradient(model, samples, l2);
    const double h = 1e-5;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = loss_and_gradient(model, samples, l2).loss;
      param = keep - h;
      const double down = loss_and_gradient(model, samples, l2).loss;
      param = keep;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    for (std::size_t i = 0; i < model.weights.size(); ++i) check(model.weights[i], lg.grad_weights[i]);
    for (std::size_t i = 0; i < model.bias.size(); ++i) check(model.bias[i], lg.grad_bias[i]);
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-4 && secs < 10, "gradient_check",
         fmt("max relative error %.3g over 50 problems, %.2f s", worst, secs));
}

// ---------------------------------------------------------------------------

struct Experiments {
  std::vector<suite::Run> standard;
  double normalization_err = 0;
  int normalization_checks = 0;
};

Experiments run_standard() {
  Experiments ex;
  auto check_rows = [&](const IterationReport&, const EngineResult& r) {
    for (const auto& [id, row] : r.posterior.rows) {
      double s = 0;
      for (double v : row) s += v;
      ex.normalization_err = std::max(ex.normalization_err, std::abs(s - 1.0));
      ++ex.normalization_checks;
    }
    for (const auto& [lemma, row] : r.eta.rows()) {
      double s = 0;
      for (double v : row) s += v;
      ex.normalization_err = std::max(ex.normalization_err, std::abs(s - 1.0));
      ++ex.normalization_checks;
    }
  };
  for (int seed = 1; seed <= kSeeds; ++seed) {
    ex.standard.push_back(suite::run(suite::standard_spec(seed), {}, check_rows));
    if (verbose) {
      const auto& r = ex.standard.back();
      std::printf("  seed %2d: keywords %zu, iterations %zu, dmAP iter0 %.3f final %.3f, mAP final %.3f, "
                  "grounding %.3f vs %.3f, change",
                  seed, r.keywords.size(), r.metrics.size() - 1, r.metrics.front().discovered_map,
                  r.metrics.back().discovered_map, r.metrics.back().map, r.grounding_joint.value_or(-1),
                  r.grounding_baseline.value_or(-1));
      for (const auto& rep : r.result.reports) std::printf(" %.3f", rep.label_change_fraction);
      std::printf("\n");
    }
  }
  return ex;
}

void normalization(const Experiments& ex) {
  report(ex.normalization_err <= 1e-9 && ex.normalization_checks > 0, "normalization_invariants",
         fmt("max |row sum - 1| = %.3g over %d posterior and eta rows", ex.normalization_err,
             ex.normalization_checks));
}

void discovery(const Experiments& ex, double secs) {
  int improved = 0;
  double mean_final = 0;
  for (const auto& r : ex.standard) {
    if (r.metrics.back().discovered_map > r.metrics.front().discovered_map && r.metrics.size() > 1) ++improved;
    mean_final += r.metrics.back().discovered_map;
  }
  mean_final /= kSeeds;
  report(improved >= 9 && mean_final >= 0.80 && secs < 300, "end_to_end_discovery",
         fmt("final beats iteration 0 on %d/10 seeds, mean final discovered mAP %.3f, %.1f s", improved, mean_final,
             secs));
}

void grounding(const Experiments& ex) {
  int wins = 0;
  double joint = 0;
  double base = 0;
  for (const auto& r : ex.standard) {
    const double j = r.grounding_joint.value_or(0);
    const double b = r.grounding_baseline.value_or(0);
    if (r.grounding_joint && j > b) ++wins;
    joint += j;
    base += b;
  }
  report(wins >= 9, "grounding_superiority",
         fmt("joint beats word counting on %d/10 seeds, mean accuracy %.3f vs %.3f", wins, joint / kSeeds,
             base / kSeeds));
}

void convergence(const Experiments& ex) {
  int converged = 0;
  std::string when;
  for (const auto& r : ex.standard) {
    int at = -1;
    for (const auto& rep : r.result.reports)
      if (rep.iteration >= 1 && rep.label_change_fraction < 0.01) {
        at = rep.iteration;
        break;
      }
    if (at >= 1 && at <= 3) ++converged;
    when += " " + std::to_string(at);
  }
  report(converged == kSeeds, "convergence",
         fmt("label change < 1%% by iteration 3 on %d/10 seeds (first iteration below 1%%:%s)", converged,
             when.c_str()));
}

void synonym_merge() {
  int merged = 0;
  std::string detail;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    RunConfig cfg;
    cfg.engine.max_iterations = 2;
    const suite::Run r = suite::run(suite::synonym_spec(seed), cfg);
    bool ok = false;
    for (std::size_t it = 1; it < r.categories.size() && it <= 2; ++it)
      for (const auto& [id, lemmas] : r.categories[it].lemmas)
        if (lemmas.count("tiger") && lemmas.count("cub")) ok = true;
    merged += ok;
    if (verbose) {
      std::printf("  synonym seed %2d: %s; categories after init:", seed, ok ? "merged" : "not merged");
      for (const auto& [id, lemmas] : r.categories.front().lemmas) {
        std::printf(" %d{", id);
        for (const auto& l : lemmas) std::printf("%s,", l.c_str());
        std::printf("}");
      }
      std::printf("\n");
    }
  }
  report(merged >= 9, "synonym_merging", fmt("tiger and cub share a category by iteration 2 on %d/10 seeds", merged));
}

void geometric_ablation() {
  double full = 0;
  double no_strong = 0;
  double none = 0;
  double weak_delta = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    RunConfig cfg;
    const double a = suite::run(suite::fragment_spec(seed), cfg).metrics.back().discovered_map;
    cfg.engine.strong_links = false;
    const double b = suite::run(suite::fragment_spec(seed), cfg).metrics.back().discovered_map;
    cfg.engine.weak_links = false;
    const double c = suite::run(suite::fragment_spec(seed), cfg).metrics.back().discovered_map;
    full += a;
    no_strong += b;
    none += c;
    weak_delta = std::max(weak_delta, std::abs(b - c));
    if (verbose) std::printf("  fragment seed %2d: full %.3f, weak only %.3f, no links %.3f\n", seed, a, b, c);
  }
  full /= kSeeds;
  no_strong /= kSeeds;
  none /= kSeeds;
  report(no_strong < full && weak_delta < 0.02, "geometric_ablation",
         fmt("mean discovered mAP with strong links %.3f, without %.3f; weak links alone change it by at most %.4f",
             full, no_strong, weak_delta));
}

void determinism() {
  auto render = [] {
    RunConfig cfg;
    const suite::Run r = suite::run(suite::standard_spec(3), cfg);
    std::ostringstream out;
    out << make_report(r.result, r.keywords, r.world.tracklets.video_id, r.world.tracklets.fps, cfg).dump(2);
    write_tracklet_file(out, r.world.tracklets);
    out << format_srt(r.world.subtitles);
    return out.str();
  };
  const std::string a = render();
  const std::string b = render();
  report(a == b, "determinism", fmt("two seeded runs produced %s outputs (%zu bytes)", a == b ? "identical" : "different",
                                    a.size()));
}

}  // namespace

int main(int argc, char** argv) {
  for (int k = 1; k < argc; ++k)
    if (std::strcmp(argv[k], "--verbose") == 0) verbose = true;

  oracle_equivalence();
  gradient_check();
  const auto t0 = Clock::now();
  const Experiments ex = run_standard();
  const double secs = seconds_since(t0);
  normalization(ex);
  discovery(ex, secs);
  grounding(ex);
  synonym_merge();
  geometric_ablation();
  convergence(ex);
  determinism();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
