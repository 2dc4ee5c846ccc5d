// docdisc: keyword mining, joint analysis, evaluation and synthetic data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "docdisc/docdisc.hpp"

namespace fs = std::filesystem;
using namespace docdisc;

namespace {

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error("UsageError", what) {}
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot read " + p.string());
  return in;
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << content;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_in(path);
  return parse_config(in);
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Class names may contain anything; keep file names tame.
std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> iterations;
  bool grounding_baseline = false;

  std::string srt, corpus, lexicon;
  std::string tracklets, keywords;
  std::string report, ground_truth, truth;
  std::string spec, resources;
};

int cmd_keywords(const Options& o) {
  const RunConfig cfg = load_config(o.config);
  if (!fs::is_directory(o.corpus)) throw UsageError("corpus directory not found: " + o.corpus);
  const Lexicon lexicon = Lexicon::load(o.lexicon);
  const Corpus corpus = Corpus::load_directory(o.corpus, lexicon);
  const std::vector<Subtitle> subs = parse_srt(read_file(o.srt));
  const std::vector<Keyword> keywords = select_keywords(subs, corpus, lexicon, cfg.keywords);
  std::ostringstream buf;
  write_keywords(buf, keywords);
  write_file(o.out, buf.str());
  std::set<std::string> lemmas;
  for (const auto& k : keywords) lemmas.insert(k.lemma);
  std::cout << keywords.size() << " keywords, " << lemmas.size() << " lemmas\n";
  return 0;
}

int cmd_analyze(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.engine.seed = *o.seed;
  if (o.iterations) cfg.engine.max_iterations = *o.iterations;
  if (o.grounding_baseline) cfg.engine.grounding_mode = GroundingMode::kWordCount;
  validate(cfg);

  auto tin = open_in(o.tracklets);
  TrackletFile tf = read_tracklet_file(tin);
  auto kin = open_in(o.keywords);
  const std::vector<Keyword> keywords = read_keywords(kin);

  std::string log = nlohmann::json({{"format", "docdisc.iterations"}, {"version", kFormatVersion}}).dump() + "\n";
  const EngineResult r = run(tf.tracklets, keywords, tf.fps, cfg.engine, [&](const IterationReport& rep, const EngineResult&) {
    log += iteration_to_json(rep).dump() + "\n";
    std::cerr << "iteration " << rep.iteration << ": " << rep.num_tracklets << " tracklets, " << rep.num_categories
              << " categories, label change " << rep.label_change_fraction << "\n";
  });

  const fs::path out(o.out);
  fs::create_directories(out);
  write_file(out / "report.json", json_text(make_report(r, keywords, tf.video_id, tf.fps, cfg)));
  write_file(out / "iterations.jsonl", log);
  std::ostringstream eta;
  r.eta.dump(eta);
  write_file(out / "eta.tsv", eta.str());
  if (r.model) {
    std::ostringstream model;
    write_model(model, *r.model);
    write_file(out / "model.txt", model.str());
  }
  int discovered = 0;
  for (int id : r.state.categories.ids())
    if (id != kBackground) ++discovered;
  std::cout << discovered << " categories after " << (r.reports.empty() ? 0 : r.reports.back().iteration)
            << " iterations\n";
  return 0;
}

int cmd_evaluate(const Options& o) {
  const RunConfig cfg = load_config(o.config);
  const LoadedReport rep = load_report(nlohmann::json::parse(read_file(o.report)));
  auto gin = open_in(o.ground_truth);
  const GroundTruthFile gt = read_ground_truth_file(gin);

  const std::vector<Detection> dets = detections_from(rep.tracklets, rep.labels, rep.confidence);
  const MetricsReport m = compute_metrics(dets, rep.categories, gt, cfg.eval);
  nlohmann::json out = metrics_to_json(m);

  std::optional<double> acc;
  std::optional<double> acc_base;
  if (!o.truth.empty()) {
    const WorldTruth truth = truth_from_json(nlohmann::json::parse(read_file(o.truth)));
    // A merged tracklet takes the truth of its earliest member.
    acc = grounding_accuracy(rep.labels, rep.groundings, rep.keywords, truth.tracklet_class, truth.lemma_class,
                             rep.categories);
    acc_base = grounding_accuracy(rep.labels, rep.baseline_groundings, rep.keywords, truth.tracklet_class,
                                  truth.lemma_class, rep.categories);
    out["grounding_accuracy"] = acc ? nlohmann::json(*acc) : nlohmann::json(nullptr);
    out["grounding_accuracy_baseline"] = acc_base ? nlohmann::json(*acc_base) : nlohmann::json(nullptr);
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file(dir / "metrics.json", json_text(out));
  for (const auto& c : m.classes) {
    std::ostringstream csv;
    write_pr_csv(csv, c);
    write_file(dir / ("pr_" + safe_name(c.name) + ".csv"), csv.str());
  }
  std::cout << "mAP " << m.map << ", discovered mAP " << m.discovered_map
            << (m.discovered_defined ? "" : " (nothing discovered)") << "\n";
  const auto& shown = o.grounding_baseline ? acc_base : acc;
  if (shown)
    std::cout << (o.grounding_baseline ? "word-count grounding accuracy " : "grounding accuracy ") << *shown << "\n";
  return 0;
}

int cmd_synth(const Options& o) {
  WorldSpec spec;
  if (!o.spec.empty()) {
    auto in = open_in(o.spec);
    spec = parse_world_spec(in);
  }
  if (o.seed) spec.seed = *o.seed;
  const World w = generate(spec);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ostringstream tr;
  write_tracklet_file(tr, w.tracklets);
  write_file(dir / "tracklets.jsonl", tr.str());
  write_file(dir / "subtitles.srt", format_srt(w.subtitles));
  std::ostringstream gt;
  write_ground_truth_file(gt, w.ground_truth);
  write_file(dir / "groundtruth.jsonl", gt.str());
  write_file(dir / "truth.json", json_text(truth_to_json(w.truth, w.spec)));
  if (!o.resources.empty()) {
    const fs::path res(o.resources);
    write_file(res / "lexicon.tsv", w.lexicon_text);
    for (std::size_t d = 0; d < w.corpus_texts.size(); ++d) {
      char name[32];
      std::snprintf(name, sizeof name, "doc%04zu.txt", d);
      write_file(res / "corpus" / name, w.corpus_texts[d] + "\n");
    }
  }
  std::cout << w.tracklets.tracklets.size() << " tracklets, " << w.subtitles.size() << " subtitles, "
            << w.ground_truth.tracks.size() << " objects\n";
  return 0;
}

int cmd_report(const Options& o) {
  const nlohmann::json j = nlohmann::json::parse(read_file(o.report));
  const LoadedReport rep = load_report(j);
  std::cout << "iteration  tracklets  categories  label-change  merged-tracklets  merged-categories\n";
  for (const auto& it : j.at("iterations")) {
    std::printf("%9d  %9d  %10d  %12.4f  %16zu  %17zu\n", it.at("iteration").get<int>(),
                it.at("num_tracklets").get<int>(), it.at("num_categories").get<int>(),
                it.at("label_change_fraction").get<double>(), it.at("tracklets_merged").size(),
                it.at("categories_merged").size());
  }
  std::map<int, int> members;
  for (const auto& [id, z] : rep.labels) ++members[z];
  for (const auto& [id, lemmas] : rep.categories.lemmas) {
    std::cout << "category " << id << " [";
    bool first = true;
    for (const auto& l : lemmas) {
      std::cout << (first ? "" : " ") << l;
      first = false;
    }
    std::cout << "]: " << members[id] << " tracklets\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docdisc: discover object categories from narrated video"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "run configuration (key = value)")->check(CLI::ExistingFile);

  auto* kw = app.add_subcommand("keywords", "mine keywords from subtitles");
  kw->add_option("--srt", o.srt, "subtitle file")->required();
  kw->add_option("--corpus", o.corpus, "directory of background documents")->required();
  kw->add_option("--lexicon", o.lexicon, "noun lexicon (form<TAB>lemma)")->required();
  kw->add_option("--out", o.out, "keyword file to write")->required();

  auto* an = app.add_subcommand("analyze", "run the joint analysis");
  an->add_option("--tracklets", o.tracklets, "tracklet file")->required();
  an->add_option("--keywords", o.keywords, "keyword file")->required();
  an->add_option("--out", o.out, "output directory")->required();
  an->add_option("--seed", o.seed, "override the configured seed");
  an->add_option("--iterations", o.iterations, "override max_iterations")->check(CLI::NonNegativeNumber);
  an->add_flag("--grounding-baseline", o.grounding_baseline, "ground by word counting");

  auto* ev = app.add_subcommand("evaluate", "score a report against ground truth");
  ev->add_option("--report", o.report, "report.json from analyze")->required();
  ev->add_option("--ground-truth", o.ground_truth, "ground-truth file")->required();
  ev->add_option("--truth", o.truth, "synthetic truth tables, enables grounding accuracy");
  ev->add_option("--out", o.out, "output directory")->required();
  ev->add_flag("--grounding-baseline", o.grounding_baseline, "print the word-count baseline accuracy");

  auto* sy = app.add_subcommand("synth", "generate a synthetic documentary");
  sy->add_option("spec", o.spec, "world spec (key = value); defaults when omitted");
  sy->add_option("--seed", o.seed, "override the spec seed");
  sy->add_option("--out", o.out, "output directory")->required();
  sy->add_option("--resources", o.resources, "also write lexicon.tsv and corpus/ here");

  auto* rp = app.add_subcommand("report", "summarize a report");
  rp->add_option("--report", o.report, "report.json from analyze")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*kw) return cmd_keywords(o);
    if (*an) return cmd_analyze(o);
    if (*ev) return cmd_evaluate(o);
    if (*sy) return cmd_synth(o);
    if (*rp) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [ParseError]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
