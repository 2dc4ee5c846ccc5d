#include <gtest/gtest.h>
#include <unistd.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "docdisc/text_pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch() {
  static const fs::path dir = fs::temp_directory_path() / ("docdisc_cli_" + std::to_string(::getpid()));
  return dir;
}

Result cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(DOCDISC_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

// One synthetic documentary taken through the whole pipeline, shared by the
// tests below.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(scratch());
    fs::create_directories(scratch());
    const std::string d = scratch().string();
    synth_ = cli("synth --out " + d + "/world --resources " + d + "/res");
    keywords_ = cli("keywords --srt " + d + "/world/subtitles.srt --corpus " + d + "/res/corpus --lexicon " + d +
                    "/res/lexicon.tsv --out " + d + "/keywords.jsonl");
    const std::string common = " --tracklets " + d + "/world/tracklets.jsonl --keywords " + d + "/keywords.jsonl";
    analyze_ = cli("analyze" + common + " --out " + d + "/run");
    cli("analyze" + common + " --out " + d + "/run0 --iterations 0");
    cli("analyze" + common + " --out " + d + "/run2 --iterations 2");
    cli("analyze" + common + " --out " + d + "/again");
  }
  static void TearDownTestSuite() { fs::remove_all(scratch()); }

  static fs::path dir(const std::string& sub) { return scratch() / sub; }

  static Result evaluate(const std::string& run, const std::string& extra = "") {
    return cli("evaluate --report " + dir(run).string() + "/report.json --ground-truth " + dir("world").string() +
               "/groundtruth.jsonl --truth " + dir("world").string() + "/truth.json --out " + dir(run).string() +
               "/eval " + extra);
  }

  static Result synth_;
  static Result keywords_;
  static Result analyze_;
};
Result Pipeline::synth_;
Result Pipeline::keywords_;
Result Pipeline::analyze_;

TEST_F(Pipeline, SynthWritesWorldAndResources) {
  ASSERT_EQ(synth_.exit_code, 0) << synth_.err;
  for (const char* f : {"tracklets.jsonl", "subtitles.srt", "groundtruth.jsonl", "truth.json"})
    EXPECT_TRUE(fs::exists(dir("world") / f)) << f;
  EXPECT_TRUE(fs::exists(dir("res") / "lexicon.tsv"));
  EXPECT_TRUE(fs::exists(dir("res") / "corpus" / "doc0000.txt"));
  EXPECT_NE(synth_.out.find(" tracklets, "), std::string::npos);
}

TEST_F(Pipeline, SynthSeedOverrideChangesOutput) {
  ASSERT_EQ(cli("synth --seed 8 --out " + dir("seed8").string()).exit_code, 0);
  ASSERT_EQ(cli("synth --seed 7 --out " + dir("seed7").string()).exit_code, 0);
  EXPECT_NE(slurp(dir("seed8") / "tracklets.jsonl"), slurp(dir("world") / "tracklets.jsonl"));
  EXPECT_EQ(slurp(dir("seed7") / "tracklets.jsonl"), slurp(dir("world") / "tracklets.jsonl"));
}

TEST_F(Pipeline, SynthRejectsInvalidSpec) {
  std::ofstream(dir("bad.spec")) << "num_classes = 0\n";
  const Result r = cli("synth " + dir("bad.spec").string() + " --out " + dir("bad").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("InvalidSpec"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("num_classes"), std::string::npos) << r.err;
}

TEST_F(Pipeline, KeywordsCoverEveryClass) {
  ASSERT_EQ(keywords_.exit_code, 0) << keywords_.err;
  EXPECT_NE(keywords_.out.find(" keywords, "), std::string::npos);
  std::ifstream in(dir("keywords.jsonl"));
  std::set<std::string> lemmas;
  for (const auto& k : docdisc::read_keywords(in)) lemmas.insert(k.lemma);
  const auto truth = read_json(dir("world") / "truth.json");
  for (const auto& c : truth.at("classes")) EXPECT_TRUE(lemmas.count(c.get<std::string>())) << c;
}

TEST_F(Pipeline, KeywordsMissingCorpusNamesPath) {
  const std::string missing = dir("no_such_corpus").string();
  const Result r = cli("keywords --srt " + dir("world").string() + "/subtitles.srt --corpus " + missing +
                       " --lexicon " + dir("res").string() + "/lexicon.tsv --out " + dir("kw.jsonl").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST_F(Pipeline, AnalyzeDiscoversCategories) {
  ASSERT_EQ(analyze_.exit_code, 0) << analyze_.err;
  int categories = 0;
  std::istringstream(analyze_.out) >> categories;
  EXPECT_GE(categories, 5);
  for (const char* f : {"report.json", "iterations.jsonl", "eta.tsv", "model.txt"})
    EXPECT_TRUE(fs::exists(dir("run") / f)) << f;
}

TEST_F(Pipeline, AnalyzeIsReproducible) {
  for (const char* f : {"report.json", "iterations.jsonl", "eta.tsv", "model.txt"})
    EXPECT_EQ(slurp(dir("run") / f), slurp(dir("again") / f)) << f;
}

TEST_F(Pipeline, ZeroIterationsStopsAtInitialization) {
  EXPECT_TRUE(fs::exists(dir("run0") / "report.json"));
  EXPECT_FALSE(fs::exists(dir("run0") / "model.txt"));
  std::ifstream in(dir("run0") / "iterations.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 2);  // header plus initialization
}

TEST_F(Pipeline, IteratingImprovesDiscoveredMap) {
  ASSERT_EQ(evaluate("run0").exit_code, 0);
  const Result r2 = evaluate("run2");
  ASSERT_EQ(r2.exit_code, 0) << r2.err;
  EXPECT_NE(r2.out.find("discovered mAP"), std::string::npos);
  const auto m0 = read_json(dir("run0") / "eval" / "metrics.json");
  const auto m2 = read_json(dir("run2") / "eval" / "metrics.json");
  EXPECT_GT(m2.at("discovered_mAP").get<double>(), m0.at("discovered_mAP").get<double>());
  EXPECT_TRUE(fs::exists(dir("run2") / "eval" / "pr_tiger.csv"));
}

TEST_F(Pipeline, JointGroundingBeatsWordCounting) {
  const Result joint = evaluate("run");
  ASSERT_EQ(joint.exit_code, 0) << joint.err;
  EXPECT_NE(joint.out.find("grounding accuracy "), std::string::npos);
  const Result base = evaluate("run", "--grounding-baseline");
  EXPECT_NE(base.out.find("word-count grounding accuracy "), std::string::npos);
  const auto m = read_json(dir("run") / "eval" / "metrics.json");
  EXPECT_LT(m.at("grounding_accuracy_baseline").get<double>(), m.at("grounding_accuracy").get<double>());
}

TEST_F(Pipeline, ReportSummarizesIterations) {
  const Result r = cli("report --report " + dir("run").string() + "/report.json");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("iteration  tracklets", 0), 0u);
  EXPECT_NE(r.out.find("category "), std::string::npos);
}

TEST_F(Pipeline, UsageErrors) {
  EXPECT_EQ(cli("analyze --tracklets").exit_code, 2);
  EXPECT_EQ(cli("evaluate --report " + dir("nope.json").string() + " --ground-truth x --out y").exit_code, 2);
}
