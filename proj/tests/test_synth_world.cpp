#include <gtest/gtest.h>

#include <sstream>

#include "docdisc/analysis_engine.hpp"
#include "docdisc/synth_world.hpp"

using namespace docdisc;

namespace {

WorldSpec single_object() {
  WorldSpec s;
  s.num_classes = 1;
  s.objects_per_class = 1;
  s.fragmentation = 1;
  s.keyword_noise = 0;
  s.clutter_per_object = 0;
  s.corpus_documents = 40;
  return s;
}

std::string tracklet_bytes(const World& w) {
  std::ostringstream out;
  write_tracklet_file(out, w.tracklets);
  return out.str();
}

}  // namespace

TEST(Generate, SingleObjectNoNoise) {
  const World w = generate(single_object());
  ASSERT_EQ(w.tracklets.tracklets.size(), 1u);
  ASSERT_EQ(w.ground_truth.tracks.size(), 1u);
  EXPECT_EQ(w.truth.tracklet_class.at(1), "tiger");
  EXPECT_EQ(w.truth.objects[0].fragments, std::vector<int>{1});
  const auto kws = select_keywords(w.subtitles, w.corpus(), w.lexicon);
  ASSERT_FALSE(kws.empty());
  for (const auto& k : kws) EXPECT_EQ(k.lemma, "tiger");
  int nouns = 0;
  for (const auto& m : w.truth.mentions) {
    EXPECT_TRUE(m.kind == "noun" || m.kind == "pronoun" || m.kind == "none") << m.kind;
    nouns += m.kind == "noun";
  }
  EXPECT_GT(nouns, 0);
}

TEST(Generate, FullPronounRate) {
  WorldSpec s;
  s.pronoun_rate = 1.0;
  const World w = generate(s);
  std::set<int> seen;
  int pronouns = 0;
  for (const auto& m : w.truth.mentions) {
    if (m.object < 0) continue;
    if (seen.count(m.object)) {
      EXPECT_EQ(m.kind, "pronoun") << "subtitle " << m.subtitle_index;
      ++pronouns;
    } else {
      EXPECT_NE(m.kind, "pronoun");
    }
    seen.insert(m.object);
  }
  EXPECT_GT(pronouns, 0);
}

TEST(Generate, SameSeedSameBytes) {
  const World a = generate(WorldSpec{});
  const World b = generate(WorldSpec{});
  EXPECT_EQ(tracklet_bytes(a), tracklet_bytes(b));
  EXPECT_EQ(format_srt(a.subtitles), format_srt(b.subtitles));
  EXPECT_EQ(truth_to_json(a.truth, a.spec), truth_to_json(b.truth, b.spec));
  WorldSpec other;
  other.seed = 8;
  EXPECT_NE(tracklet_bytes(a), tracklet_bytes(generate(other)));
}

TEST(Generate, OutputsRoundTrip) {
  const World w = generate(WorldSpec{});
  const std::string srt = format_srt(w.subtitles);
  EXPECT_EQ(parse_srt(srt), w.subtitles);

  std::istringstream in(tracklet_bytes(w));
  const TrackletFile back = read_tracklet_file(in);
  ASSERT_EQ(back.tracklets.size(), w.tracklets.tracklets.size());
  for (std::size_t k = 0; k < back.tracklets.size(); ++k) {
    EXPECT_EQ(back.tracklets[k].features, w.tracklets.tracklets[k].features);
    EXPECT_EQ(back.tracklets[k].objectness, w.tracklets.tracklets[k].objectness);
  }

  std::stringstream gt;
  write_ground_truth_file(gt, w.ground_truth);
  EXPECT_EQ(read_ground_truth_file(gt).tracks.size(), w.ground_truth.tracks.size());

  const WorldTruth t = truth_from_json(truth_to_json(w.truth, w.spec));
  EXPECT_EQ(t.tracklet_class, w.truth.tracklet_class);
  EXPECT_EQ(t.lemma_class, w.truth.lemma_class);
  EXPECT_EQ(t.mentions.size(), w.truth.mentions.size());

  std::istringstream lex(w.lexicon_text);
  const Lexicon parsed = Lexicon::parse(lex);
  EXPECT_EQ(tag_and_lemmatize("Two tigers.", parsed)[1].lemma, "tiger");
}

TEST(Generate, SynonymObjectsAlternateNames) {
  WorldSpec s;
  s.synonym_classes = 1;
  const World w = generate(s);
  std::set<std::string> tiger_names;
  for (const auto& o : w.truth.objects)
    if (o.class_name == "tiger") tiger_names.insert(o.lemma);
  EXPECT_EQ(tiger_names, (std::set<std::string>{"cub", "tiger"}));
  EXPECT_EQ(w.truth.lemma_class.at("cub"), "tiger");
}

TEST(Generate, NoiselessInitializationFindsTrueClasses) {
  WorldSpec s;
  s.keyword_noise = 0;
  s.pronoun_rate = 0;
  s.clutter_per_object = 0;
  const World w = generate(s);
  const auto kws = select_keywords(w.subtitles, w.corpus(), w.lexicon);
  const EngineConfig cfg;
  const auto& ts = w.tracklets.tracklets;
  const Initialization init = initialize(ts, kws, build_candidate_graph(ts, kws, w.tracklets.fps, cfg.graph), cfg);
  int objects = 0;
  int right = 0;
  for (const auto& t : ts) {
    const std::string& truth = w.truth.tracklet_class.at(t.id);
    const int z = init.state.labels.at(t.id);
    ++objects;
    if (z == kBackground) continue;
    const auto& lemmas = init.state.categories.lemmas.at(z);
    right += lemmas.size() == 1 && w.truth.lemma_class.at(*lemmas.begin()) == truth;
  }
  EXPECT_GE(right, objects * 9 / 10);
}

TEST(WorldSpec, InvalidFieldIsNamed) {
  WorldSpec s;
  s.num_classes = 0;
  try {
    generate(s);
    FAIL() << "expected InvalidSpec";
  } catch (const InvalidSpec& e) {
    EXPECT_NE(std::string(e.what()).find("num_classes"), std::string::npos);
  }
  s = {};
  s.pronoun_rate = 1.5;
  EXPECT_THROW(s.validate(), InvalidSpec);
  s = {};
  s.feature_dim = s.num_classes;
  EXPECT_THROW(s.validate(), InvalidSpec);
}

TEST(WorldSpec, ParsesKeyValueText) {
  std::istringstream in("# world\nnum_classes = 3\nseed = 11\non_screen = 2\n");
  const WorldSpec s = parse_world_spec(in);
  EXPECT_EQ(s.num_classes, 3);
  EXPECT_EQ(s.seed, 11u);
  EXPECT_DOUBLE_EQ(s.on_screen, 2.0);
  std::istringstream bad("num_classes = three\n");
  EXPECT_THROW(parse_world_spec(bad), InvalidSpec);
  std::istringstream unknown("colour = red\n");
  EXPECT_THROW(parse_world_spec(unknown), InvalidSpec);
}
