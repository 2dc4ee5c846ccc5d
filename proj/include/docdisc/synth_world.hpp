#pragma once

// Synthetic documentaries: moving objects with Gaussian class features,
// fragmented into tracklets, narrated by noisy subtitles, plus the truth
// needed to score everything downstream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/keyvalue.hpp"
#include "docdisc/text_pipeline.hpp"
#include "docdisc/track_model.hpp"
#include "docdisc/version.hpp"

namespace docdisc {

struct WorldSpec {
  int num_classes = 5;
  int objects_per_class = 4;
  int feature_dim = 8;
  double separation = 6.0;        // pairwise class-mean distance, in within-class std devs
  double object_spread = 0.4;     // std dev of each object's offset from its class mean
  double fragmentation = 3.0;     // expected tracklets per object
  int max_gap_frames = 6;
  double keyword_noise = 0.2;     // noun mentions replaced by a wrong or absent keyword
  double pronoun_rate = 0.4;      // later mentions of an object made with a pronoun
  double mention_rate = 0.85;     // chance a subtitle slot narrates a visible object
  int synonym_classes = 0;        // first k classes are also called by an alternate lemma
  int jitter_ms = 400;
  int clutter_per_object = 1;
  double on_screen = 1.25;         // average number of objects visible at once
  double fps = 10.0;
  int min_visible_frames = 150;
  int max_visible_frames = 300;
  double max_speed = 3.0;         // pixels per frame
  int feature_stride = 2;
  int corpus_documents = 200;
  std::uint64_t seed = 7;

  void validate() const;
};

// Class vocabulary, alternate names for synonym classes, and nouns used for
// noise and narration filler.
namespace synth_detail {

inline const std::vector<std::string>& class_lemmas() {
  static const std::vector<std::string> v{"tiger", "langur", "koala",  "ostrich", "panda",  "walrus",
                                          "lemur", "bison",  "heron",  "otter",   "gecko",  "puffin"};
  return v;
}
inline const std::vector<std::string>& alternate_lemmas() {
  static const std::vector<std::string> v{"cub",   "monkey", "marsupial", "bird",   "bear",   "seal",
                                          "primate", "buffalo", "wader", "weasel", "lizard", "seabird"};
  return v;
}
inline const std::vector<std::string>& distractor_lemmas() {
  static const std::vector<std::string> v{"zebra", "giraffe", "hippo", "rhino", "jackal", "hyena", "falcon", "python"};
  return v;
}
inline const std::vector<std::string>& common_lemmas() {
  static const std::vector<std::string> v{"water", "river", "forest", "day",    "place",  "ground",
                                          "tree",  "sun",   "grass",  "time",   "animal", "creature"};
  return v;
}

}  // namespace synth_detail

inline void WorldSpec::validate() const {
  auto bad = [](const std::string& field, const std::string& why) { throw InvalidSpec(field + ": " + why); };
  auto rate = [&](const char* field, double v) {
    if (!(v >= 0.0 && v <= 1.0)) bad(field, "must lie in [0,1]");
  };
  const int vocab = static_cast<int>(synth_detail::class_lemmas().size());
  if (num_classes < 1 || num_classes > vocab) bad("num_classes", "must be between 1 and " + std::to_string(vocab));
  if (objects_per_class < 1) bad("objects_per_class", "must be >= 1");
  if (feature_dim < num_classes + 1) bad("feature_dim", "must be at least num_classes + 1");
  if (!(separation > 0)) bad("separation", "must be > 0");
  if (!(object_spread >= 0 && object_spread < 1)) bad("object_spread", "must lie in [0,1)");
  if (!(fragmentation >= 1)) bad("fragmentation", "must be >= 1");
  if (max_gap_frames < 1) bad("max_gap_frames", "must be >= 1");
  rate("keyword_noise", keyword_noise);
  rate("pronoun_rate", pronoun_rate);
  rate("mention_rate", mention_rate);
  if (synonym_classes < 0 || synonym_classes > num_classes) bad("synonym_classes", "must lie in [0, num_classes]");
  if (jitter_ms < 0) bad("jitter_ms", "must be >= 0");
  if (clutter_per_object < 0) bad("clutter_per_object", "must be >= 0");
  if (!(on_screen >= 1.0)) bad("on_screen", "must be >= 1");
  if (!(fps > 0)) bad("fps", "must be > 0");
  if (min_visible_frames < 20) bad("min_visible_frames", "must be >= 20");
  if (max_visible_frames < min_visible_frames) bad("max_visible_frames", "must be >= min_visible_frames");
  if (!(max_speed >= 0)) bad("max_speed", "must be >= 0");
  if (feature_stride < 1) bad("feature_stride", "must be >= 1");
  if (corpus_documents < 1) bad("corpus_documents", "must be >= 1");
}

inline WorldSpec parse_world_spec(std::istream& in) {
  WorldSpec s;
  for (const auto& e : kv::parse<InvalidSpec>(in, "world spec")) {
    const auto i = [&] { return static_cast<int>(kv::to_int<InvalidSpec>(e)); };
    const auto d = [&] { return kv::to_double<InvalidSpec>(e); };
    if (e.key == "num_classes") s.num_classes = i();
    else if (e.key == "objects_per_class") s.objects_per_class = i();
    else if (e.key == "feature_dim") s.feature_dim = i();
    else if (e.key == "separation") s.separation = d();
    else if (e.key == "object_spread") s.object_spread = d();
    else if (e.key == "fragmentation") s.fragmentation = d();
    else if (e.key == "max_gap_frames") s.max_gap_frames = i();
    else if (e.key == "keyword_noise") s.keyword_noise = d();
    else if (e.key == "pronoun_rate") s.pronoun_rate = d();
    else if (e.key == "mention_rate") s.mention_rate = d();
    else if (e.key == "synonym_classes") s.synonym_classes = i();
    else if (e.key == "jitter_ms") s.jitter_ms = i();
    else if (e.key == "clutter_per_object") s.clutter_per_object = i();
    else if (e.key == "on_screen") s.on_screen = d();
    else if (e.key == "fps") s.fps = d();
    else if (e.key == "min_visible_frames") s.min_visible_frames = i();
    else if (e.key == "max_visible_frames") s.max_visible_frames = i();
    else if (e.key == "max_speed") s.max_speed = d();
    else if (e.key == "feature_stride") s.feature_stride = i();
    else if (e.key == "corpus_documents") s.corpus_documents = i();
    else if (e.key == "seed") s.seed = kv::to_u64<InvalidSpec>(e);
    else throw InvalidSpec(e.key + ": unknown field (line " + std::to_string(e.line) + ")");
  }
  s.validate();
  return s;
}

struct ObjectTruth {
  int id = 0;
  std::string class_name;
  std::string lemma;            // the name the narration uses for this object
  std::vector<int> fragments;   // tracklet ids in temporal order
};

struct MentionTruth {
  int subtitle_index = 0;
  std::string kind;             // noun, pronoun, wrong, absent
  std::string word;             // word written in the subtitle
  int object = -1;              // intended referent
  std::string class_name;
};

struct WorldTruth {
  std::vector<std::string> class_names;
  std::map<std::string, std::string> lemma_class;  // every lemma that names a class
  std::map<int, int> tracklet_object;              // -1 for clutter
  std::map<int, std::string> tracklet_class;       // empty for clutter
  std::vector<ObjectTruth> objects;
  std::vector<MentionTruth> mentions;
};

struct World {
  WorldSpec spec;
  TrackletFile tracklets;
  std::vector<Subtitle> subtitles;
  GroundTruthFile ground_truth;
  WorldTruth truth;
  Lexicon lexicon;
  std::string lexicon_text;
  std::vector<std::string> corpus_texts;

  Corpus corpus() const {
    std::vector<Document> docs;
    for (const auto& text : corpus_texts) {
      Document doc;
      for (const auto& tok : tag_and_lemmatize(text, lexicon)) doc.add(tok.lemma);
      docs.push_back(std::move(doc));
    }
    return Corpus(std::move(docs));
  }
};

namespace synth_detail {

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }
  int uniform_int(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen); }
  double normal(double sd) { return sd > 0 ? std::normal_distribution<double>(0.0, sd)(gen) : 0.0; }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))]; }
};

constexpr double kFrameWidth = 1280;
constexpr double kFrameHeight = 720;

// Piecewise-linear path with direction changes every 40-80 frames.
inline std::vector<Box> trajectory(Rng& rng, int length, double max_speed) {
  const double w0 = rng.uniform(70, 120);
  const double h0 = w0 * rng.uniform(0.6, 0.9);
  const double grow = rng.uniform(-0.1, 0.1) / length;
  double x = rng.uniform(20, kFrameWidth - w0 - 20);
  double y = rng.uniform(20, kFrameHeight - h0 - 20);
  double vx = 0;
  double vy = 0;
  int next_turn = 0;
  std::vector<Box> boxes;
  for (int f = 0; f < length; ++f) {
    if (f == next_turn) {
      const double speed = rng.uniform(0.3, std::max(0.3, max_speed));
      const double angle = rng.uniform(0, 2 * std::numbers::pi);
      vx = speed * std::cos(angle);
      vy = speed * std::sin(angle);
      next_turn += rng.uniform_int(40, 80);
    }
    const double scale = 1.0 + grow * f;
    const Box b{x, y, w0 * scale, h0 * scale};
    boxes.push_back(b);
    x += vx;
    y += vy;
    if (x < 0 || x + b.w > kFrameWidth) {
      vx = -vx;
      x = std::clamp(x, 0.0, kFrameWidth - b.w);
    }
    if (y < 0 || y + b.h > kFrameHeight) {
      vy = -vy;
      y = std::clamp(y, 0.0, kFrameHeight - b.h);
    }
  }
  return boxes;
}

// Splits [0, length) into n pieces separated by gaps of 1..max_gap frames.
inline std::vector<std::pair<int, int>> fragment(Rng& rng, int length, int n, int max_gap) {
  std::vector<int> gaps;
  while (n > 1) {
    gaps.clear();
    int total_gap = 0;
    for (int k = 0; k + 1 < n; ++k) {
      gaps.push_back(rng.uniform_int(1, max_gap));
      total_gap += gaps.back();
    }
    if (length - total_gap >= 10 * n) break;
    --n;
  }
  if (n <= 1) return {{0, length}};
  int usable = length - std::accumulate(gaps.begin(), gaps.end(), 0);
  std::vector<double> weight(n);
  for (double& w : weight) w = rng.uniform(0.6, 1.4);
  const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<int> sizes(n);
  int assigned = 0;
  for (int k = 0; k < n; ++k) {
    sizes[k] = k + 1 < n ? std::max(10, static_cast<int>(usable * weight[k] / wsum)) : usable - assigned;
    assigned += sizes[k];
  }
  if (sizes.back() < 10) {  // rounding pushed the tail too short: rebalance evenly
    for (int k = 0; k < n; ++k) sizes[k] = usable / n + (k < usable % n ? 1 : 0);
  }
  std::vector<std::pair<int, int>> out;
  int at = 0;
  for (int k = 0; k < n; ++k) {
    out.push_back({at, at + sizes[k]});
    at += sizes[k] + (k + 1 < n ? gaps[k] : 0);
  }
  return out;
}

struct RawTracklet {
  int object = -1;
  int frame_start = 0;
  std::vector<Box> boxes;
  std::vector<double> objectness;
  std::vector<double> feature_center;
  double frame_sd = 1.0;
};

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace synth_detail

inline World generate(const WorldSpec& spec) {
  using namespace synth_detail;
  spec.validate();
  Rng rng(spec.seed);
  World world;
  world.spec = spec;

  const int K = spec.num_classes;
  const int D = spec.feature_dim;
  const double axis = spec.separation / std::sqrt(2.0);
  const double frame_sd = std::sqrt(1.0 - spec.object_spread * spec.object_spread);

  for (int c = 0; c < K; ++c) {
    const std::string& name = class_lemmas()[c];
    world.truth.class_names.push_back(name);
    world.truth.lemma_class[name] = name;
    if (c < spec.synonym_classes) world.truth.lemma_class[alternate_lemmas()[c]] = name;
  }

  // Objects: shuffled order, staggered so about on_screen are visible at a time.
  std::vector<int> object_class;
  for (int c = 0; c < K; ++c)
    for (int k = 0; k < spec.objects_per_class; ++k) object_class.push_back(c);
  std::shuffle(object_class.begin(), object_class.end(), rng.gen);

  const int mean_len = (spec.min_visible_frames + spec.max_visible_frames) / 2;
  const int spacing = std::max(1, static_cast<int>(mean_len / spec.on_screen));
  std::vector<RawTracklet> raw;
  int video_frames = 0;
  std::vector<int> per_class_seen(K, 0);
  for (std::size_t o = 0; o < object_class.size(); ++o) {
    const int c = object_class[o];
    ObjectTruth obj;
    obj.id = static_cast<int>(o);
    obj.class_name = class_lemmas()[c];
    obj.lemma = c < spec.synonym_classes && per_class_seen[c] % 2 == 1 ? alternate_lemmas()[c] : class_lemmas()[c];
    ++per_class_seen[c];
    world.truth.objects.push_back(obj);

    const int start = static_cast<int>(o) * spacing + rng.uniform_int(0, spacing / 2);
    const int length = rng.uniform_int(spec.min_visible_frames, spec.max_visible_frames);
    video_frames = std::max(video_frames, start + length);
    const std::vector<Box> path = trajectory(rng, length, spec.max_speed);
    world.ground_truth.tracks.push_back({obj.id, obj.class_name, start, path});

    std::vector<double> center(D, 0.0);
    center[c] = axis;
    for (double& v : center) v += rng.normal(spec.object_spread);
    const double base_obj = rng.uniform(0.55, 0.9);

    const double whole = std::floor(spec.fragmentation);
    const int n = static_cast<int>(whole) + (rng.bernoulli(spec.fragmentation - whole) ? 1 : 0);
    for (const auto& [a, b] : fragment(rng, length, n, spec.max_gap_frames)) {
      RawTracklet t;
      t.object = obj.id;
      t.frame_start = start + a;
      t.feature_center = center;
      t.frame_sd = frame_sd;
      for (int f = a; f < b; ++f) {
        const Box& g = path[f];
        t.boxes.push_back({g.x + rng.normal(1.0), g.y + rng.normal(1.0), std::max(1.0, g.w + rng.normal(0.5)),
                           std::max(1.0, g.h + rng.normal(0.5))});
        t.objectness.push_back(std::clamp(base_obj + rng.normal(0.05), 0.0, 1.0));
      }
      raw.push_back(std::move(t));
    }
  }

  // Clutter: short background tubes with their own feature mode.
  const int clutter = spec.clutter_per_object * static_cast<int>(object_class.size());
  for (int k = 0; k < clutter; ++k) {
    RawTracklet t;
    const int length = rng.uniform_int(20, 60);
    t.frame_start = rng.uniform_int(0, std::max(0, video_frames - length));
    t.boxes = trajectory(rng, length, 0.5);
    const double base_obj = rng.uniform(0.15, 0.6);
    for (int f = 0; f < length; ++f) t.objectness.push_back(std::clamp(base_obj + rng.normal(0.05), 0.0, 1.0));
    t.feature_center.assign(D, 0.0);
    t.feature_center[K] = axis;
    for (double& v : t.feature_center) v += rng.normal(1.0);
    t.frame_sd = frame_sd;
    raw.push_back(std::move(t));
  }

  std::stable_sort(raw.begin(), raw.end(), [](const RawTracklet& a, const RawTracklet& b) {
    return a.frame_start < b.frame_start;
  });
  world.tracklets.video_id = "synth-" + std::to_string(spec.seed);
  world.tracklets.fps = spec.fps;
  world.tracklets.feature_dim = D;
  world.ground_truth.video_id = world.tracklets.video_id;
  world.ground_truth.fps = spec.fps;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    RawTracklet& r = raw[k];
    Tracklet t;
    t.id = static_cast<int>(k) + 1;
    t.frame_start = r.frame_start;
    t.boxes = std::move(r.boxes);
    t.objectness = std::move(r.objectness);
    for (int f = 0; f < t.length(); f += spec.feature_stride) {
      t.feature_frames.push_back(t.frame_start + f);
      std::vector<double> v = r.feature_center;
      for (double& x : v) x += rng.normal(r.frame_sd);
      t.features.push_back(std::move(v));
    }
    t.members = {t.id};
    world.truth.tracklet_object[t.id] = r.object;
    world.truth.tracklet_class[t.id] = r.object >= 0 ? world.truth.objects[r.object].class_name : "";
    if (r.object >= 0) world.truth.objects[r.object].fragments.push_back(t.id);
    world.tracklets.tracklets.push_back(std::move(t));
  }

  // Narration: one subtitle slot every ~2 s, each about one visible object.
  static const std::vector<std::string> noun_templates{"Near the {c}, the {n}.", "In the {c} we find a {n}.",
                                                       "Look at the {c} and the {n}.", "By the {c} there is a {n}."};
  static const std::vector<std::string> pronoun_templates{"It moves slowly.", "Look, it turns around.",
                                                          "Its coat shines.", "It stops and waits."};
  static const std::vector<std::string> empty_templates{"What a quiet moment.", "Everything is calm now."};
  auto fill = [](std::string tpl, const std::string& common, const std::string& noun) {
    tpl.replace(tpl.find("{c}"), 3, common);
    tpl.replace(tpl.find("{n}"), 3, noun);
    return capitalize(tpl);
  };

  std::vector<bool> mentioned(object_class.size(), false);
  const auto& gts = world.ground_truth.tracks;
  const Millis video_ms = static_cast<Millis>(std::llround(video_frames * 1000.0 / spec.fps));
  Millis slot = 1000;
  int index = 1;
  while (slot + 1800 <= video_ms) {
    const int frame = static_cast<int>(slot * spec.fps / 1000.0);
    std::vector<int> visible;
    for (const auto& g : gts)
      if (frame >= g.frame_start && frame <= g.frame_end()) visible.push_back(g.id);
    Subtitle sub;
    sub.index = index;
    const Millis shift = spec.jitter_ms ? rng.uniform_int(-spec.jitter_ms, spec.jitter_ms) : 0;
    sub.start = std::max<Millis>(0, slot + shift);
    sub.end = sub.start + 1800;
    MentionTruth m;
    m.subtitle_index = index;
    if (!visible.empty() && rng.bernoulli(spec.mention_rate)) {
      const int o = rng.pick(visible);
      const ObjectTruth& obj = world.truth.objects[o];
      m.object = o;
      m.class_name = obj.class_name;
      const std::string& common = rng.pick(common_lemmas());
      if (mentioned[o] && rng.bernoulli(spec.pronoun_rate)) {
        m.kind = "pronoun";
        sub.text = rng.pick(pronoun_templates);
        m.word = sub.text.rfind("Its", 0) == 0 ? "its" : "it";
      } else if (rng.bernoulli(spec.keyword_noise)) {
        if (rng.bernoulli(0.5)) {
          m.kind = "wrong";
          std::vector<std::string> wrong = distractor_lemmas();
          for (int c = 0; c < K; ++c)
            if (class_lemmas()[c] != obj.class_name) wrong.push_back(class_lemmas()[c]);
          m.word = rng.pick(wrong);
        } else {
          m.kind = "absent";
          m.word = rng.pick(common_lemmas());
        }
        sub.text = fill(rng.pick(noun_templates), common, m.word);
      } else {
        m.kind = "noun";
        m.word = obj.lemma;
        sub.text = fill(rng.pick(noun_templates), common, m.word);
      }
      mentioned[o] = true;
    } else {
      m.kind = "none";
      sub.text = rng.pick(empty_templates);
    }
    world.subtitles.push_back(sub);
    world.truth.mentions.push_back(m);
    ++index;
    slot += 2000 + rng.uniform_int(-200, 200);
  }

  // Lexicon: every noun the narration or the corpus can produce.
  std::vector<std::string> nouns;
  for (const auto* list : {&class_lemmas(), &alternate_lemmas(), &distractor_lemmas(), &common_lemmas()})
    nouns.insert(nouns.end(), list->begin(), list->end());
  std::sort(nouns.begin(), nouns.end());
  world.lexicon_text = "# docdisc.lexicon " + std::to_string(kFormatVersion) + "\n";
  for (const auto& n : nouns) {
    world.lexicon.add(n, n);
    world.lexicon.add(n + "s", n);
    world.lexicon_text += n + "\t" + n + "\n" + n + "s\t" + n + "\n";
  }

  // Background corpus: every filler noun in every document, each animal
  // name in roughly one document in twenty.
  std::vector<std::string> animals;
  for (const auto* list : {&class_lemmas(), &alternate_lemmas(), &distractor_lemmas()})
    animals.insert(animals.end(), list->begin(), list->end());
  for (int d = 0; d < spec.corpus_documents; ++d) {
    std::string text;
    for (const auto& c : common_lemmas()) text += "The " + c + " is there. ";
    for (const auto& a : animals)
      if (rng.bernoulli(0.05)) text += "A " + a + " lives here. ";
    world.corpus_texts.push_back(std::move(text));
  }
  return world;
}

// ---------------------------------------------------------------------------
// Output.

inline nlohmann::json truth_to_json(const WorldTruth& t, const WorldSpec& spec) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : t.objects)
    objects.push_back({{"id", o.id}, {"class", o.class_name}, {"lemma", o.lemma}, {"fragments", o.fragments}});
  nlohmann::json tracklets = nlohmann::json::array();
  for (const auto& [id, obj] : t.tracklet_object)
    tracklets.push_back({{"id", id}, {"object", obj}, {"class", t.tracklet_class.at(id)}});
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& m : t.mentions)
    mentions.push_back({{"subtitle", m.subtitle_index},
                        {"kind", m.kind},
                        {"word", m.word},
                        {"object", m.object},
                        {"class", m.class_name}});
  return {{"format", "docdisc.truth"},
          {"version", kFormatVersion},
          {"seed", spec.seed},
          {"classes", t.class_names},
          {"lemma_class", t.lemma_class},
          {"objects", objects},
          {"tracklets", tracklets},
          {"mentions", mentions}};
}

inline WorldTruth truth_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "docdisc.truth") throw ParseError("not a docdisc truth file");
  WorldTruth t;
  try {
    t.class_names = j.at("classes").get<std::vector<std::string>>();
    t.lemma_class = j.at("lemma_class").get<std::map<std::string, std::string>>();
    for (const auto& o : j.at("objects"))
      t.objects.push_back({o.at("id").get<int>(), o.at("class").get<std::string>(), o.at("lemma").get<std::string>(),
                           o.at("fragments").get<std::vector<int>>()});
    for (const auto& r : j.at("tracklets")) {
      t.tracklet_object[r.at("id").get<int>()] = r.at("object").get<int>();
      t.tracklet_class[r.at("id").get<int>()] = r.at("class").get<std::string>();
    }
    for (const auto& m : j.at("mentions"))
      t.mentions.push_back({m.at("subtitle").get<int>(), m.at("kind").get<std::string>(),
                            m.at("word").get<std::string>(), m.at("object").get<int>(),
                            m.at("class").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("truth file: ") + e.what());
  }
  return t;
}

}  // namespace docdisc
