#pragma once

// Subtitle ingestion and keyword mining: SRT parsing, pronoun
// substitution, lexicon-driven tagging/lemmatization and tf-idf selection.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "docdisc/error.hpp"
#include "docdisc/version.hpp"
#include "json.hpp"

namespace docdisc {

using Millis = std::int64_t;

struct Subtitle {
  int index = 0;
  Millis start = 0;
  Millis end = 0;
  std::string text;

  bool operator==(const Subtitle&) const = default;
};

enum class PosTag { kNoun, kPronoun, kOther };

struct Token {
  std::string surface;
  std::string lemma;
  PosTag pos = PosTag::kOther;
  int subtitle_index = 0;
};

struct Keyword {
  std::string lemma;
  Millis span_start = 0;
  Millis span_end = 0;
  double tfidf = 0.0;

  bool operator==(const Keyword&) const = default;
};

namespace text_detail {

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Splits on '\n', dropping a trailing '\r' from each line.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return lines;
}

inline bool parse_clock(std::string_view s, Millis& out) {
  // HH:MM:SS,mmm
  if (s.size() != 12 || s[2] != ':' || s[5] != ':' || s[8] != ',') return false;
  auto digits = [&](std::size_t at, std::size_t n, int& v) {
    v = 0;
    for (std::size_t i = at; i < at + n; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
      v = v * 10 + (s[i] - '0');
    }
    return true;
  };
  int h = 0, m = 0, sec = 0, ms = 0;
  if (!digits(0, 2, h) || !digits(3, 2, m) || !digits(6, 2, sec) || !digits(9, 3, ms)) return false;
  if (m >= 60 || sec >= 60) return false;
  out = ((static_cast<Millis>(h) * 60 + m) * 60 + sec) * 1000 + ms;
  return true;
}

inline std::string format_clock(Millis t) {
  const Millis ms = t % 1000;
  const Millis total_s = t / 1000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld,%03lld",
                static_cast<long long>(total_s / 3600), static_cast<long long>((total_s / 60) % 60),
                static_cast<long long>(total_s % 60), static_cast<long long>(ms));
  return buf;
}

// Word characters: ASCII alphanumerics, apostrophe, and any non-ASCII byte
// so that UTF-8 letters stay inside their word.
inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

struct WordSpan {
  std::size_t begin;
  std::size_t end;
};

// Typographic apostrophe (U+2019) is folded to ASCII before splitting.
inline std::string normalize_quotes(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

inline std::vector<WordSpan> word_spans(std::string_view text) {
  std::vector<WordSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    // Leading apostrophes are quote marks, not part of the word.
    std::size_t b = i;
    while (b < j && text[b] == '\'') ++b;
    if (b < j) spans.push_back({b, j});
    i = j;
  }
  return spans;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline const std::unordered_set<std::string>& pronouns() {
  static const std::unordered_set<std::string> kSet = {
      "it",  "its",  "itself", "he",     "him",   "his",    "himself", "she",
      "her", "hers", "herself", "they", "them", "their", "theirs", "themselves"};
  return kSet;
}

inline bool is_possessive_pronoun(std::string_view w) {
  return w == "its" || w == "his" || w == "her" || w == "hers" || w == "their" || w == "theirs";
}

}  // namespace text_detail

/// Noun lexicon: inflected form -> lemma. Every entry (and every lemma) is a
/// noun; anything else is tagged OTHER.
class Lexicon {
 public:
  void add(std::string_view form, std::string_view lemma) {
    std::string f = text_detail::to_lower(form);
    std::string l = text_detail::to_lower(lemma);
    if (f.empty() || l.empty()) throw ParseError("lexicon entries must be non-empty");
    forms_[f] = l;
    forms_.try_emplace(l, l);
  }

  std::optional<std::string> lemma_of(std::string_view lower_word) const {
    auto it = forms_.find(std::string(lower_word));
    if (it == forms_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return forms_.size(); }

  static Lexicon parse(std::istream& in) {
    Lexicon lex;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string_view view = text_detail::trim(line);
      if (view.empty() || view.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ParseError("lexicon line " + std::to_string(line_no) + ": expected form<TAB>lemma");
      std::string_view form = text_detail::trim(std::string_view(line).substr(0, tab));
      std::string_view lemma = text_detail::trim(std::string_view(line).substr(tab + 1));
      if (form.empty() || lemma.empty())
        throw ParseError("lexicon line " + std::to_string(line_no) + ": empty field");
      lex.add(form, lemma);
    }
    return lex;
  }

  static Lexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lexicon: " + path.string());
    return parse(in);
  }

 private:
  std::unordered_map<std::string, std::string> forms_;
};

/// Parses SRT text. Accepts LF or CRLF line endings and a UTF-8 BOM.
inline std::vector<Subtitle> parse_srt(std::string_view raw_text) {
  using namespace text_detail;
  if (raw_text.size() >= 3 && static_cast<unsigned char>(raw_text[0]) == 0xEF &&
      static_cast<unsigned char>(raw_text[1]) == 0xBB && static_cast<unsigned char>(raw_text[2]) == 0xBF)
    raw_text.remove_prefix(3);

  const std::vector<std::string> lines = split_lines(raw_text);
  std::vector<Subtitle> subs;
  std::size_t i = 0;
  auto where = [](std::size_t idx) { return "line " + std::to_string(idx + 1); };

  while (i < lines.size()) {
    if (trim(lines[i]).empty()) {
      ++i;
      continue;
    }
    Subtitle sub;
    const std::string index_text(trim(lines[i]));
    if (index_text.empty() || !std::all_of(index_text.begin(), index_text.end(),
                                           [](unsigned char c) { return std::isdigit(c); }))
      throw ParseError(where(i) + ": expected cue index, got '" + index_text + "'");
    sub.index = std::stoi(index_text);
    if (sub.index <= 0) throw ParseError(where(i) + ": cue index must be positive");
    if (!subs.empty() && sub.index <= subs.back().index)
      throw ParseError(where(i) + ": cue indices must be strictly increasing");
    ++i;

    if (i >= lines.size()) throw MalformedTimestamp(where(i) + ": missing timestamp line");
    const std::string_view stamp = trim(lines[i]);
    constexpr std::string_view kArrow = " --> ";
    Millis start = 0;
    Millis end = 0;
    if (stamp.size() != 12 + kArrow.size() + 12 || stamp.substr(12, kArrow.size()) != kArrow ||
        !parse_clock(stamp.substr(0, 12), start) || !parse_clock(stamp.substr(12 + kArrow.size()), end))
      throw MalformedTimestamp(where(i) + ": bad timestamp '" + std::string(stamp) + "'");
    if (start >= end)
      throw NonMonotonicCue(where(i) + ": cue start " + std::to_string(start) + " ms is not before end " +
                            std::to_string(end) + " ms");
    sub.start = start;
    sub.end = end;
    ++i;

    std::string text;
    while (i < lines.size() && !trim(lines[i]).empty()) {
      if (!text.empty()) text.push_back(' ');
      text += trim(lines[i]);
      ++i;
    }
    if (text.empty()) throw ParseError(where(i) + ": cue " + std::to_string(sub.index) + " has no text");
    sub.text = std::move(text);
    subs.push_back(std::move(sub));
  }
  return subs;
}

inline std::string format_srt(const std::vector<Subtitle>& subs) {
  std::string out;
  for (const auto& s : subs) {
    out += std::to_string(s.index);
    out += '\n';
    out += text_detail::format_clock(s.start) + " --> " + text_detail::format_clock(s.end);
    out += '\n';
    out += s.text;
    out += "\n\n";
  }
  return out;
}

namespace text_detail {

struct WordClass {
  PosTag pos;
  std::string lemma;
};

inline WordClass classify_word(std::string_view surface, const Lexicon& lexicon) {
  std::string w = to_lower(surface);
  if (pronouns().count(w)) return {PosTag::kPronoun, w};
  if (auto l = lexicon.lemma_of(w)) return {PosTag::kNoun, *l};

  // Contracted pronouns ("it's") keep their pronoun role.
  if (ends_with(w, "'s") && pronouns().count(w.substr(0, w.size() - 2)))
    return {PosTag::kPronoun, w.substr(0, w.size() - 2)};

  auto try_plural = [&](std::string_view stem) -> std::optional<std::string> {
    if (auto l = lexicon.lemma_of(stem)) return l;
    if (ends_with(stem, "es")) {
      if (auto l = lexicon.lemma_of(stem.substr(0, stem.size() - 2))) return l;
    }
    if (ends_with(stem, "s")) {
      if (auto l = lexicon.lemma_of(stem.substr(0, stem.size() - 1))) return l;
    }
    return std::nullopt;
  };

  std::string_view stem = w;
  if (ends_with(stem, "'s")) {
    stem.remove_suffix(2);
  } else if (ends_with(stem, "'")) {
    stem.remove_suffix(1);
  }
  if (auto l = try_plural(stem)) return {PosTag::kNoun, *l};

  std::string_view bare = w;
  while (!bare.empty() && bare.back() == '\'') bare.remove_suffix(1);
  return {PosTag::kOther, std::string(bare)};
}

}  // namespace text_detail

/// Tokenizes one subtitle. Out-of-lexicon words are OTHER with their
/// lowercased surface as lemma.
inline std::vector<Token> tag_and_lemmatize(const Subtitle& subtitle, const Lexicon& lexicon) {
  using namespace text_detail;
  const std::string text = normalize_quotes(subtitle.text);
  std::vector<Token> tokens;
  for (const auto& span : word_spans(text)) {
    std::string surface = text.substr(span.begin, span.end - span.begin);
    WordClass wc = classify_word(surface, lexicon);
    if (wc.lemma.empty()) continue;
    tokens.push_back({std::move(surface), std::move(wc.lemma), wc.pos, subtitle.index});
  }
  return tokens;
}

inline std::vector<Token> tag_and_lemmatize(std::string_view text, const Lexicon& lexicon) {
  return tag_and_lemmatize(Subtitle{0, 0, 1, std::string(text)}, lexicon);
}

/// Replaces each third-person pronoun with the lemma of the most recent
/// preceding noun, provided that noun sits at most `window` subtitles back.
/// A substituted pronoun counts as a fresh mention of its antecedent, which
/// makes the rewrite idempotent.
inline std::vector<Subtitle> resolve_coreference(const std::vector<Subtitle>& subtitles,
                                                 const Lexicon& lexicon, int window = 3) {
  using namespace text_detail;
  struct Antecedent {
    std::string lemma;
    std::size_t position;
  };
  std::optional<Antecedent> antecedent;
  std::vector<Subtitle> out;
  out.reserve(subtitles.size());

  for (std::size_t k = 0; k < subtitles.size(); ++k) {
    Subtitle sub = subtitles[k];
    const std::string text = normalize_quotes(sub.text);
    std::string rewritten;
    std::size_t cursor = 0;
    bool changed = false;
    for (const auto& span : word_spans(text)) {
      const std::string_view word = std::string_view(text).substr(span.begin, span.end - span.begin);
      const WordClass wc = classify_word(word, lexicon);
      if (wc.pos == PosTag::kNoun) {
        antecedent = Antecedent{wc.lemma, k};
      } else if (wc.pos == PosTag::kPronoun && antecedent &&
                 k - antecedent->position <= static_cast<std::size_t>(window)) {
        const std::string lower = to_lower(word);
        const bool possessive = is_possessive_pronoun(lower) || ends_with(lower, "'s");
        rewritten.append(text, cursor, span.begin - cursor);
        rewritten += antecedent->lemma;
        if (possessive) rewritten += "'s";
        cursor = span.end;
        antecedent->position = k;
        changed = true;
      }
    }
    if (changed) {
      rewritten.append(text, cursor, std::string::npos);
      sub.text = std::move(rewritten);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

/// A bag of lemmas.
class Document {
 public:
  Document() = default;
  explicit Document(const std::vector<std::string>& lemmas) {
    for (const auto& l : lemmas) add(l);
  }
  void add(const std::string& lemma, int n = 1) {
    counts_[lemma] += n;
    total_ += n;
  }
  int count(const std::string& lemma) const {
    auto it = counts_.find(lemma);
    return it == counts_.end() ? 0 : it->second;
  }
  int size() const { return total_; }
  bool empty() const { return total_ == 0; }
  const std::map<std::string, int>& counts() const { return counts_; }

 private:
  std::map<std::string, int> counts_;
  int total_ = 0;
};

class Corpus {
 public:
  explicit Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    if (documents_.empty()) throw EmptyDocument("corpus must contain at least one document");
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      if (documents_[i].empty()) throw EmptyDocument("corpus document " + std::to_string(i) + " is empty");
      for (const auto& [lemma, n] : documents_[i].counts()) df_[lemma] += 1;
    }
  }

  int document_count() const { return static_cast<int>(documents_.size()); }
  int document_frequency(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }
  const std::vector<Document>& documents() const { return documents_; }

  /// Every regular file in `dir` (sorted by name) becomes one document;
  /// files without any word are skipped.
  static Corpus load_directory(const std::filesystem::path& dir, const Lexicon& lexicon) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ParseError("corpus directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      Document doc;
      for (const auto& tok : tag_and_lemmatize(ss.str(), lexicon)) doc.add(tok.lemma);
      if (!doc.empty()) docs.push_back(std::move(doc));
    }
    if (docs.empty()) throw ParseError("corpus directory has no non-empty documents: " + dir.string());
    return Corpus(std::move(docs));
  }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, int> df_;
};

/// tf(term, document) * ln(N / max(df, 1)).
inline double tfidf_score(const std::string& term, const Document& document, const Corpus& corpus) {
  if (document.empty()) throw EmptyDocument("tf-idf requested for an empty document");
  const double tf = static_cast<double>(document.count(term)) / document.size();
  const int df = std::max(corpus.document_frequency(term), 1);
  const double idf = std::log(static_cast<double>(corpus.document_count()) / df);
  return tf * idf;
}

struct KeywordOptions {
  double threshold = 0.05;
  int coreference_window = 3;
};

/// Full keyword mining pass. The tf document is the multiset of noun lemmas
/// over the whole video, so inserting non-noun words never changes the result.
inline std::vector<Keyword> select_keywords(const std::vector<Subtitle>& subtitles, const Corpus& corpus,
                                            const Lexicon& lexicon, const KeywordOptions& options = {}) {
  const std::vector<Subtitle> resolved = resolve_coreference(subtitles, lexicon, options.coreference_window);
  std::vector<std::vector<Token>> tagged;
  tagged.reserve(resolved.size());
  Document video;
  for (const auto& sub : resolved) {
    tagged.push_back(tag_and_lemmatize(sub, lexicon));
    for (const auto& tok : tagged.back())
      if (tok.pos == PosTag::kNoun) video.add(tok.lemma);
  }
  if (video.empty()) return {};

  std::map<std::string, double> score;
  for (const auto& [lemma, n] : video.counts()) score[lemma] = tfidf_score(lemma, video, corpus);

  std::vector<Keyword> keywords;
  for (std::size_t k = 0; k < resolved.size(); ++k) {
    for (const auto& tok : tagged[k]) {
      if (tok.pos != PosTag::kNoun) continue;
      const double s = score.at(tok.lemma);
      if (s >= options.threshold) keywords.push_back({tok.lemma, resolved[k].start, resolved[k].end, s});
    }
  }
  return keywords;
}

inline std::vector<Keyword> select_keywords(const std::vector<Subtitle>& subtitles, const Corpus& corpus,
                                            double threshold, const Lexicon& lexicon) {
  return select_keywords(subtitles, corpus, lexicon, KeywordOptions{threshold, 3});
}

// Keyword files are JSON lines: a header record followed by one keyword per line.
inline void write_keywords(std::ostream& out, const std::vector<Keyword>& keywords) {
  nlohmann::json header = {{"format", "docdisc.keywords"}, {"version", kFormatVersion}, {"count", keywords.size()}};
  out << header.dump() << '\n';
  for (const auto& k : keywords) {
    nlohmann::json rec = {{"lemma", k.lemma},
                          {"span_start_ms", k.span_start},
                          {"span_end_ms", k.span_end},
                          {"tfidf", k.tfidf}};
    out << rec.dump() << '\n';
  }
}

inline std::vector<Keyword> read_keywords(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<Keyword> keywords;
  while (std::getline(in, line)) {
    ++line_no;
    if (text_detail::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("keyword file line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!header_seen) {
      if (rec.value("format", "") != "docdisc.keywords")
        throw ParseError("keyword file line 1: missing docdisc.keywords header");
      header_seen = true;
      continue;
    }
    try {
      Keyword k{rec.at("lemma").get<std::string>(), rec.at("span_start_ms").get<Millis>(),
                rec.at("span_end_ms").get<Millis>(), rec.at("tfidf").get<double>()};
      if (k.lemma.empty() || k.span_start >= k.span_end)
        throw ParseError("keyword file line " + std::to_string(line_no) + ": invalid keyword");
      keywords.push_back(std::move(k));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("keyword file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ParseError("keyword file is empty");
  return keywords;
}

}  // namespace docdisc
