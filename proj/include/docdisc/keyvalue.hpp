#pragma once

// Flat "key = value" files with '#' comments, shared by engine configs and
// world specs.

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "docdisc/text_pipeline.hpp"

namespace docdisc::kv {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

template <class Err>
std::vector<Entry> parse(std::istream& in, const std::string& what) {
  std::vector<Entry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string_view body = text_detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Err(what + " line " + std::to_string(line_no) + ": expected key = value");
    Entry e{std::string(text_detail::trim(body.substr(0, eq))), std::string(text_detail::trim(body.substr(eq + 1))),
            line_no};
    if (e.key.empty()) throw Err(what + " line " + std::to_string(line_no) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

template <class Err>
double to_double(const Entry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used == e.value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Err(e.key + ": expected a number, got '" + e.value + "'");
}

template <class Err>
long long to_int(const Entry& e) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(e.value, &used);
    if (used == e.value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Err(e.key + ": expected an integer, got '" + e.value + "'");
}

template <class Err>
std::uint64_t to_u64(const Entry& e) {
  try {
    std::size_t used = 0;
    if (!e.value.empty() && e.value[0] != '-') {
      const unsigned long long v = std::stoull(e.value, &used);
      if (used == e.value.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw Err(e.key + ": expected a non-negative integer, got '" + e.value + "'");
}

template <class Err>
bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "off") return false;
  throw Err(e.key + ": expected true or false, got '" + e.value + "'");
}

}  // namespace docdisc::kv
