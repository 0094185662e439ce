#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace salstm {

// The entity placeholder surface used throughout the corpus format.
inline constexpr const char* kTargetSurface = "TARGET";

using Timestamp = std::int64_t;  // seconds since the Unix epoch, UTC

namespace detail {

// Howard Hinnant's civil-date algorithms.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yr + (m <= 2));
}

inline int days_in_month(int y, int m) {
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && ((y % 4 == 0 && y % 100 != 0) || y % 400 == 0)) return 29;
  return lengths[m - 1];
}

}  // namespace detail

// Accepts "YYYY-MM-DD" and "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z'.
inline Timestamp parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char sep = 0, z = 0, extra = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d%c%c", &y, &mo, &d, &sep, &h, &mi,
                            &se, &z, &extra);
  bool shape_ok = false;
  if (n == 3) {
    shape_ok = true;
  } else if ((n == 7 || n == 8) && (sep == 'T' || sep == ' ')) {
    shape_ok = n == 7 || z == 'Z';
  }
  if (!shape_ok || y < 1 || mo < 1 || mo > 12 || d < 1 || d > detail::days_in_month(y, mo) ||
      h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 60) {
    throw std::runtime_error("bad ISO-8601 timestamp: '" + s + "'");
  }
  return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

inline std::string format_iso8601(Timestamp t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y, m, d;
  detail::civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>((rem / 60) % 60),
                static_cast<int>(rem % 60));
  return buf;
}

struct Token {
  std::string surface;
  bool is_target = false;
  std::optional<int> head;  // 1-based head index within the sentence, 0 = root
  std::optional<std::string> deprel;
};

struct Sentence {
  std::vector<Token> tokens;
  int target_index = 0;
  Timestamp download_time = 0;

  int size() const { return static_cast<int>(tokens.size()); }
};

struct Container {
  std::string entity_id;
  int label = 0;
  std::vector<Sentence> sentences;
  std::optional<Timestamp> death_time;

  Timestamp latest_download() const {
    Timestamp latest = sentences.front().download_time;
    for (const Sentence& s : sentences) latest = std::max(latest, s.download_time);
    return latest;
  }
};

struct Dataset {
  std::vector<Container> containers;

  std::size_t size() const { return containers.size(); }
};

// Checks the per-sentence invariants: target in range and anonymized, head
// indices valid, at most one root, head links acyclic.
inline void validate_sentence(const Sentence& s, const std::string& entity_id) {
  const int k = s.size();
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("entity '" + entity_id + "': " + what);
  };
  if (k < 1) fail("empty sentence");
  if (s.target_index < 0 || s.target_index >= k) {
    fail("target_index " + std::to_string(s.target_index) + " out of range (K=" +
         std::to_string(k) + ")");
  }
  if (!s.tokens[static_cast<std::size_t>(s.target_index)].is_target) {
    fail("token at target_index is not the TARGET placeholder");
  }
  int roots = 0;
  for (int i = 0; i < k; ++i) {
    const auto& head = s.tokens[static_cast<std::size_t>(i)].head;
    if (!head) continue;
    if (*head < 0 || *head > k) {
      fail("head " + std::to_string(*head) + " of token " + std::to_string(i) +
           " out of range");
    }
    if (*head == i + 1) fail("token " + std::to_string(i) + " is its own head");
    if (*head == 0) ++roots;
  }
  if (roots > 1) fail("more than one root in sentence");
  // Cycle check: walk every head chain, marking nodes by the walk that first
  // reached them. Re-entering the current walk means a cycle.
  std::vector<int> mark(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < k; ++i) {
    int node = i;
    while (mark[static_cast<std::size_t>(node)] == 0) {
      mark[static_cast<std::size_t>(node)] = i + 1;
      const auto& head = s.tokens[static_cast<std::size_t>(node)].head;
      if (!head || *head == 0) break;
      node = *head - 1;
      if (mark[static_cast<std::size_t>(node)] == i + 1) {
        fail("cyclic dependency heads");
      }
    }
  }
}

inline void validate_container(const Container& c) {
  if (c.entity_id.empty()) throw std::runtime_error("container with empty entity_id");
  if (c.label != 0 && c.label != 1) {
    throw std::runtime_error("entity '" + c.entity_id + "': label must be 0 or 1");
  }
  if (c.sentences.empty()) {
    throw std::runtime_error("entity '" + c.entity_id + "': container has no sentences");
  }
  for (const Sentence& s : c.sentences) validate_sentence(s, c.entity_id);
}

inline Container container_from_json(const nlohmann::json& j) {
  Container c;
  c.entity_id = j.at("entity_id").get<std::string>();
  c.label = j.at("label").get<int>();
  if (j.contains("death_time") && !j.at("death_time").is_null()) {
    c.death_time = parse_iso8601(j.at("death_time").get<std::string>());
  }
  for (const auto& js : j.at("sentences")) {
    Sentence s;
    s.download_time = parse_iso8601(js.at("download_time").get<std::string>());
    s.target_index = js.at("target_index").get<int>();
    for (const auto& jt : js.at("tokens")) {
      Token t;
      t.surface = jt.at("surface").get<std::string>();
      t.is_target = t.surface == kTargetSurface;
      if (jt.contains("head") && !jt.at("head").is_null()) t.head = jt.at("head").get<int>();
      if (jt.contains("deprel") && !jt.at("deprel").is_null()) {
        t.deprel = jt.at("deprel").get<std::string>();
      }
      s.tokens.push_back(std::move(t));
    }
    c.sentences.push_back(std::move(s));
  }
  std::stable_sort(c.sentences.begin(), c.sentences.end(),
                   [](const Sentence& a, const Sentence& b) {
                     return a.download_time < b.download_time;
                   });
  validate_container(c);
  return c;
}

inline nlohmann::json container_to_json(const Container& c) {
  nlohmann::json j;
  j["entity_id"] = c.entity_id;
  j["label"] = c.label;
  j["death_time"] = c.death_time ? nlohmann::json(format_iso8601(*c.death_time))
                                 : nlohmann::json(nullptr);
  nlohmann::json sentences = nlohmann::json::array();
  for (const Sentence& s : c.sentences) {
    nlohmann::json js;
    js["download_time"] = format_iso8601(s.download_time);
    js["target_index"] = s.target_index;
    nlohmann::json tokens = nlohmann::json::array();
    for (const Token& t : s.tokens) {
      nlohmann::json jt;
      jt["surface"] = t.surface;
      jt["head"] = t.head ? nlohmann::json(*t.head) : nlohmann::json(nullptr);
      jt["deprel"] = t.deprel ? nlohmann::json(*t.deprel) : nlohmann::json(nullptr);
      tokens.push_back(std::move(jt));
    }
    js["tokens"] = std::move(tokens);
    sentences.push_back(std::move(js));
  }
  j["sentences"] = std::move(sentences);
  return j;
}

// One container record per line; sentences are re-sorted by download time and
// all invariants enforced. Errors carry the offending line number.
inline Dataset load_dataset(std::istream& in, const std::string& origin = "<stream>") {
  Dataset ds;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Container c = container_from_json(nlohmann::json::parse(line));
      if (!seen.insert(c.entity_id).second) {
        throw std::runtime_error("duplicate entity_id '" + c.entity_id + "'");
      }
      ds.containers.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  return load_dataset(in, path);
}

inline void save_dataset(const Dataset& ds, std::ostream& out) {
  for (const Container& c : ds.containers) {
    out << container_to_json(c).dump() << '\n';
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file '" + path + "'");
  save_dataset(ds, out);
}

// Keeps the earliest max_sentences sentences and, per sentence, a
// max_tokens-wide token window chosen to contain the target:
//   start = clamp(target - max_tokens/2, 0, K - max_tokens).
// Heads pointing outside the window are dropped.
inline Container truncate_container(const Container& c, int max_sentences, int max_tokens) {
  Container out;
  out.entity_id = c.entity_id;
  out.label = c.label;
  out.death_time = c.death_time;
  const std::size_t keep =
      std::min<std::size_t>(c.sentences.size(), static_cast<std::size_t>(max_sentences));
  out.sentences.reserve(keep);
  for (std::size_t j = 0; j < keep; ++j) {
    const Sentence& s = c.sentences[j];
    const int k = s.size();
    if (k <= max_tokens) {
      out.sentences.push_back(s);
      continue;
    }
    const int start =
        std::clamp(s.target_index - max_tokens / 2, 0, k - max_tokens);
    Sentence t;
    t.download_time = s.download_time;
    t.target_index = s.target_index - start;
    t.tokens.reserve(static_cast<std::size_t>(max_tokens));
    for (int i = start; i < start + max_tokens; ++i) {
      Token tok = s.tokens[static_cast<std::size_t>(i)];
      if (tok.head) {
        const int h = *tok.head;
        if (h == 0) {
          // root stays root
        } else if (h - 1 >= start && h - 1 < start + max_tokens) {
          tok.head = h - start;
        } else {
          tok.head.reset();
          tok.deprel.reset();
        }
      }
      t.tokens.push_back(std::move(tok));
    }
    out.sentences.push_back(std::move(t));
  }
  return out;
}

inline Dataset truncate_dataset(const Dataset& ds, int max_sentences, int max_tokens) {
  Dataset out;
  out.containers.reserve(ds.containers.size());
  for (const Container& c : ds.containers) {
    out.containers.push_back(truncate_container(c, max_sentences, max_tokens));
  }
  return out;
}

}  // namespace salstm
