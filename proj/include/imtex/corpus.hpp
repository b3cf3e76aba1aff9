#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "imtex/common.hpp"
#include "imtex/image.hpp"

namespace imtex {

enum class Source { printed, handwritten };

inline std::string source_name(Source s) {
  return s == Source::printed ? "printed" : "handwritten";
}

inline Source source_from_name(const std::string& s) {
  if (s == "printed") return Source::printed;
  if (s == "handwritten") return Source::handwritten;
  throw UsageError("unknown corpus profile: " + s);
}

/// One image/LaTeX pair. `latex` is always the cleaned form.
struct FormulaRecord {
  std::string id;
  Image image;
  std::string latex;
  Source source = Source::printed;
};

/// Per-rule accounting of dropped records. Invariant:
/// kept + sum(dropped_by_rule) == input_count.
struct CleaningReport {
  std::int64_t input_count = 0;
  std::int64_t kept = 0;
  std::map<std::string, std::int64_t> dropped_by_rule;

  void drop(const std::string& rule) { ++dropped_by_rule[rule]; }
  std::int64_t dropped_total() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : dropped_by_rule) n += v;
    return n;
  }
};

/// Deterministic, seeded assignment of record ids to train/val/test.
struct SplitManifest {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::string source = "generated";  // "generated" or "provided"
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
};

// ---------------------------------------------------------------------------
// LaTeX cleaning

enum class CleanReject { none, unbalanced_braces, empty_after_cleaning };

struct CleanResult {
  std::string text;
  CleanReject reject = CleanReject::none;
  bool ok() const { return reject == CleanReject::none; }
};

namespace detail {

// Returns the position one past the matching '}' for the '{' at `open`,
// honoring backslash escapes, or npos if unbalanced.
inline std::size_t match_brace(const std::string& s, std::size_t open) {
  int depth = 0;
  std::size_t i = open;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return i + 1;
    }
    ++i;
  }
  return std::string::npos;
}

// Finds `\name` at or after `pos` where the command name is not a prefix of
// a longer command (next char is not a letter).
inline std::size_t find_command(const std::string& s, const std::string& name,
                                std::size_t pos) {
  const std::string needle = "\\" + name;
  while (true) {
    std::size_t at = s.find(needle, pos);
    if (at == std::string::npos) return std::string::npos;
    std::size_t after = at + needle.size();
    if (after < s.size() && std::isalpha(static_cast<unsigned char>(s[after]))) {
      pos = at + 1;
      continue;
    }
    return at;
  }
}

inline std::string collapse_whitespace(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading whitespace trimmed
  for (char c : s) {
    const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (ws) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace detail

/// Number of Unicode codepoints in a UTF-8 string; "character length" for
/// the max_chars filter.
inline std::int64_t codepoint_length(const std::string& s) {
  std::int64_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

/// Applies the corpus cleaning rules:
///   - `\tag{...}` / `\tag*{...}` removed together with their brace-balanced
///     argument,
///   - `\text{X}` unwrapped (wrapper removed, content kept),
///   - `\begin{equation}` / `\end{equation}` and starred variants removed,
///   - whitespace collapsed to single spaces and trimmed.
/// Rejects when a targeted command has no balanced argument or the result
/// is empty. Idempotent on accepted strings.
inline CleanResult clean_latex(const std::string& input) {
  std::string s = input;

  // \tag{...} and \tag*{...}: drop the command and its argument.
  std::size_t pos = 0;
  while ((pos = detail::find_command(s, "tag", pos)) != std::string::npos) {
    std::size_t i = pos + 4;  // past "\tag"
    if (i < s.size() && s[i] == '*') ++i;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size() || s[i] != '{')
      return {"", CleanReject::unbalanced_braces};
    std::size_t end = detail::match_brace(s, i);
    if (end == std::string::npos) return {"", CleanReject::unbalanced_braces};
    s.erase(pos, end - pos);
  }

  // \text{X} -> X. Re-scan from the same position: the unwrapped content
  // may itself contain \text.
  pos = 0;
  while ((pos = detail::find_command(s, "text", pos)) != std::string::npos) {
    std::size_t i = pos + 5;  // past "\text"
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size() || s[i] != '{')
      return {"", CleanReject::unbalanced_braces};
    std::size_t end = detail::match_brace(s, i);
    if (end == std::string::npos) return {"", CleanReject::unbalanced_braces};
    const std::string content = s.substr(i + 1, end - i - 2);
    s = s.substr(0, pos) + content + s.substr(end);
  }

  // Equation environment markers: removed, inner content kept.
  for (const char* marker :
       {"\\begin{equation*}", "\\end{equation*}", "\\begin{equation}",
        "\\end{equation}"}) {
    std::size_t at = 0;
    const std::string m = marker;
    while ((at = s.find(m, at)) != std::string::npos) s.erase(at, m.size());
  }

  std::string out = detail::collapse_whitespace(s);
  if (out.empty()) return {"", CleanReject::empty_after_cleaning};
  return {out, CleanReject::none};
}

/// Keep a record iff its LaTeX length and image aspect ratio are within
/// bounds. Aspect ratio is height/width; "exceeding" is strict, so equality
/// is kept.
inline bool filter_record(const FormulaRecord& rec, std::int64_t max_chars = 200,
                          double max_aspect = 0.8) {
  if (codepoint_length(rec.latex) > max_chars) return false;
  const double aspect =
      static_cast<double>(rec.image.height) / rec.image.width;
  return aspect <= max_aspect;
}

// ---------------------------------------------------------------------------
// Splitting

/// Seeded split of an ordered id list. The permutation is a forward
/// Fisher-Yates shuffle driven by mt19937_64(seed) with j = i + rng()%(n-i);
/// the first floor(r0*N) shuffled ids go to train, the next floor(r1*N) to
/// val, the remainder to test.
inline SplitManifest split_dataset(const std::vector<std::string>& ids,
                                   const std::array<double, 3>& ratios,
                                   std::uint64_t seed) {
  if (ids.empty()) throw DataError("split_dataset: empty id list");
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw DataError("split_dataset: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw DataError("split_dataset: ratios must sum to 1");

  std::vector<std::string> shuffled = ids;
  fisher_yates_shuffle(shuffled, seed);

  const auto n = static_cast<std::int64_t>(shuffled.size());
  const auto n_train = static_cast<std::int64_t>(
      std::floor(ratios[0] * static_cast<double>(n)));
  const auto n_val = static_cast<std::int64_t>(
      std::floor(ratios[1] * static_cast<double>(n)));

  SplitManifest m;
  m.seed = seed;
  m.ratios = ratios;
  m.source = "generated";
  m.train_ids.assign(shuffled.begin(), shuffled.begin() + n_train);
  m.val_ids.assign(shuffled.begin() + n_train,
                   shuffled.begin() + n_train + n_val);
  m.test_ids.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "imtex-split-manifest";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["ratios"] = m.ratios;
  j["source"] = m.source;
  j["train_ids"] = m.train_ids;
  j["val_ids"] = m.val_ids;
  j["test_ids"] = m.test_ids;
  return j;
}

inline SplitManifest manifest_from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("format") || j["format"] != "imtex-split-manifest")
    throw DataError("not a split manifest document");
  SplitManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  const auto& r = j.at("ratios");
  for (int i = 0; i < 3; ++i) m.ratios[static_cast<std::size_t>(i)] = r.at(i);
  m.source = j.value("source", "generated");
  m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
  m.val_ids = j.at("val_ids").get<std::vector<std::string>>();
  m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  return m;
}

inline void save_manifest(const SplitManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

inline SplitManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read manifest: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("malformed manifest " + path + ": " + e.what());
  }
  return manifest_from_json(j);
}

inline nlohmann::ordered_json report_to_json(const CleaningReport& r) {
  nlohmann::ordered_json j;
  j["format"] = "imtex-cleaning-report";
  j["version"] = 1;
  j["input_count"] = r.input_count;
  j["kept"] = r.kept;
  j["dropped_by_rule"] = nlohmann::ordered_json::object();
  for (const auto& [rule, n] : r.dropped_by_rule)
    j["dropped_by_rule"][rule] = n;
  return j;
}

inline void save_report(const CleaningReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path);
  out << report_to_json(r).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Corpus loading
//
// On-disk layout:
//   <dir>/index.tsv                id<TAB>relative_image_path<TAB>latex
//   <dir>/<relative_image_path>    8-bit PNG
//   <dir>/splits/{train,val,test}.txt   (handwritten profile: one id/line)

struct LoadedCorpus {
  std::vector<FormulaRecord> records;
  CleaningReport report;
  std::optional<SplitManifest> provided_split;
};

namespace detail {

struct IndexLine {
  std::string id;
  std::string rel_path;
  std::string latex;
};

inline std::vector<IndexLine> parse_index(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open corpus index: " + file.string());
  std::vector<IndexLine> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 =
        t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError("corpus index line " + std::to_string(lineno) +
                      ": expected id<TAB>image<TAB>latex");
    IndexLine rec;
    rec.id = line.substr(0, t1);
    rec.rel_path = line.substr(t1 + 1, t2 - t1 - 1);
    rec.latex = line.substr(t2 + 1);
    if (rec.id.empty() || rec.rel_path.empty())
      throw DataError("corpus index line " + std::to_string(lineno) +
                      ": empty id or image path");
    lines.push_back(std::move(rec));
  }
  return lines;
}

inline std::vector<std::string> read_id_list(
    const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open split list: " + file.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace detail

/// Loads, cleans and (printed profile) filters a corpus directory. Records
/// keep index order. The handwritten profile skips the length/aspect filters
/// and reads its provided split lists from <dir>/splits/.
inline LoadedCorpus load_corpus(const std::string& dir, Source profile,
                                std::int64_t max_chars = 200,
                                double max_aspect = 0.8) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root))
    throw DataError("corpus directory does not exist: " + dir);

  LoadedCorpus out;
  const fs::path index = root / "index.tsv";
  if (!fs::exists(index)) return out;  // empty corpus

  const auto lines = detail::parse_index(index);
  out.report.input_count = static_cast<std::int64_t>(lines.size());

  // Per-record pipeline; image decoding dominates, so records are processed
  // in parallel and the report is reduced in index order afterwards.
  const std::size_t n = lines.size();
  std::vector<std::optional<FormulaRecord>> results(n);
  std::vector<const char*> drop_reason(n, nullptr);

  auto process = [&](std::size_t i) {
    const auto& line = lines[i];
    CleanResult cleaned = clean_latex(line.latex);
    if (!cleaned.ok()) {
      drop_reason[i] = cleaned.reject == CleanReject::unbalanced_braces
                           ? "unbalanced_braces"
                           : "empty_after_cleaning";
      return;
    }
    if (profile == Source::printed &&
        codepoint_length(cleaned.text) > max_chars) {
      drop_reason[i] = "max_chars";
      return;
    }
    auto image = read_png((root / line.rel_path).string());
    if (!image) {
      drop_reason[i] = "image_unreadable";
      return;
    }
    FormulaRecord rec{line.id, std::move(*image), cleaned.text, profile};
    if (profile == Source::printed && !filter_record(rec, max_chars, max_aspect)) {
      drop_reason[i] = "max_aspect";
      return;
    }
    results[i] = std::move(rec);
  };

  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers =
      n > 64 ? std::min<std::size_t>(hw ? hw : 2, 8) : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) process(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) process(i);
      });
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      out.records.push_back(std::move(*results[i]));
      ++out.report.kept;
    } else {
      out.report.drop(drop_reason[i]);
    }
  }

  if (profile == Source::handwritten) {
    const fs::path splits = root / "splits";
    if (!fs::is_directory(splits))
      throw DataError(
          "handwritten corpus requires provided splits: " + splits.string());
    std::vector<std::string> kept_ids;
    kept_ids.reserve(out.records.size());
    for (const auto& r : out.records) kept_ids.push_back(r.id);
    const auto kept_set =
        std::set<std::string>(kept_ids.begin(), kept_ids.end());
    SplitManifest m;
    m.seed = 0;
    m.source = "provided";
    auto read_kept = [&](const char* name) {
      std::vector<std::string> ids;
      for (auto& id : detail::read_id_list(splits / name))
        if (kept_set.count(id)) ids.push_back(std::move(id));
      return ids;
    };
    m.train_ids = read_kept("train.txt");
    m.val_ids = read_kept("val.txt");
    m.test_ids = read_kept("test.txt");
    const double total = static_cast<double>(
        m.train_ids.size() + m.val_ids.size() + m.test_ids.size());
    if (total > 0)
      m.ratios = {m.train_ids.size() / total, m.val_ids.size() / total,
                  m.test_ids.size() / total};
    out.provided_split = std::move(m);
  }

  return out;
}

}  // namespace imtex
