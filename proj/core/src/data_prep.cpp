#include "drbl/data_prep.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace drbl {
namespace {

bool is_terminal_punct(char c) { return c == '.' || c == ',' || c == '!' || c == '?' || c == ';'; }

std::vector<std::string> wrap(std::vector<std::string> core) {
  core.insert(core.begin(), kFirstMarker);
  core.push_back(kLastMarker);
  return core;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool is_special(std::string_view token) {
  return token == kFirstMarker || token == kLastMarker || token == kUnknownToken;
}

// Resolves one piece exactly or through its lowercase form.
std::optional<std::string> resolve_piece(std::string_view piece, const Vocabulary& vocab) {
  if (piece.empty()) return std::nullopt;
  if (vocab.contains(piece) && !is_special(piece)) return std::string(piece);
  const std::string lower = to_lower(piece);
  if (vocab.contains(lower) && !is_special(lower)) return lower;
  return std::nullopt;
}

std::string field(const nlohmann::json& record, const char* name, std::size_t line_no) {
  const auto it = record.find(name);
  if (it == record.end() || !it->is_string()) {
    throw ParseError(std::string("missing string field '") + name + "'", line_no);
  }
  return it->get<std::string>();
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> core;
  for (auto& chunk : split_ws(sentence)) {
    std::size_t end = chunk.size();
    while (end > 1 && is_terminal_punct(chunk[end - 1])) --end;
    core.push_back(chunk.substr(0, end));
    for (std::size_t i = end; i < chunk.size(); ++i) core.emplace_back(1, chunk[i]);
  }
  if (core.empty()) throw ContractError("tokenize: empty sentence");
  return wrap(std::move(core));
}

std::vector<std::string> tokenize_parse(std::string_view binary_parse) {
  std::vector<std::string> core;
  for (auto& chunk : split_ws(binary_parse)) {
    if (chunk == "(" || chunk == ")") continue;
    core.push_back(std::move(chunk));
  }
  if (core.empty()) throw ContractError("tokenize_parse: parse has no leaves");
  return wrap(std::move(core));
}

std::vector<SentencePair> parse_snli(std::string_view contents, SnliLoadStats* stats) {
  SnliLoadStats st;
  std::vector<SentencePair> pairs;
  std::size_t line_no = 0;
  while (!contents.empty()) {
    ++line_no;
    const auto nl = contents.find('\n');
    std::string_view line = contents.substr(0, nl);
    contents = nl == std::string_view::npos ? std::string_view() : contents.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (!record.is_object()) throw ParseError("record is not an object", line_no);
    ++st.records;
    const std::string gold = field(record, "gold_label", line_no);
    if (gold == "-") {
      ++st.dropped_no_consensus;
      continue;
    }
    const auto label = parse_label(gold);
    if (!label) {
      throw DataError("unknown label '" + gold + "' on line " + std::to_string(line_no));
    }
    SentencePair pair;
    pair.label = *label;
    if (auto it = record.find("pairID"); it != record.end() && it->is_string()) {
      pair.id = it->get<std::string>();
    } else {
      pair.id = std::to_string(line_no);
    }
    try {
      auto p1 = record.find("sentence1_binary_parse");
      auto p2 = record.find("sentence2_binary_parse");
      pair.premise = (p1 != record.end() && p1->is_string())
                         ? tokenize_parse(p1->get<std::string>())
                         : tokenize(field(record, "sentence1", line_no));
      pair.hypothesis = (p2 != record.end() && p2->is_string())
                            ? tokenize_parse(p2->get<std::string>())
                            : tokenize(field(record, "sentence2", line_no));
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
    pairs.push_back(std::move(pair));
  }
  st.kept = pairs.size();
  if (stats) *stats = st;
  return pairs;
}

std::vector<SentencePair> load_snli(const std::filesystem::path& path, SnliLoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_snli(buffer.str(), stats);
}

void write_tokenized(const std::filesystem::path& path, std::span<const SentencePair> pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& p : pairs) {
    out << p.id << '\t' << label_name(p.label) << '\t' << join(p.premise) << '\t'
        << join(p.hypothesis) << '\n';
  }
}

std::vector<SentencePair> read_tokenized(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<SentencePair> pairs;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    if (cols.size() != 4) throw ParseError("expected 4 tab-separated columns", line_no);
    const auto label = parse_label(cols[1]);
    if (!label) throw DataError("unknown label '" + cols[1] + "' on line " + std::to_string(line_no));
    SentencePair p{cols[0], split_ws(cols[2]), split_ws(cols[3]), *label};
    if (p.premise.empty() || p.hypothesis.empty()) throw ParseError("empty sentence", line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<SentencePair> load_pairs(const std::filesystem::path& path, SnliLoadStats* stats) {
  if (path.extension() == ".tsv") return read_tokenized(path);
  return load_snli(path, stats);
}

std::size_t damerau_levenshtein(std::string_view a_in, std::string_view b_in,
                                bool case_insensitive) {
  const std::string a = case_insensitive ? to_lower(a_in) : std::string(a_in);
  const std::string b = case_insensitive ? to_lower(b_in) : std::string(b_in);
  const std::size_t n = a.size(), m = b.size();
  const std::size_t inf = n + m;
  // Lowrance-Wagner with a sentinel row/column.
  std::vector<std::size_t> d((n + 2) * (m + 2));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 2) + j]; };
  at(0, 0) = inf;
  for (std::size_t i = 0; i <= n; ++i) {
    at(i + 1, 0) = inf;
    at(i + 1, 1) = i;
  }
  for (std::size_t j = 0; j <= m; ++j) {
    at(0, j + 1) = inf;
    at(1, j + 1) = j;
  }
  std::map<char, std::size_t> last_row;
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t last_match_col = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const auto found = last_row.find(b[j - 1]);
      const std::size_t i1 = found == last_row.end() ? 0 : found->second;
      const std::size_t j1 = last_match_col;
      std::size_t cost = 1;
      if (a[i - 1] == b[j - 1]) {
        cost = 0;
        last_match_col = j;
      }
      at(i + 1, j + 1) = std::min({at(i, j) + cost, at(i + 1, j) + 1, at(i, j + 1) + 1,
                                   at(i1, j1) + (i - i1 - 1) + 1 + (j - j1 - 1)});
    }
    last_row[a[i - 1]] = i;
  }
  return at(n + 1, m + 1);
}

std::optional<std::string> spell_correct(std::string_view token, const Vocabulary& vocab,
                                         std::size_t max_distance) {
  if (vocab.contains(token)) {
    throw ContractError("spell_correct: '" + std::string(token) + "' is already in the vocabulary");
  }
  struct Candidate {
    std::uint64_t count;
    std::size_t distance;
    const std::string* token;
  };
  std::optional<Candidate> best;
  const auto better = [](const Candidate& x, const Candidate& y) {
    if (x.count != y.count) return x.count > y.count;
    if (x.distance != y.distance) return x.distance < y.distance;
    return *x.token < *y.token;
  };
  const auto tokens = vocab.tokens();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& cand = tokens[i];
    if (is_special(cand)) continue;
    const std::size_t len_gap =
        cand.size() > token.size() ? cand.size() - token.size() : token.size() - cand.size();
    if (len_gap > max_distance) continue;
    const std::size_t dist = damerau_levenshtein(token, cand, true);
    if (dist > max_distance) continue;
    Candidate c{vocab.count(i), dist, &cand};
    if (!best || better(c, *best)) best = c;
  }
  if (!best) return std::nullopt;
  return *best->token;
}

std::optional<std::vector<std::string>> split_correct(std::string_view token,
                                                      const Vocabulary& vocab) {
  std::optional<std::vector<std::string>> best;
  std::uint64_t best_score = 0;
  for (std::size_t cut = 1; cut < token.size(); ++cut) {
    const auto left = resolve_piece(token.substr(0, cut), vocab);
    const auto right = resolve_piece(token.substr(cut), vocab);
    if (!left || !right) continue;
    const std::uint64_t score =
        std::min(vocab.count(*vocab.find(*left)), vocab.count(*vocab.find(*right)));
    if (!best || score > best_score) {
      best = std::vector<std::string>{*left, *right};
      best_score = score;
    }
  }
  return best;
}

std::vector<std::string> recover_oov(std::string_view token, const Vocabulary& vocab) {
  if (const std::string lower = to_lower(token); vocab.contains(lower) && !is_special(lower)) {
    return {lower};
  }
  if (token.find('-') != std::string_view::npos) {
    std::vector<std::string> parts;
    bool ok = true;
    std::size_t start = 0;
    while (start <= token.size()) {
      const auto dash = token.find('-', start);
      const auto piece = token.substr(start, dash == std::string_view::npos ? dash : dash - start);
      if (!piece.empty()) {
        auto resolved = resolve_piece(piece, vocab);
        if (!resolved) {
          ok = false;
          break;
        }
        parts.push_back(std::move(*resolved));
      }
      if (dash == std::string_view::npos) break;
      start = dash + 1;
    }
    if (ok && !parts.empty()) return parts;
  }
  if (token.size() > 2 && to_lower(token.substr(0, 2)) == "un") {
    const auto prefix = resolve_piece(token.substr(0, 2), vocab);
    const auto rest = resolve_piece(token.substr(2), vocab);
    if (prefix && rest) return {*prefix, *rest};
  }
  if (auto corrected = spell_correct(token, vocab)) return {*corrected};
  if (auto split = split_correct(token, vocab)) return *split;
  return {kUnknownToken};
}

std::vector<std::string> recover_sentence(std::span<const std::string> tokens,
                                          const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (vocab.contains(t)) {
      out.push_back(t);
      continue;
    }
    for (auto& r : recover_oov(t, vocab)) out.push_back(std::move(r));
  }
  return out;
}

std::size_t count_unknown(std::span<const SentencePair> pairs, const Vocabulary& vocab) {
  std::size_t n = 0;
  for (const auto& p : pairs) {
    for (const auto* s : {&p.premise, &p.hypothesis})
      for (const auto& t : *s)
        if (!vocab.contains(t) || t == kUnknownToken) ++n;
  }
  return n;
}

}  // namespace drbl
