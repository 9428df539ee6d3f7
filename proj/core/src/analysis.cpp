#include "drbl/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "drbl/data_prep.hpp"
#include "drbl/errors.hpp"

namespace drbl {
namespace {

constexpr Tag kTags[] = {Tag::entailment,      Tag::neutral,          Tag::contradiction,
                         Tag::high_overlap,    Tag::regular_overlap,  Tag::low_overlap,
                         Tag::long_sentence,   Tag::regular_sentence, Tag::short_sentence,
                         Tag::negation,        Tag::quantifier,       Tag::belief};

constexpr std::string_view kQuantifiers[] = {"much", "enough", "more",  "most",   "less",
                                             "least", "no",    "none",  "some",   "any",
                                             "many",  "few",   "several", "almost", "nearly"};
constexpr std::string_view kBeliefs[] = {"know",     "believe", "understand", "doubt",    "think",
                                         "suppose",  "recognize", "forget",   "remember", "imagine",
                                         "mean",     "agree",   "disagree",   "deny",     "promise"};
constexpr std::string_view kNegations[] = {"not",    "n't",   "no",   "never",   "none",   "nobody",
                                           "nothing", "neither", "nor", "nowhere", "cannot"};

bool is_punctuation(std::string_view token) {
  return std::all_of(token.begin(), token.end(),
                     [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; });
}

bool contains_word(std::span<const std::string> tokens, std::span<const std::string_view> words) {
  for (const auto& t : tokens) {
    if (std::find(words.begin(), words.end(), t) != words.end()) return true;
  }
  return false;
}

bool has_negation(std::span<const std::string> tokens) {
  for (const auto& t : tokens) {
    if (std::find(std::begin(kNegations), std::end(kNegations), t) != std::end(kNegations)) return true;
    if (t.size() > 3 && t.ends_with("n't")) return true;
  }
  return false;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> csv_split(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  out.push_back(std::move(cur));
  return out;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::span<const Tag> all_tags() { return kTags; }

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::entailment: return "Entailment";
    case Tag::neutral: return "Neutral";
    case Tag::contradiction: return "Contradiction";
    case Tag::high_overlap: return "High Overlap";
    case Tag::regular_overlap: return "Reg. Overlap";
    case Tag::low_overlap: return "Low Overlap";
    case Tag::long_sentence: return "Long Sentence";
    case Tag::regular_sentence: return "Reg. Sentence";
    case Tag::short_sentence: return "Short Sentence";
    case Tag::negation: return "Negation";
    case Tag::quantifier: return "Quantifier";
    case Tag::belief: return "Belief";
  }
  return "?";
}

bool TagSet::has(Tag tag) const {
  switch (tag) {
    case Tag::entailment: return gold == Label::entailment;
    case Tag::neutral: return gold == Label::neutral;
    case Tag::contradiction: return gold == Label::contradiction;
    case Tag::high_overlap: return high_overlap;
    case Tag::regular_overlap: return regular_overlap;
    case Tag::low_overlap: return low_overlap;
    case Tag::long_sentence: return long_sentence;
    case Tag::regular_sentence: return regular_sentence;
    case Tag::short_sentence: return short_sentence;
    case Tag::negation: return negation;
    case Tag::quantifier: return quantifier;
    case Tag::belief: return belief;
  }
  return false;
}

std::span<const std::string_view> quantifier_words() { return kQuantifiers; }
std::span<const std::string_view> belief_words() { return kBeliefs; }
std::span<const std::string_view> negation_words() { return kNegations; }

std::vector<std::string> content_tokens(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (t == kFirstMarker || t == kLastMarker || t.empty() || is_punctuation(t)) continue;
    out.push_back(to_lower(t));
  }
  return out;
}

double overlap_ratio(const SentencePair& pair) {
  const auto p = content_tokens(pair.premise);
  const auto h = content_tokens(pair.hypothesis);
  const std::set<std::string> premise(p.begin(), p.end());
  const std::set<std::string> hypothesis(h.begin(), h.end());
  if (hypothesis.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : hypothesis) shared += premise.count(t);
  return static_cast<double>(shared) / static_cast<double>(hypothesis.size());
}

TagSet annotate(const SentencePair& pair) {
  TagSet tags;
  tags.gold = pair.label;
  tags.overlap = overlap_ratio(pair);
  tags.high_overlap = tags.overlap > 0.7;
  tags.low_overlap = tags.overlap < 0.3;
  tags.regular_overlap = !tags.high_overlap && !tags.low_overlap;

  const auto p = content_tokens(pair.premise);
  const auto h = content_tokens(pair.hypothesis);
  const std::size_t lp = p.size(), lh = h.size();
  tags.long_sentence = lp > 20 || lh > 20;
  tags.short_sentence = lp < 5 || lh < 5;
  tags.regular_sentence = !tags.long_sentence && !tags.short_sentence;

  tags.negation = has_negation(p) || has_negation(h);
  tags.quantifier = contains_word(p, kQuantifiers) || contains_word(h, kQuantifiers);
  tags.belief = contains_word(p, kBeliefs) || contains_word(h, kBeliefs);
  return tags;
}

CategoricalReport categorical_accuracy(std::span<const std::vector<Label>> predictions,
                                       std::span<const std::string> model_names,
                                       std::span<const Label> gold, std::span<const TagSet> tags) {
  if (tags.size() != gold.size()) throw ContractError("categorical_accuracy: tags and gold differ in length");
  if (model_names.size() != predictions.size()) {
    throw ContractError("categorical_accuracy: one name per model required");
  }
  for (const auto& p : predictions) {
    if (p.size() != gold.size()) throw ContractError("categorical_accuracy: prediction length mismatch");
  }
  CategoricalReport report;
  report.total = gold.size();
  report.models.assign(model_names.begin(), model_names.end());
  for (Tag tag : kTags) {
    CategoryRow row;
    row.tag = tag;
    std::vector<std::size_t> hits(predictions.size(), 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (!tags[i].has(tag)) continue;
      ++row.count;
      for (std::size_t m = 0; m < predictions.size(); ++m) hits[m] += predictions[m][i] == gold[i];
    }
    row.frequency = gold.empty() ? 0.0 : 100.0 * static_cast<double>(row.count) / static_cast<double>(gold.size());
    for (std::size_t m = 0; m < predictions.size(); ++m) {
      if (row.count == 0) {
        row.accuracy.push_back(std::nullopt);
      } else {
        row.accuracy.push_back(100.0 * static_cast<double>(hits[m]) / static_cast<double>(row.count));
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(std::ostream& out, const CategoricalReport& report) {
  out << "tag\tfrequency";
  for (const auto& m : report.models) out << '\t' << m;
  out << '\n' << std::fixed << std::setprecision(1);
  for (const auto& row : report.rows) {
    out << tag_name(row.tag) << '\t' << row.frequency;
    for (const auto& a : row.accuracy) {
      out << '\t';
      if (a) {
        out << *a;
      } else {
        out << '-';
      }
    }
    out << '\n';
  }
  out << std::defaultfloat;
}

double chi_square_p_value(double statistic, double degrees_of_freedom) {
  if (!(statistic >= 0.0) || !std::isfinite(statistic)) {
    throw NumericError("chi-square statistic must be finite and non-negative");
  }
  if (statistic == 0.0) return 1.0;
  return boost::math::gamma_q(degrees_of_freedom / 2.0, statistic / 2.0);
}

ChiSquareResult chi_square_table(const std::array<std::array<double, 2>, 2>& table) {
  ChiSquareResult r;
  r.table = table;
  const double row0 = table[0][0] + table[0][1], row1 = table[1][0] + table[1][1];
  const double col0 = table[0][0] + table[1][0], col1 = table[0][1] + table[1][1];
  const double n = row0 + row1;
  const double rows[2] = {row0, row1}, cols[2] = {col0, col1};
  double stat = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = n > 0.0 ? rows[i] * cols[j] / n : 0.0;
      if (expected < 5.0) r.low_expected_count = true;
      if (expected > 0.0) stat += (table[i][j] - expected) * (table[i][j] - expected) / expected;
    }
  }
  r.statistic = stat;
  r.p_value = chi_square_p_value(stat);
  return r;
}

ChiSquareResult chi_square(std::span<const Label> outputs_a, std::span<const Label> outputs_b,
                           std::span<const Label> gold) {
  if (outputs_a.size() != gold.size() || outputs_b.size() != gold.size()) {
    throw ContractError("chi_square: label sequences differ in length");
  }
  std::array<std::array<double, 2>, 2> table{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    table[0][outputs_a[i] == gold[i] ? 0 : 1] += 1.0;
    table[1][outputs_b[i] == gold[i] ? 0 : 1] += 1.0;
  }
  return chi_square_table(table);
}

Heatmap heatmap_from_energy(const std::vector<std::vector<double>>& energy,
                            std::span<const std::string> premise,
                            std::span<const std::string> hypothesis) {
  if (energy.size() != premise.size()) {
    throw ContractError("heatmap: " + std::to_string(energy.size()) + " energy rows for " +
                        std::to_string(premise.size()) + " premise tokens");
  }
  Heatmap h;
  h.premise.assign(premise.begin(), premise.end());
  h.hypothesis.assign(hypothesis.begin(), hypothesis.end());
  for (const auto& row : energy) {
    if (row.size() != hypothesis.size()) {
      throw ContractError("heatmap: energy row has " + std::to_string(row.size()) + " columns for " +
                          std::to_string(hypothesis.size()) + " hypothesis tokens");
    }
    if (row.empty()) throw ContractError("heatmap: empty hypothesis");
    const double mx = *std::max_element(row.begin(), row.end());
    std::vector<double> w(row.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) sum += (w[j] = std::exp(row[j] - mx));
    for (auto& x : w) x /= sum;
    h.weights.push_back(std::move(w));
  }
  return h;
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& heatmap) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "premise\\hypothesis";
  for (const auto& t : heatmap.hypothesis) out << ',' << csv_field(t);
  out << '\n';
  for (std::size_t i = 0; i < heatmap.premise.size(); ++i) {
    out << csv_field(heatmap.premise[i]);
    for (double w : heatmap.weights[i]) out << ',' << w;
    out << '\n';
  }
}

Heatmap read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Heatmap h;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty heatmap file", 1);
  auto header = csv_split(line, 1);
  h.hypothesis.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = csv_split(line, line_no);
    if (cols.size() != h.hypothesis.size() + 1) throw ParseError("wrong number of columns", line_no);
    h.premise.push_back(cols[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cols.size(); ++j) {
      double v = 0.0;
      const auto& f = cols[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError("malformed weight '" + f + "'", line_no);
      }
      row.push_back(v);
    }
    h.weights.push_back(std::move(row));
  }
  return h;
}

void write_heatmap_svg(const std::filesystem::path& path, const Heatmap& heatmap) {
  constexpr int cell = 24, left = 120, top = 120;
  const int width = left + cell * static_cast<int>(heatmap.hypothesis.size()) + 10;
  const int height = top + cell * static_cast<int>(heatmap.premise.size()) + 10;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t j = 0; j < heatmap.hypothesis.size(); ++j) {
    const int x = left + cell * static_cast<int>(j) + cell / 2;
    out << "<text transform=\"translate(" << x << ',' << top - 6 << ") rotate(-60)\">"
        << xml_escape(heatmap.hypothesis[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < heatmap.premise.size(); ++i) {
    const int y = top + cell * static_cast<int>(i);
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << xml_escape(heatmap.premise[i]) << "</text>\n";
    for (std::size_t j = 0; j < heatmap.hypothesis.size(); ++j) {
      const double w = std::clamp(heatmap.weights[i][j], 0.0, 1.0);
      const int gray = static_cast<int>(std::lround(255.0 * (1.0 - w)));
      out << "<rect x=\"" << left + cell * static_cast<int>(j) << "\" y=\"" << y << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"rgb(" << gray << ',' << gray << ',' << gray
          << ")\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
    }
  }
  out << "</svg>\n";
}

Heatmap export_heatmap(const std::vector<std::vector<double>>& energy,
                       std::span<const std::string> premise, std::span<const std::string> hypothesis,
                       const std::filesystem::path& base) {
  Heatmap h = heatmap_from_energy(energy, premise, hypothesis);
  auto csv = base, svg = base;
  csv += ".csv";
  svg += ".svg";
  write_heatmap_csv(csv, h);
  write_heatmap_svg(svg, h);
  return h;
}

}  // namespace drbl
