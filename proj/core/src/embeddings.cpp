#include "drbl/embeddings.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "drbl/ops.hpp"

namespace drbl {
namespace {

bool is_marker(const std::string& token) {
  return token == kFirstMarker || token == kLastMarker;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

}  // namespace

Vocabulary::Vocabulary() { ensure_specials(); }

std::size_t Vocabulary::add(const std::string& token, std::uint64_t count) {
  auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (inserted) {
    tokens_.push_back(token);
    counts_.push_back(count);
  } else {
    counts_[it->second] += count;
  }
  return it->second;
}

void Vocabulary::ensure_specials() {
  first_marker_ = add(kFirstMarker, 0);
  last_marker_ = add(kLastMarker, 0);
  unknown_ = add(kUnknownToken, 0);
}

Vocabulary Vocabulary::build(std::span<const SentencePair> training_pairs) {
  if (training_pairs.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.counts_.clear();
  vocab.index_.clear();
  for (const auto& pair : training_pairs) {
    for (const auto* sentence : {&pair.premise, &pair.hypothesis}) {
      for (const auto& token : *sentence) {
        if (!is_marker(token)) vocab.add(token, 1);
      }
    }
  }
  vocab.ensure_specials();
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens,
                                   std::span<const std::uint64_t> counts) {
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.counts_.clear();
  vocab.index_.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) throw DataError("duplicate vocabulary token '" + tokens[i] + "'");
    vocab.add(tokens[i], i < counts.size() ? counts[i] : 0);
  }
  vocab.ensure_specials();
  return vocab;
}

bool Vocabulary::contains(std::string_view token) const { return find(token).has_value(); }

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::index_or_unknown(std::string_view token) const {
  return find(token).value_or(unknown_);
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index_or_unknown(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary to " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

void Vocabulary::save_counts(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary counts to " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  std::vector<std::uint64_t> counts;
  std::filesystem::path counts_path = path;
  counts_path += ".counts";
  if (std::ifstream cin(counts_path); cin) {
    std::size_t line_no = 0;
    for (std::string line; std::getline(cin, line);) {
      ++line_no;
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw ParseError("malformed count line", line_no);
      std::uint64_t c = 0;
      const char* first = line.data() + tab + 1;
      const char* last = line.data() + line.size();
      if (std::from_chars(first, last, c).ec != std::errc()) {
        throw ParseError("malformed count", line_no);
      }
      counts.push_back(c);
    }
  }
  return from_tokens(tokens, counts);
}

template <typename T>
EmbeddingTable<T> EmbeddingTable<T>::random(const Vocabulary& vocab, std::size_t dim,
                                            std::mt19937_64& rng, bool trainable) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  std::normal_distribution<double> normal(0.0, 0.01);
  std::vector<T> values(vocab.size() * dim);
  for (auto& v : values) v = static_cast<T>(normal(rng));
  EmbeddingTable table;
  table.matrix = Tensor<T>::from({vocab.size(), dim}, std::move(values), trainable);
  table.trainable = trainable;
  table.frozen_rows = {vocab.unknown()};
  return table;
}

template <typename T>
Tensor<T> EmbeddingTable<T>::embed(Tape<T>& tape, std::span<const std::size_t> indices) const {
  return gather_rows(tape, matrix, indices, std::span<const std::size_t>(frozen_rows));
}

template <typename T>
EmbeddingTable<T> load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab,
                                  std::size_t dim, std::mt19937_64& rng, PretrainedReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pretrained vectors " + path.string());
  EmbeddingTable<T> table = EmbeddingTable<T>::random(vocab, dim, rng);
  auto values = table.matrix.mutable_values();
  std::vector<std::uint8_t> seen(vocab.size(), 0);
  std::vector<double> mean(dim, 0.0);
  PretrainedReport rep;
  rep.vocabulary = vocab.size();

  std::size_t line_no = 0;
  std::vector<double> parsed(dim);
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      if (rep.lines == 0) {
        throw ConfigError("pretrained vectors have dimension " + std::to_string(fields.size() - 1) +
                          ", configured embedding dimension is " + std::to_string(dim));
      }
      throw ParseError("expected a token and " + std::to_string(dim) + " values, got " +
                           std::to_string(fields.size()) + " fields",
                       line_no);
    }
    ++rep.lines;
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[j + 1];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), parsed[j]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError("malformed number '" + std::string(f) + "'", line_no);
      }
    }
    const auto index = vocab.find(fields[0]);
    if (!index || *index == vocab.unknown() || seen[*index]) continue;
    seen[*index] = 1;
    ++rep.covered;
    for (std::size_t j = 0; j < dim; ++j) {
      values[*index * dim + j] = static_cast<T>(parsed[j]);
      mean[j] += parsed[j];
    }
  }
  if (rep.covered == 0) {
    std::clog << "warning: no vocabulary token found in " << path.string()
              << "; all embeddings are randomly initialized\n";
  } else {
    for (std::size_t j = 0; j < dim; ++j) {
      values[vocab.unknown() * dim + j] = static_cast<T>(mean[j] / static_cast<double>(rep.covered));
    }
  }
  if (report) *report = rep;
  return table;
}

template struct EmbeddingTable<float>;
template struct EmbeddingTable<double>;
template EmbeddingTable<float> load_pretrained<float>(const std::filesystem::path&, const Vocabulary&,
                                                      std::size_t, std::mt19937_64&,
                                                      PretrainedReport*);
template EmbeddingTable<double> load_pretrained<double>(const std::filesystem::path&,
                                                        const Vocabulary&, std::size_t,
                                                        std::mt19937_64&, PretrainedReport*);

}  // namespace drbl
