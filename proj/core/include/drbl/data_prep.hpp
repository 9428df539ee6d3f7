#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drbl/embeddings.hpp"
#include "drbl/sentence_pair.hpp"

namespace drbl {

struct SnliLoadStats {
  std::size_t records = 0;
  std::size_t kept = 0;
  std::size_t dropped_no_consensus = 0;
};

/// Reads newline-delimited SNLI records. Pairs labelled "-" are dropped.
/// Binary-parse fields, when present, provide the tokens.
std::vector<SentencePair> load_snli(const std::filesystem::path& path,
                                    SnliLoadStats* stats = nullptr);
std::vector<SentencePair> parse_snli(std::string_view contents, SnliLoadStats* stats = nullptr);

/// Whitespace split with trailing . , ! ? ; detached, wrapped in _FOL_/_EOL_.
std::vector<std::string> tokenize(std::string_view sentence);
/// Leaves of a bracketed binary parse, wrapped in _FOL_/_EOL_.
std::vector<std::string> tokenize_parse(std::string_view binary_parse);

/// `id<TAB>label<TAB>premise tokens<TAB>hypothesis tokens`, tokens space-joined.
void write_tokenized(const std::filesystem::path& path, std::span<const SentencePair> pairs);
std::vector<SentencePair> read_tokenized(const std::filesystem::path& path);

/// Loads SNLI records or, for `.tsv` files, pre-tokenized pairs.
std::vector<SentencePair> load_pairs(const std::filesystem::path& path,
                                     SnliLoadStats* stats = nullptr);

/// Unrestricted Damerau-Levenshtein distance (transposed pairs may be edited
/// further).
std::size_t damerau_levenshtein(std::string_view a, std::string_view b,
                                bool case_insensitive = false);

/// Most frequent in-vocabulary token within edit distance 2 (case-insensitive);
/// ties go to the smaller distance, then lexicographic order. The token must
/// be out of vocabulary.
std::optional<std::string> spell_correct(std::string_view token, const Vocabulary& vocab,
                                         std::size_t max_distance = 2);

/// Splits a run-together word into two in-vocabulary words.
std::optional<std::vector<std::string>> split_correct(std::string_view token,
                                                      const Vocabulary& vocab);

/// Tries lowercase, hyphen split, "un" split, spelling correction and
/// word splitting, in that order; UNK when nothing applies.
std::vector<std::string> recover_oov(std::string_view token, const Vocabulary& vocab);

/// Applies recover_oov to every out-of-vocabulary token.
std::vector<std::string> recover_sentence(std::span<const std::string> tokens,
                                          const Vocabulary& vocab);

/// Number of tokens that would map to UNK.
std::size_t count_unknown(std::span<const SentencePair> pairs, const Vocabulary& vocab);

std::string to_lower(std::string_view s);

}  // namespace drbl
