#pragma once

#include <cstdint>

#include "drbl/classifier.hpp"
#include "drbl/grad_check.hpp"

namespace drbl {

/// A random pair of sentences (markers included) of 3..max_tokens tokens drawn
/// from a vocabulary of `vocabulary_size` entries.
PairInput random_pair(std::size_t vocabulary_size, std::size_t max_tokens, std::mt19937_64& rng);

/// End-to-end gradient check of the full model in double precision with
/// dropout off, on one random pair. Embedding coordinates are sampled from
/// the rows the pair uses.
GradCheckReport model_grad_check(ModelConfig config, std::size_t max_tokens = 7,
                                 std::uint64_t seed = 1, const GradCheckOptions& options = {});

}  // namespace drbl
