#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drbl/attention.hpp"

namespace drbl {

/// Component switches. All true is the full model; each false removes one
/// component.
struct Ablations {
  bool hidden_mlp = true;
  bool avg_pool = true;
  bool max_pool = true;
  bool elem_prod = true;
  bool difference = true;
  bool inference_pooling = true;
  bool dep_infer = true;
  bool dep_enc = true;

  bool operator==(const Ablations&) const = default;
};

struct ModelConfig {
  std::size_t embedding_dim = 300;
  std::size_t hidden_dim = 450;
  std::size_t mlp_hidden_dim = 0;  // 0: same as hidden_dim
  double dropout_rate = 0.4;
  Activation projection_activation = Activation::relu;
  int dependent_reading_rounds = 2;
  bool train_embeddings = true;
  Ablations ablations;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t mlp_hidden() const { return mlp_hidden_dim ? mlp_hidden_dim : hidden_dim; }
  EnrichmentTerms enrichment_terms() const { return {ablations.difference, ablations.elem_prod}; }
  /// Width of U (and of V).
  std::size_t pooled_dim() const;
  /// Rounds actually used by the encoder once the dep_enc toggle is applied.
  int effective_rounds() const { return ablations.dep_enc ? dependent_reading_rounds : 1; }

  /// Applies one `key = value` setting. Returns false for an unknown key.
  bool set(std::string_view key, std::string_view value);
  /// Canonical `key = value` lines, one per field, fixed order.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  bool operator==(const ModelConfig&) const = default;
};

/// Parses `key = value` lines; `#` starts a comment. Later keys override.
std::map<std::string, std::string> parse_key_values(std::string_view text);

struct NamedConfiguration {
  std::string name;   // stable identifier
  std::string label;  // human-readable row title
  Ablations ablations;
};

/// The full model followed by the ten single/compound component removals.
std::vector<NamedConfiguration> ablation_configurations();

/// Ensemble member variants: "default", "tanh-projection", "one-round",
/// "three-round". Seed variants reuse "default" with another seed.
ModelConfig member_variant(const ModelConfig& base, std::string_view variant);

std::string_view activation_name(Activation a);

}  // namespace drbl
