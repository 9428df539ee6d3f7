#include "drbl/model_config.hpp"

#include <charconv>
#include <sstream>

#include "drbl/errors.hpp"

namespace drbl {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename N>
N parse_number(std::string_view key, std::string_view value) {
  N out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

struct ToggleField {
  const char* key;
  bool Ablations::*field;
};

constexpr ToggleField kToggles[] = {
    {"hidden_mlp", &Ablations::hidden_mlp},
    {"avg_pool", &Ablations::avg_pool},
    {"max_pool", &Ablations::max_pool},
    {"elem_prod", &Ablations::elem_prod},
    {"difference", &Ablations::difference},
    {"inference_pooling", &Ablations::inference_pooling},
    {"dep_infer", &Ablations::dep_infer},
    {"dep_enc", &Ablations::dep_enc},
};

}  // namespace

std::string_view activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden_dim == 0) throw ConfigError("r and d must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }
  if (dependent_reading_rounds < 1 || dependent_reading_rounds > 3) {
    throw ConfigError("dependent reading rounds must be 1, 2 or 3, got " +
                      std::to_string(dependent_reading_rounds));
  }
  if (!ablations.avg_pool && !ablations.max_pool) {
    throw ConfigError("at least one of max and average pooling must stay enabled");
  }
}

std::size_t ModelConfig::pooled_dim() const {
  const std::size_t blocks = (ablations.max_pool ? 1 : 0) + (ablations.avg_pool ? 1 : 0);
  return blocks * 2 * hidden_dim;
}

bool ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "r" || key == "embedding_dim") {
    embedding_dim = parse_number<std::size_t>(key, value);
  } else if (key == "d" || key == "hidden_dim") {
    hidden_dim = parse_number<std::size_t>(key, value);
  } else if (key == "mlp_hidden") {
    mlp_hidden_dim = parse_number<std::size_t>(key, value);
  } else if (key == "dropout") {
    dropout_rate = parse_number<double>(key, value);
  } else if (key == "activation") {
    if (value == "relu") {
      projection_activation = Activation::relu;
    } else if (value == "tanh") {
      projection_activation = Activation::tanh;
    } else {
      throw ConfigError("activation must be relu or tanh, got '" + std::string(value) + "'");
    }
  } else if (key == "rounds") {
    dependent_reading_rounds = parse_number<int>(key, value);
  } else if (key == "train_embeddings") {
    train_embeddings = parse_bool(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else {
    for (const auto& t : kToggles) {
      if (key == t.key) {
        ablations.*(t.field) = parse_bool(key, value);
        return true;
      }
    }
    return false;
  }
  return true;
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "r = " << embedding_dim << '\n'
      << "d = " << hidden_dim << '\n'
      << "mlp_hidden = " << mlp_hidden_dim << '\n'
      << "dropout = " << dropout_rate << '\n'
      << "activation = " << activation_name(projection_activation) << '\n'
      << "rounds = " << dependent_reading_rounds << '\n'
      << "train_embeddings = " << (train_embeddings ? "true" : "false") << '\n'
      << "seed = " << seed << '\n';
  for (const auto& t : kToggles) out << t.key << " = " << (ablations.*(t.field) ? "true" : "false") << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig config;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (!config.set(key, value)) throw ConfigError("unknown model setting '" + key + "'");
  }
  return config;
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<NamedConfiguration> ablation_configurations() {
  auto without = [](auto... fields) {
    Ablations a;
    ((a.*fields = false), ...);
    return a;
  };
  return {
      {"full", "full model", Ablations{}},
      {"no-hidden-mlp", "full - hidden MLP", without(&Ablations::hidden_mlp)},
      {"no-avg-pool", "full - average pooling", without(&Ablations::avg_pool)},
      {"no-max-pool", "full - max pooling", without(&Ablations::max_pool)},
      {"no-elem-prod", "full - elem. prd", without(&Ablations::elem_prod)},
      {"no-difference", "full - difference", without(&Ablations::difference)},
      {"no-diff-elem-prod", "full - diff & elem. prd",
       without(&Ablations::difference, &Ablations::elem_prod)},
      {"no-inference-pooling", "full - inference pooling",
       without(&Ablations::inference_pooling)},
      {"no-dep-infer", "full - dep. infer", without(&Ablations::dep_infer)},
      {"no-dep-enc", "full - dep. enc", without(&Ablations::dep_enc)},
      {"no-dep-enc-infer", "full - dep. enc & infer",
       without(&Ablations::dep_enc, &Ablations::dep_infer)},
  };
}

ModelConfig member_variant(const ModelConfig& base, std::string_view variant) {
  ModelConfig c = base;
  if (variant == "default") return c;
  if (variant == "tanh-projection") {
    c.projection_activation = Activation::tanh;
  } else if (variant == "one-round") {
    // Dependent reading only while encoding; the inference stage keeps p̄, q̄.
    c.ablations.dep_infer = false;
  } else if (variant == "three-round") {
    c.ablations.dep_infer = false;
    c.dependent_reading_rounds = 3;
  } else {
    throw ConfigError("unknown ensemble member variant '" + std::string(variant) + "'");
  }
  return c;
}

}  // namespace drbl
