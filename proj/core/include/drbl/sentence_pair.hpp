#pragma once

#include <string>
#include <vector>

#include "drbl/labels.hpp"

namespace drbl {

inline constexpr const char* kFirstMarker = "_FOL_";
inline constexpr const char* kLastMarker = "_EOL_";
inline constexpr const char* kUnknownToken = "UNK";

/// A labelled premise/hypothesis pair. Both token lists start with _FOL_ and
/// end with _EOL_.
struct SentencePair {
  std::string id;
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  Label label = Label::entailment;
};

}  // namespace drbl
