#include "drbl/labels.hpp"

namespace drbl {

std::string_view label_name(Label label) {
  switch (label) {
    case Label::entailment:
      return "entailment";
    case Label::neutral:
      return "neutral";
    case Label::contradiction:
      return "contradiction";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view text) {
  for (Label l : kAllLabels)
    if (label_name(l) == text) return l;
  return std::nullopt;
}

}  // namespace drbl
