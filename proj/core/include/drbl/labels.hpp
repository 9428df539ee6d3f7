#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace drbl {

/// Class order is fixed everywhere: probability vectors, files, reports.
enum class Label : std::size_t { entailment = 0, neutral = 1, contradiction = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::entailment, Label::neutral,
                                                             Label::contradiction};

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view text);

inline std::size_t label_index(Label label) { return static_cast<std::size_t>(label); }

}  // namespace drbl
