#pragma once
// Small string helpers used across modules.

#include <string>
#include <string_view>
#include <vector>

namespace wsieval {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercase, every run of non-alphanumerics collapsed to one space, trimmed.
// Used for substring matching (mock judge, MCQ option-text fallback).
std::string normalize_text(std::string_view s);

}  // namespace wsieval
