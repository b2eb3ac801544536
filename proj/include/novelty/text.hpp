#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules.
namespace novelty::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

// Collapse every whitespace run to one space and trim.
std::string normalize_whitespace(std::string_view s);

// Case-folded, whitespace-normalized form used for title equality.
std::string fold_title(std::string_view s);

// Lowercased alphanumeric terms; bytes >= 0x80 count as term characters so
// UTF-8 sequences are never split.
std::vector<std::string> terms(std::string_view s);

// Whole-word, case-insensitive phrase match ("this" does not match "thistle").
bool contains_phrase(std::string_view haystack, std::string_view phrase);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

// Removes a surrounding ``` fence (with optional language tag) if present.
std::string strip_code_fence(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view content);

// File-system safe rendering of an opaque identifier.
std::string safe_filename(std::string_view id);

} // namespace novelty::text
