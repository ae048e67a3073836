#pragma once
// Small text helpers shared across the engine: case folding, whitespace
// handling, answer normalization, fuzzy label matching.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stem::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

// Decodes UTF-8 into codepoints. Invalid bytes decode as U+FFFD.
std::vector<uint32_t> utf8_decode(std::string_view s);

// Lowercases (ASCII), maps punctuation to spaces and collapses whitespace.
// Covers ASCII punctuation plus the common Unicode punctuation blocks that
// show up in KG labels (en/em dashes, curly quotes, ellipsis, NBSP).
std::string normalize_answer(std::string_view s);

// Levenshtein distance over codepoints.
size_t edit_distance(std::string_view a, std::string_view b);

// 1 - dist/max(len), computed on normalize_answer'd inputs. 1.0 for two
// empty strings.
double fuzzy_ratio(std::string_view a, std::string_view b);

bool starts_with(std::string_view s, std::string_view prefix);

std::vector<std::string> split(std::string_view s, char sep);

// Replaces every occurrence of `slot` in `tmpl` with `value`.
std::string replace_all(std::string tmpl, std::string_view slot,
                        std::string_view value);

}  // namespace stem::text
