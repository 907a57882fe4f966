#pragma once
// Text and formatting helpers used across the pipeline. The tokenizer and
// stop-word list are the fixed vocabulary rules behind all mock backend
// scoring, so they live here rather than inside the gateway.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace erag {

// Lowercase word tokens. Token characters are ASCII alphanumerics plus any
// byte >= 0x80 so UTF-8 words survive intact; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

// tokenize() minus the fixed stop-word list.
std::vector<std::string> content_tokens(std::string_view text);

bool is_stop_word(std::string_view token);

// Count of distinct content tokens shared by both texts.
int token_overlap(std::string_view query, std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> split(std::string_view text, std::string_view sep);

// Truncate to at most `max_tokens` whitespace-separated words.
std::string truncate_tokens(std::string_view text, int max_tokens);

// FNV-1a 64-bit, the digest used for map/forest binding and cache keys.
std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_hex(std::string_view bytes);

// Fixed-precision number rendering for the text formats: 9 significant
// digits for map files, 17 (exact double round-trip) for forest files.
std::string format_g(double value, int significant_digits);

bool parse_double(std::string_view text, double& out);

}  // namespace erag
