#include "erag/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <unordered_set>

namespace erag {

namespace {

const std::unordered_set<std::string_view>& stop_words() {
    static const std::unordered_set<std::string_view> words = {
        "a",     "an",    "the",   "of",    "with",  "and",   "or",    "to",
        "in",    "on",    "at",    "is",    "are",   "was",   "were",  "be",
        "for",   "from",  "by",    "as",    "it",    "its",   "this",  "that",
        "these", "those", "there", "here",  "where", "what",  "which", "who",
        "whom",  "how",   "when",  "why",   "i",     "me",    "my",    "we",
        "our",   "you",   "your",  "they",  "them",  "their", "he",    "she",
        "his",   "her",   "do",    "does",  "did",   "can",   "could", "should",
        "would", "will",  "shall", "may",   "might", "must",  "have",  "has",
        "had",   "not",   "no",    "yes",   "please","find",  "show",  "tell",
        "about", "some",  "any",   "like",  "want",  "looking",
    };
    return words;
}

bool is_token_char(unsigned char c) {
    return std::isalnum(c) != 0 || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_token_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

bool is_stop_word(std::string_view token) {
    return stop_words().count(token) > 0;
}

std::vector<std::string> content_tokens(std::string_view text) {
    std::vector<std::string> tokens = tokenize(text);
    tokens.erase(std::remove_if(tokens.begin(), tokens.end(),
                                [](const std::string& t) { return is_stop_word(t); }),
                 tokens.end());
    return tokens;
}

int token_overlap(std::string_view query, std::string_view text) {
    auto q = content_tokens(query);
    std::unordered_set<std::string> qset(q.begin(), q.end());
    std::unordered_set<std::string> seen;
    int overlap = 0;
    for (auto& t : content_tokens(text)) {
        if (qset.count(t) && seen.insert(t).second) ++overlap;
    }
    return overlap;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split(std::string_view text, std::string_view sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            return parts;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + sep.size();
    }
}

std::string truncate_tokens(std::string_view text, int max_tokens) {
    if (max_tokens <= 0) return "";
    std::string out;
    int count = 0;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t begin = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (begin == i) break;
        if (count == max_tokens) return out;
        if (count > 0) out += ' ';
        out.append(text.substr(begin, i - begin));
        ++count;
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ull;
    for (char ch : bytes) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string fnv1a_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return std::string(buf);
}

std::string format_g(double value, int significant_digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, value);
    return std::string(buf);
}

bool parse_double(std::string_view text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace erag
