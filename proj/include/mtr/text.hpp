#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtr {

// Tokenization rule shared by token counting, BM25 indexing, and the hashed
// embedding provider: lowercase, split on every character outside ASCII
// [0-9A-Za-z], drop empty fragments. The ASCII restriction keeps the rule
// locale-independent; multi-byte UTF-8 sequences act as separators.

inline bool is_ascii_alnum(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline char to_lower_ascii(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::vector<std::string> tokenize(std::string_view text);

/// Number of tokens under the rule above. 0 iff the text contains no ASCII
/// alphanumeric character.
size_t token_count(std::string_view text);

/// FNV-1a 64-bit hash.
inline uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string trim(std::string_view text);

/// Collapse newlines to spaces and trim; rewriter outputs must be single-line.
std::string collapse_to_single_line(std::string_view text);

} // namespace mtr
