#include "mtr/text.hpp"

namespace mtr {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (is_ascii_alnum(static_cast<unsigned char>(ch))) {
            current.push_back(to_lower_ascii(ch));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

size_t token_count(std::string_view text) {
    size_t count = 0;
    bool in_token = false;
    for (char ch : text) {
        if (is_ascii_alnum(static_cast<unsigned char>(ch))) {
            if (!in_token) {
                ++count;
                in_token = true;
            }
        } else {
            in_token = false;
        }
    }
    return count;
}

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::string collapse_to_single_line(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        out.push_back((ch == '\n' || ch == '\r') ? ' ' : ch);
    }
    return trim(out);
}

} // namespace mtr
