#include "wmbench/text.hpp"

#include <cctype>

namespace wmbench {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::string first_words(std::string_view text, int max_words) {
    std::string out;
    int count = 0;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                if (count) out.push_back(' ');
                out += cur;
                cur.clear();
                if (++count >= max_words) return out;
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) {
        if (count) out.push_back(' ');
        out += cur;
    }
    return out;
}

} // namespace wmbench
