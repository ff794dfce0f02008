#pragma once

#include <charconv>
#include <string_view>
#include <system_error>
#include <vector>

namespace longtail::detail {

inline bool is_skippable(std::string_view line)
{
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

inline std::vector<std::string_view> tokenize(std::string_view line)
{
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
        pos = line.find_first_not_of(" \t\r", pos);
        if (pos == std::string_view::npos) {
            break;
        }
        const auto end = line.find_first_of(" \t\r", pos);
        tokens.push_back(line.substr(pos, end == std::string_view::npos ? end : end - pos));
        pos = end;
    }
    return tokens;
}

template <typename T>
bool parse_number(std::string_view token, T& out)
{
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

} // namespace longtail::detail
