#include "longtail/config.hpp"

#include "longtail/types.hpp"
#include "text.hpp"

#include <fstream>
#include <istream>

namespace longtail {

namespace {

std::string_view trim(std::string_view text)
{
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

std::string_view strip_comment(std::string_view line)
{
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
            return line.substr(0, i);
        }
    }
    return line;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, std::string source)
{
    KeyValueConfig config;
    config.source_ = std::move(source);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(strip_comment(line));
        if (content.empty()) {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) {
            throw Error(config.source_ + ":" + std::to_string(line_no)
                        + ": expected \"key = value\"");
        }
        const auto key = trim(content.substr(0, eq));
        const auto value = trim(content.substr(eq + 1));
        if (key.empty()) {
            throw Error(config.source_ + ":" + std::to_string(line_no) + ": empty key");
        }
        const auto [it, inserted] =
            config.entries_.emplace(std::string(key), Entry{std::string(value), line_no});
        if (!inserted) {
            throw Error(config.source_ + ":" + std::to_string(line_no) + ": duplicate key '"
                        + std::string(key) + "' (first set on line "
                        + std::to_string(it->second.line) + ")");
        }
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open config file " + path.string());
    }
    return parse(in, path.string());
}

KeyValueConfig KeyValueConfig::from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs)
{
    KeyValueConfig config;
    config.source_ = "<pairs>";
    std::size_t line = 0;
    for (const auto& [key, value] : pairs) {
        config.entries_[key] = Entry{value, ++line};
    }
    return config;
}

bool KeyValueConfig::contains(std::string_view key) const
{
    return entries_.find(key) != entries_.end();
}

std::optional<KeyValueConfig::Entry> KeyValueConfig::take(std::string_view key)
{
    used_.emplace(key);
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void KeyValueConfig::fail(const Entry& entry, std::string_view key,
                          const std::string& message) const
{
    throw Error(source_ + ":" + std::to_string(entry.line) + ": key '" + std::string(key)
                + "': " + message);
}

std::string KeyValueConfig::get_string(std::string_view key, std::string fallback)
{
    const auto entry = take(key);
    return entry ? entry->value : std::move(fallback);
}

double KeyValueConfig::get_real(std::string_view key, double fallback)
{
    const auto entry = take(key);
    if (!entry) {
        return fallback;
    }
    double value = 0.0;
    if (!detail::parse_number(std::string_view(entry->value), value)) {
        fail(*entry, key, "expected a number, got '" + entry->value + "'");
    }
    return value;
}

long long KeyValueConfig::get_int(std::string_view key, long long fallback)
{
    const auto entry = take(key);
    if (!entry) {
        return fallback;
    }
    long long value = 0;
    if (!detail::parse_number(std::string_view(entry->value), value)) {
        fail(*entry, key, "expected an integer, got '" + entry->value + "'");
    }
    return value;
}

std::uint64_t KeyValueConfig::get_uint(std::string_view key, std::uint64_t fallback)
{
    const auto entry = take(key);
    if (!entry) {
        return fallback;
    }
    std::uint64_t value = 0;
    if (!detail::parse_number(std::string_view(entry->value), value)) {
        fail(*entry, key, "expected a non-negative integer, got '" + entry->value + "'");
    }
    return value;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback)
{
    const auto entry = take(key);
    if (!entry) {
        return fallback;
    }
    if (entry->value == "true" || entry->value == "1" || entry->value == "yes") {
        return true;
    }
    if (entry->value == "false" || entry->value == "0" || entry->value == "no") {
        return false;
    }
    fail(*entry, key, "expected true or false, got '" + entry->value + "'");
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key,
                                                  std::vector<std::string> fallback)
{
    const auto entry = take(key);
    if (!entry) {
        return fallback;
    }
    std::vector<std::string> items;
    std::string_view rest = entry->value;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = trim(rest.substr(0, comma));
        if (item.empty()) {
            fail(*entry, key, "empty list item");
        }
        items.emplace_back(item);
        if (comma == std::string_view::npos) {
            break;
        }
        rest = rest.substr(comma + 1);
    }
    return items;
}

void KeyValueConfig::reject_unknown() const
{
    for (const auto& [key, entry] : entries_) {
        if (!used_.contains(key)) {
            throw Error(source_ + ":" + std::to_string(entry.line) + ": unknown key '" + key
                        + "'");
        }
    }
}

} // namespace longtail
