#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace longtail {

// Flat "key = value" text. '#' starts a comment (whole line, or after
// whitespace at the end of a line). Duplicate keys are errors. Typed
// getters mark keys as used; reject_unknown() then reports leftovers.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in, std::string source = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);
    static KeyValueConfig from_pairs(
        const std::vector<std::pair<std::string, std::string>>& pairs);

    bool contains(std::string_view key) const;

    std::string get_string(std::string_view key, std::string fallback);
    double get_real(std::string_view key, double fallback);
    long long get_int(std::string_view key, long long fallback);
    std::uint64_t get_uint(std::string_view key, std::uint64_t fallback);
    bool get_bool(std::string_view key, bool fallback);
    // Comma-separated; an empty value yields an empty list.
    std::vector<std::string> get_list(std::string_view key, std::vector<std::string> fallback);

    void reject_unknown() const;

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };

    std::optional<Entry> take(std::string_view key);
    [[noreturn]] void fail(const Entry& entry, std::string_view key,
                           const std::string& message) const;

    std::map<std::string, Entry, std::less<>> entries_;
    std::set<std::string, std::less<>> used_;
    std::string source_;
};

} // namespace longtail
