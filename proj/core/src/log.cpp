#include "longtail/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace longtail {

namespace {

std::mutex& sink_mutex()
{
    static std::mutex m;
    return m;
}

WarningHandler& sink()
{
    static WarningHandler handler = [](std::string_view message) {
        std::cerr << "warning: " << message << '\n';
    };
    return handler;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(sink_mutex());
    return std::exchange(sink(), std::move(handler));
}

void warn(std::string_view message)
{
    std::lock_guard lock(sink_mutex());
    if (sink()) {
        sink()(message);
    }
}

} // namespace longtail
