#pragma once

#include <functional>
#include <string_view>

namespace longtail {

using WarningHandler = std::function<void(std::string_view)>;

// Replaces the process-wide warning sink (stderr by default) and returns
// the previous one. Pass nullptr to silence warnings.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

} // namespace longtail
