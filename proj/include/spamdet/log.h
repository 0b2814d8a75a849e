#pragma once

#include <functional>
#include <string>

namespace spamdet {

using WarningSink = std::function<void(const std::string&)>;

// Warnings go to stderr unless a sink is installed (tests capture them).
void warn(const std::string& message);
WarningSink set_warning_sink(WarningSink sink);

}  // namespace spamdet
