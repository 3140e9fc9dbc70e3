#pragma once

#include <functional>
#include <string>

namespace rmat {

using WarningSink = std::function<void(const std::string&)>;

// Routes diagnostics; the default sink prints "warning: ..." to stderr.
// Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace rmat
