#pragma once

#include <stdexcept>
#include <string>

namespace fairhead {

// Every recoverable failure in the library surfaces as this type. The message
// names the offending file, group, label or seed so the CLI can print it as is.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fairhead
