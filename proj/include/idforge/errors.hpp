#ifndef IDFORGE_ERRORS_HPP
#define IDFORGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace idforge {

// Exit-code mapping used by the CLI:
//   ConfigError/ParseError -> 2, NumericalError -> 3, LayoutError -> 4.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/precondition violations on numeric inputs.
struct DimensionError : ConfigError {
    explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct LayoutError : std::runtime_error {
    explicit LayoutError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace idforge

#endif
