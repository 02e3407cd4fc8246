#ifndef MARRIAGE_ERRORS_HPP
#define MARRIAGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace marriage {

/// Invalid parameters, grids or configuration files. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Blow-up, non-convergence that cannot be reported in-band, broken invariants of a scheme.
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}

#endif
