#ifndef CPCDMA_ERRORS_HPP
#define CPCDMA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cpcdma {

struct SingularMatrix : std::runtime_error {
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

struct BadLength : std::invalid_argument {
    explicit BadLength(const std::string& what) : std::invalid_argument(what) {}
};

struct ShapeMismatch : std::invalid_argument {
    explicit ShapeMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct BadSpreadingFactor : std::invalid_argument {
    explicit BadSpreadingFactor(const std::string& what) : std::invalid_argument(what) {}
};

struct UnsupportedModulation : std::invalid_argument {
    explicit UnsupportedModulation(const std::string& what) : std::invalid_argument(what) {}
};

struct CpTooShort : std::invalid_argument {
    explicit CpTooShort(const std::string& what) : std::invalid_argument(what) {}
};

struct RoundOrderViolation : std::logic_error {
    explicit RoundOrderViolation(const std::string& what) : std::logic_error(what) {}
};

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& key, const std::string& reason)
        : std::runtime_error(key + ": " + reason), key(key) {}
    std::string key;
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpcdma

#endif
