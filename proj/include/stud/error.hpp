#pragma once

#include <stdexcept>
#include <string>

namespace stud {

// Invalid spec/config values. The message names the violated rule.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Evaluation cannot proceed (e.g. a truth class is missing from the stream).
class EvalError : public std::runtime_error {
public:
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stud
