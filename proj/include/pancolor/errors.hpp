#pragma once

#include <stdexcept>
#include <string>

namespace pancolor {

// Bad inputs, shape mismatches, contract violations. CLI maps these to exit 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O failures: unreadable files, bad magic, unwritable directories. Exit 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses or parameters during optimization. Exit 2.
class TrainingDivergenceError : public std::runtime_error {
public:
    TrainingDivergenceError(const std::string& msg, long step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

}  // namespace pancolor
