#pragma once

#include <stdexcept>
#include <string>

namespace vqasoft {

/// Malformed input, violated precondition, or unreadable/unwritable file.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or parameter encountered during training.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace vqasoft
