#pragma once

#include <stdexcept>
#include <string>

namespace l0de {

/// Raised for invalid inputs and violated preconditions anywhere in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace l0de
