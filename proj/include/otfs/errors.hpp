#pragma once

#include <stdexcept>
#include <string>

namespace otfs {

// Input has the wrong length or shape.
class input_size_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Value outside the set an operation is defined on (e.g. not a constellation point).
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Invalid configuration or parameter range.
class config_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An oracle declined an instance that exceeds its enumeration budget.
class refusal_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace otfs
