#pragma once

#include <stdexcept>
#include <string>

namespace ocsfab {

// Root of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class CapacityExceeded : public Error {
public:
    using Error::Error;
};

}  // namespace ocsfab
