#pragma once

#include <stdexcept>
#include <string>

namespace stylegate {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or truncated file contents (IDX, checkpoints, netpbm).
class FormatError : public Error {
public:
    using Error::Error;
};

// Tensor / checkpoint / dataset geometry disagreement.
class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace stylegate
