#pragma once

#include <stdexcept>
#include <string>

namespace apollo {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Precondition violated by an argument value (range, ordering, kind).
class InvalidArgument : public Error {
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

// Checkpoint magic/version mismatch or malformed payload.
class FormatError : public Error {
public:
    using Error::Error;
};

// Non-finite loss during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace apollo
