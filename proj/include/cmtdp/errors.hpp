#pragma once

#include <stdexcept>
#include <string>

namespace cmtdp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric parameter is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Malformed input data (dimension mismatch, empty data set, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The virtual valuation is undefined because the density vanished.
class UndefinedValuation : public Error {
public:
    using Error::Error;
};

/// Root bracketing exceeded its width cap.
class NoRoot : public Error {
public:
    using Error::Error;
};

/// Observations were fed to a policy out of time order.
class SequencingError : public Error {
public:
    using Error::Error;
};

}  // namespace cmtdp
