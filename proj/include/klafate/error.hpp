#pragma once

#include <stdexcept>
#include <string>

namespace klafate {

// Root of every error the library throws. Callers that only need a message
// catch this; the subclasses exist so tests and the CLI can tell failure
// classes apart.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
  using Error::Error;
};

class NotFound : public Error {
public:
  using Error::Error;
};

class CapacityError : public Error {
public:
  using Error::Error;
};

class ConfigurationError : public Error {
public:
  using Error::Error;
};

class UndefinedStatistic : public Error {
public:
  using Error::Error;
};

} // namespace klafate
