#pragma once

#include <stdexcept>
#include <string>

namespace ale {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bundle, instance, explanation document).
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// Shapes that do not agree (prototype dim vs latent dim, weights vs m, ...).
class DimensionError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

/// Index outside its domain (prototype, component or class).
class IndexError : public ValidationError
{
public:
  using ValidationError::ValidationError;
};

/// One dataset record that cannot be read; the records after it still can.
class InstanceError : public ValidationError
{
public:
  InstanceError(std::string id, const std::string& what)
    : ValidationError(what), id_(std::move(id))
  {
  }
  const std::string& id() const { return id_; }

private:
  std::string id_;
};

/// Two hyperspheres whose surfaces do not meet, beyond the allowed slack.
class EmptyIntersectionError : public Error
{
public:
  using Error::Error;
};

/// Centers closer than the slack; the intersection is not defined.
class CoincidentCentersError : public Error
{
public:
  using Error::Error;
};

/// An operation was asked for more work than its guard allows (e.g. 2^m corners).
class SizeLimitError : public Error
{
public:
  using Error::Error;
};

/// A precondition on the explanation's state (e.g. "must be verified") failed.
class StateError : public Error
{
public:
  using Error::Error;
};

} // namespace ale
