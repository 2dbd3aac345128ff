#pragma once

#include <stdexcept>
#include <string>

namespace smallgeo {

// Root of every error the toolkit throws. Each subclass names one failure
// category so callers (and the CLI) can react without parsing messages.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class CorruptFileError : public Error {
  public:
    using Error::Error;
};

class UnsupportedFormatError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

class OutOfBoundsError : public Error {
  public:
    using Error::Error;
};

class SchemaMismatchError : public Error {
  public:
    using Error::Error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

class InvalidInputError : public Error {
  public:
    using Error::Error;
};

class EmptyClassError : public Error {
  public:
    using Error::Error;
};

class UnsplittableClassError : public Error {
  public:
    using Error::Error;
};

class DegenerateModelError : public Error {
  public:
    using Error::Error;
};

class NoSupervisionError : public Error {
  public:
    using Error::Error;
};

class TrainingDivergedError : public Error {
  public:
    using Error::Error;
};

class ProtocolError : public Error {
  public:
    using Error::Error;
};

class EmptyInputError : public Error {
  public:
    using Error::Error;
};

class LayoutError : public Error {
  public:
    using Error::Error;
};

// Raised by the pipeline; wraps an underlying failure with the stage that hit it.
class StageError : public Error {
  public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

} // namespace smallgeo
