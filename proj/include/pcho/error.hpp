#pragma once

#include <stdexcept>
#include <string>

namespace pcho {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class TrajectoryError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  using Error::Error;
};

// Trace shorter than W + H.
class ShortTraceError : public Error {
 public:
  ShortTraceError(std::size_t length, std::size_t required)
      : Error("trace of length " + std::to_string(length) +
              " is too short; windowing requires at least " + std::to_string(required) + " steps"),
        length_(length),
        required_(required) {}
  std::size_t length() const { return length_; }
  std::size_t required() const { return required_; }

 private:
  std::size_t length_;
  std::size_t required_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class StepOrderError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcho
