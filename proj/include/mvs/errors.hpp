#pragma once

#include <stdexcept>
#include <string>

namespace mvs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Token id outside the vocabulary, or a query that cannot be tokenized.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Video longer than the fixed frame budget, or empty.
class LengthError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed checkpoint, feature file, manifest or vocabulary on disk.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvs
