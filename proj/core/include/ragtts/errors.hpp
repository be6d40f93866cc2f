#pragma once

#include <stdexcept>
#include <string>

namespace ragtts {

// Error taxonomy. The CLI maps these onto process exit codes:
//   ConfigError -> 1 (usage), DataError tree -> 2 (data), ModelError tree -> 3 (model).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or flag values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with data artifacts: corpora, indexes, report inputs.
class DataError : public Error {
 public:
  using Error::Error;
};

// A referenced key or file record does not exist.
class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

// On-disk artifact is malformed: bad magic, version, truncation, bad payload.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// A test item leaked into a retrieval pool.
class LeakageError : public DataError {
 public:
  using DataError::DataError;
};

// Problems inside the model: shapes, vocabulary, numerics, training.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ModelError {
 public:
  using ModelError::ModelError;
};

// Token id outside the configured vocabulary.
class VocabError : public ModelError {
 public:
  using ModelError::ModelError;
};

// NaN/Inf values or degenerate (near-zero) embeddings.
class NumericError : public ModelError {
 public:
  using ModelError::ModelError;
};

class TrainingError : public ModelError {
 public:
  using ModelError::ModelError;
};

}  // namespace ragtts
