#pragma once

#include <stdexcept>
#include <string>

namespace ntpp {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,       // bad flags, missing files, malformed data
  kValidation = 2,  // specification or configuration rejected
  kNumerical = 3,   // divergence during optimisation
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kUsage)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

// Malformed input file (positional diagnostics in the message).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

// Mark or variable index outside the declared vocabulary.
class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& what)
      : Error(what, ExitCode::kUsage) {}
};

// Mark vector violates the one-hot / multi-hot rule of the dataset mode.
class ModeError : public Error {
 public:
  explicit ModeError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

// Invalid model / generator / training configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(what, ExitCode::kValidation) {}
};

// Checkpoint groups incompatible with the receiving model.
class TransferError : public Error {
 public:
  explicit TransferError(const std::string& what)
      : Error(what, ExitCode::kValidation) {}
};

// Metric or analysis undefined on the given input (single-class targets,
// zero-length records, empty groups).
class AnalysisError : public Error {
 public:
  explicit AnalysisError(const std::string& what)
      : Error(what, ExitCode::kValidation) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(what, ExitCode::kNumerical) {}
};

}  // namespace ntpp
