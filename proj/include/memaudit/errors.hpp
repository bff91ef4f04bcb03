#pragma once

#include <stdexcept>
#include <string>

namespace memaudit {

/// Bad inputs or configuration. Mapped to CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures. Mapped to CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally broken input files (bad header, shape mismatch, ...).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lookup of an id that was never indexed/ingested.
class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Divergence or numeric failure inside an optimization loop.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& message, long step) : std::runtime_error(message), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

}  // namespace memaudit
