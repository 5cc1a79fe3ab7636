#pragma once

#include <stdexcept>
#include <string>

namespace sketchinpaint {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shapes disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A scalar argument is outside its valid range. The message names the field.
class ParameterError : public Error {
public:
    ParameterError(const std::string& field, const std::string& what)
        : Error("invalid parameter '" + field + "': " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Input data violates a value contract (non-binary mask, empty instance mask, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

// Corrupt checkpoint or inconsistent parameter partition.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Checkpoint format or architecture does not match what the caller expects.
class VersionError : public Error {
public:
    VersionError(const std::string& field, const std::string& what)
        : Error("version mismatch in '" + field + "': " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Manifest, corpus or config file could not be parsed.
class IngestionError : public Error {
public:
    IngestionError(const std::string& source, int line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace sketchinpaint
