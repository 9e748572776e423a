#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edgeprobe {

// Base for all toolkit errors. Input/validation problems and runtime failures
// are distinguished so the CLI can map them to different exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input (config, corpus, dataset files).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ": " + what)
        , file_(std::move(file))
        , line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

// Tensor/parameter shape contract violated (length mismatch, arity mismatch).
class ShapeError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace edgeprobe
