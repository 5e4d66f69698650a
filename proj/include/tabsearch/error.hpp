#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tabsearch {

// Every failure surfaced by the library derives from Error so callers can
// map it to an exit code in one place.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class EmptyCollection : public Error {
public:
    using Error::Error;
};

class EmptyTable : public Error {
public:
    using Error::Error;
};

class NoNumericValues : public Error {
public:
    using Error::Error;
};

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EmptyIndex : public Error {
public:
    using Error::Error;
};

class SealedIndex : public Error {
public:
    using Error::Error;
};

class IncompatibleIndex : public Error {
public:
    using Error::Error;
};

class ChecksumError : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed line in a TREC-style text file.
class FormatError : public Error {
public:
    FormatError(std::string path, std::size_t line, const std::string& reason)
        : Error(path + ":" + std::to_string(line) + ": " + reason),
          path_(std::move(path)),
          line_(line) {}

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

}  // namespace tabsearch
