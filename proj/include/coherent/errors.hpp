#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coherent {

// Invalid sample/horizon/run configuration.
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class domain_error : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Grids or ensembles whose shapes do not agree.
class shape_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// The requested check is not supported for the model's support type.
class capability_error : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Non-finite value produced while simulating a path.
class numeric_error : public std::runtime_error {
public:
  numeric_error(const std::string& what, std::size_t path_index)
      : std::runtime_error(what + " (path " + std::to_string(path_index) + ")"),
        path_index_(path_index) {}

  std::size_t path_index() const noexcept { return path_index_; }

private:
  std::size_t path_index_;
};

// Failure inside one ensemble path; the original exception is nested.
class path_error : public std::runtime_error {
public:
  path_error(const std::string& what, std::size_t path_index)
      : std::runtime_error(what + " (path " + std::to_string(path_index) + ")"),
        path_index_(path_index) {}

  std::size_t path_index() const noexcept { return path_index_; }

private:
  std::size_t path_index_;
};

class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& what, std::size_t line)
      : std::runtime_error(what + " at line " + std::to_string(line)), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace coherent
