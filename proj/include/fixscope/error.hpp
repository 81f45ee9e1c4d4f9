#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fixscope {

/// Base of every domain error raised by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define FIXSCOPE_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t offset, std::size_t line,
              std::size_t column)
      : Error("SyntaxError: " + message + " at line " + std::to_string(line) +
              ", column " + std::to_string(column) + " (offset " +
              std::to_string(offset) + ")"),
        message_(message),
        offset_(offset),
        line_(line),
        column_(column) {}

  const std::string& message() const { return message_; }
  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string message_;
  std::size_t offset_;
  std::size_t line_;
  std::size_t column_;
};

FIXSCOPE_DEFINE_ERROR(FormatError)
FIXSCOPE_DEFINE_ERROR(InvalidMapping)
FIXSCOPE_DEFINE_ERROR(EmptyPool)
FIXSCOPE_DEFINE_ERROR(SchemeMismatch)
FIXSCOPE_DEFINE_ERROR(ConfigError)
FIXSCOPE_DEFINE_ERROR(DimensionMismatch)
FIXSCOPE_DEFINE_ERROR(UnknownCluster)
FIXSCOPE_DEFINE_ERROR(UnlabeledModel)
FIXSCOPE_DEFINE_ERROR(KTooLarge)
FIXSCOPE_DEFINE_ERROR(EmptyPredictionSet)
FIXSCOPE_DEFINE_ERROR(OperatorInapplicable)
FIXSCOPE_DEFINE_ERROR(IoError)
FIXSCOPE_DEFINE_ERROR(VersionMismatch)
FIXSCOPE_DEFINE_ERROR(CorruptModel)
FIXSCOPE_DEFINE_ERROR(BindError)

#undef FIXSCOPE_DEFINE_ERROR

/// Raised by apply_script; carries the index of the action that failed.
class ApplyError : public Error {
 public:
  ApplyError(std::size_t action_index, const std::string& what)
      : Error("ApplyError: action " + std::to_string(action_index) + ": " + what),
        action_index_(action_index) {}

  std::size_t action_index() const { return action_index_; }

 private:
  std::size_t action_index_;
};

}  // namespace fixscope
