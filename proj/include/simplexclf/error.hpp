#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace simplexclf {

enum class ErrorCode {
  NegativeComponent,
  AllZero,
  NotClosed,
  TooShort,
  ZeroWithNonpositiveAlpha,
  ZeroWithNonpositiveTheta,
  OutsideImage,
  DimensionMismatch,
  GroupTooSmall,
  ParameterOutOfRange,
  IllConditioned,
  TestTooSmall,
  LengthMismatch,
  EmptyGrid,
  EmptyInput,
  ParseError,
  AllZeroRow,
  MissingColumn,
  InvalidSpec,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library. Row/column are set when the error
// can be traced back to a specific input cell.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt,
        std::optional<std::size_t> column = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }
  std::optional<std::size_t> row() const noexcept { return row_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

  // True for errors caused by bad input data or configuration rather than a
  // numerical failure.
  bool is_input_error() const noexcept;

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<std::size_t> row_;
  std::optional<std::size_t> column_;
};

}  // namespace simplexclf
