#include "simplexclf/error.hpp"

namespace simplexclf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeComponent: return "NegativeComponent";
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ZeroWithNonpositiveAlpha: return "ZeroWithNonpositiveAlpha";
    case ErrorCode::ZeroWithNonpositiveTheta: return "ZeroWithNonpositiveTheta";
    case ErrorCode::OutsideImage: return "OutsideImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::TestTooSmall: return "TestTooSmall";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::AllZeroRow: return "AllZeroRow";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> row, std::optional<std::size_t> column)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message),
      row_(row),
      column_(column) {}

bool Error::is_input_error() const noexcept {
  switch (code_) {
    case ErrorCode::IllConditioned:
    case ErrorCode::OutsideImage:
    case ErrorCode::IoError:
      return false;
    default:
      return true;
  }
}

}  // namespace simplexclf
