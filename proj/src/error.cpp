#include "btembed/error.hpp"

namespace bt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::NonReflexive: return "NonReflexive";
    case ErrorKind::EmptyAlphabet: return "EmptyAlphabet";
    case ErrorKind::InvalidTree: return "InvalidTree";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::SeparationUnachievable: return "SeparationUnachievable";
    case ErrorKind::PathTooLong: return "PathTooLong";
    case ErrorKind::ArityExceeded: return "ArityExceeded";
    case ErrorKind::NoParse: return "NoParse";
    case ErrorKind::StepBudgetExceeded: return "StepBudgetExceeded";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace bt
