#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bt {

enum class ErrorKind {
  DuplicateName,
  NonReflexive,
  EmptyAlphabet,
  InvalidTree,
  DimensionTooSmall,
  SchemaMismatch,
  BudgetExceeded,
  SeparationUnachievable,
  PathTooLong,
  ArityExceeded,
  NoParse,
  StepBudgetExceeded,
  InvalidSpec,
  Io,
  Format,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can branch on it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace bt
