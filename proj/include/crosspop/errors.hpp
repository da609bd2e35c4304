#ifndef CROSSPOP_ERRORS_HPP
#define CROSSPOP_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace crosspop {

// All library errors carry a machine-parsable code in addition to the
// human-readable message. The CLI prints "error: <code>: <message>" and
// maps codes to exit statuses.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

#define CROSSPOP_DEFINE_ERROR(Name)                         \
  class Name : public Error {                               \
  public:                                                   \
    explicit Name(const std::string& message)               \
        : Error(#Name, message) {}                          \
  }

CROSSPOP_DEFINE_ERROR(IoError);
CROSSPOP_DEFINE_ERROR(MalformedRow);
CROSSPOP_DEFINE_ERROR(UnknownCountry);
CROSSPOP_DEFINE_ERROR(PrevalenceOutOfRange);
CROSSPOP_DEFINE_ERROR(DuplicateConflict);
CROSSPOP_DEFINE_ERROR(IndexOutOfRange);
CROSSPOP_DEFINE_ERROR(NonPositiveDiagonal);
CROSSPOP_DEFINE_ERROR(NotPositiveDefinite);
CROSSPOP_DEFINE_ERROR(SingularObservedBlock);
CROSSPOP_DEFINE_ERROR(InsufficientDraws);
CROSSPOP_DEFINE_ERROR(MismatchedDrawCounts);
CROSSPOP_DEFINE_ERROR(TooFewObservations);
CROSSPOP_DEFINE_ERROR(AllProposalsInvalid);
CROSSPOP_DEFINE_ERROR(MissingArtifact);
CROSSPOP_DEFINE_ERROR(ConfigError);

#undef CROSSPOP_DEFINE_ERROR

} // namespace crosspop

#endif
