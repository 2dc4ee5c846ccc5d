#pragma once

#include <stdexcept>
#include <string>

namespace docdisc {

// Base for every error raised by the library. `code()` is a stable
// identifier that the CLI prints alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define DOCDISC_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {}  \
  };

DOCDISC_DEFINE_ERROR(ParseError)
DOCDISC_DEFINE_ERROR(MalformedTimestamp)
DOCDISC_DEFINE_ERROR(NonMonotonicCue)
DOCDISC_DEFINE_ERROR(EmptyDocument)
DOCDISC_DEFINE_ERROR(DimensionMismatch)
DOCDISC_DEFINE_ERROR(EmptyClass)
DOCDISC_DEFINE_ERROR(InconsistentState)
DOCDISC_DEFINE_ERROR(NoKeywords)
DOCDISC_DEFINE_ERROR(UnbalancedMass)
DOCDISC_DEFINE_ERROR(UnmappedClass)
DOCDISC_DEFINE_ERROR(InvalidSpec)
DOCDISC_DEFINE_ERROR(ConfigError)

#undef DOCDISC_DEFINE_ERROR

}  // namespace docdisc
