#pragma once

#include <stdexcept>
#include <string>

namespace zen {

// Base of every error raised by the library. Callers that only care about
// "something in the stack refused" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ZEN_DEFINE_ERROR(Name)              \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// energy
ZEN_DEFINE_ERROR(InvalidEnergy);
ZEN_DEFINE_ERROR(SlotOutOfRange);
ZEN_DEFINE_ERROR(InsufficientEnergy);
ZEN_DEFINE_ERROR(UnknownOperation);

// forecast
ZEN_DEFINE_ERROR(DivisionDegenerate);
ZEN_DEFINE_ERROR(HistoryTooShort);
ZEN_DEFINE_ERROR(EmptyInput);

// optimizer
ZEN_DEFINE_ERROR(DimensionMismatch);
ZEN_DEFINE_ERROR(NonPositiveCost);
ZEN_DEFINE_ERROR(Infeasible);
ZEN_DEFINE_ERROR(PrimalInfeasible);
ZEN_DEFINE_ERROR(OutOfDomain);

// routing
ZEN_DEFINE_ERROR(NodeDormant);
ZEN_DEFINE_ERROR(Uncalibrated);
ZEN_DEFINE_ERROR(NoCandidates);

// scenario / cli
ZEN_DEFINE_ERROR(ParseError);
ZEN_DEFINE_ERROR(NegativePower);
ZEN_DEFINE_ERROR(InvalidArgument);

#undef ZEN_DEFINE_ERROR

}  // namespace zen
