#pragma once

#include <stdexcept>
#include <string>

namespace mixfield {

// Base class for all contract violations raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define MIXFIELD_DEFINE_ERROR(NAME) \
  struct NAME : Error {             \
    using Error::Error;             \
  }

// exact probability substrate
MIXFIELD_DEFINE_ERROR(SumNotOne);
MIXFIELD_DEFINE_ERROR(NegativeProb);
MIXFIELD_DEFINE_ERROR(DuplicateLabel);
MIXFIELD_DEFINE_ERROR(BadArity);
MIXFIELD_DEFINE_ERROR(BadSubset);

// dependence engines
MIXFIELD_DEFINE_ERROR(TooManyAtoms);
MIXFIELD_DEFINE_ERROR(NumericFailure);
MIXFIELD_DEFINE_ERROR(WindowTooLarge);

// field construction
MIXFIELD_DEFINE_ERROR(CarrierTooSmall);
MIXFIELD_DEFINE_ERROR(BadDimension);
MIXFIELD_DEFINE_ERROR(DimensionMismatch);
MIXFIELD_DEFINE_ERROR(BadRates);

// sampling
MIXFIELD_DEFINE_ERROR(MissingUniformized);
MIXFIELD_DEFINE_ERROR(InsufficientSamples);

// input handling
MIXFIELD_DEFINE_ERROR(ParseError);

#undef MIXFIELD_DEFINE_ERROR

}  // namespace mixfield
