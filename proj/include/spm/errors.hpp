#pragma once

#include <stdexcept>
#include <string>

namespace spm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPM_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

SPM_DEFINE_ERROR(NonConvergence)
SPM_DEFINE_ERROR(InvalidPotential)
SPM_DEFINE_ERROR(OutOfRange)
SPM_DEFINE_ERROR(DegeneratePenalty)
SPM_DEFINE_ERROR(InactiveArmChosen)
SPM_DEFINE_ERROR(LossOutOfRange)
SPM_DEFINE_ERROR(ReplaceOnEmpty)
SPM_DEFINE_ERROR(InvalidRegime)
SPM_DEFINE_ERROR(MissingCapture)
SPM_DEFINE_ERROR(ConfigError)
SPM_DEFINE_ERROR(IncompatibleLossRange)

#undef SPM_DEFINE_ERROR

}  // namespace spm
