#pragma once

#include <stdexcept>
#include <string>

namespace rbnet {

enum class Errc {
  NonMMatrix,
  Unstable,
  NoExponentialMoment,
  NoRoot,
  NoFeasibleShift,
  NegativeInitial,
  NonConvergentLCP,
  RuntimeCap,
  NonPDCovariance,
  RefinementOrderViolation,
  RefinementBudget,
  ConfigError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NonMMatrix: return "NonMMatrix";
    case Errc::Unstable: return "Unstable";
    case Errc::NoExponentialMoment: return "NoExponentialMoment";
    case Errc::NoRoot: return "NoRoot";
    case Errc::NoFeasibleShift: return "NoFeasibleShift";
    case Errc::NegativeInitial: return "NegativeInitial";
    case Errc::NonConvergentLCP: return "NonConvergentLCP";
    case Errc::RuntimeCap: return "RuntimeCap";
    case Errc::NonPDCovariance: return "NonPDCovariance";
    case Errc::RefinementOrderViolation: return "RefinementOrderViolation";
    case Errc::RefinementBudget: return "RefinementBudget";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace rbnet
