#include "icmsim/estimation.hpp"

namespace icmsim {

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::Nonconvergence: return "nonconvergence";
    case Reason::NegativeSe: return "negative_se";
    case Reason::NonPdConstructCov: return "nonPD_construct_cov";
    case Reason::NonPdErrorCov: return "nonPD_error_cov";
    case Reason::SingularRotation: return "singular_rotation";
    case Reason::LoadingOutOfRange: return "loading_out_of_range";
    case Reason::ReliabilityOutOfRange: return "reliability_out_of_range";
    case Reason::NonPdConstructCorr: return "nonPD_construct_corr";
  }
  return "?";
}

std::string join_reasons(const std::vector<Reason>& reasons) {
  std::string out;
  for (const auto r : reasons) {
    if (!out.empty()) out += '|';
    out += to_string(r);
  }
  return out;
}

}  // namespace icmsim
