#include "affiltest/chisq.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include "affiltest/error.hpp"

namespace affiltest {

double chi2_sf(int df, double x) {
  if (df < 0) throw Error(ErrorCode::kInvalidArgument, "negative degrees of freedom");
  if (x <= 0.0) return 1.0;
  if (df == 0) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace affiltest
