#pragma once

namespace affiltest {

/// P(chi^2_df >= x). df = 0 is the point mass at zero, so the tail is 1 for
/// x <= 0 and 0 otherwise.
double chi2_sf(int df, double x);

}  // namespace affiltest
