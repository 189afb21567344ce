#pragma once

namespace mest {

/// Standard normal quantile, Wichura's AS241 (PPND16). Relative accuracy about
/// 1e-16 on (0, 1); exactly odd-symmetric about p = 0.5 when called on p and 1-p
/// computed as `1 - p` is not guaranteed, so callers needing exact symmetry
/// should negate instead (see quantile_grid).
double normal_quantile(double p);

double normal_cdf(double x);

}  // namespace mest
