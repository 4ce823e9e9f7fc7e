#pragma once

namespace quadgroup {

/// Standard normal CDF.
double norm_cdf(double x);

/// Standard normal quantile (inverse CDF). Requires 0 < p < 1;
/// throws std::invalid_argument otherwise.
double norm_quantile(double p);

}  // namespace quadgroup
