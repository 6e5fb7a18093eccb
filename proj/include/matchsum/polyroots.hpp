#pragma once

#include <span>
#include <vector>

namespace matchsum {

/// Real roots of c[0] + c[1] x + ... + c[n] x^n, ascending, each polished to
/// near machine precision. Sturm-sequence isolation followed by bracketed
/// Newton; multiple roots are reported once. Degree up to ~20.
std::vector<double> real_roots(std::span<const double> coeffs);

}  // namespace matchsum
