#pragma once
#include <functional>
#include <span>
#include <vector>

namespace comcure {

// Symmetric Hessian of fn at x by central finite differences, row-major.
std::vector<double> central_hessian(
    const std::function<double(std::span<const double>)>& fn,
    std::span<const double> x, std::span<const double> steps);

// In-place inverse of a symmetric positive definite matrix via Cholesky.
// Returns false (leaving a in an unspecified state) when not PD.
bool spd_inverse(std::vector<double>& a, std::size_t n);

}  // namespace comcure
