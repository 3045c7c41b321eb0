#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lungseg/tensor.hpp"

namespace lungseg::nn {

/// |a - n| / max(1e-12, |a| + |n|)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    std::size_t reduced_steps = 0;  // coordinates checked with a step below h
    std::size_t unresolved = 0;     // still crossing a kink at the smallest step
    std::size_t refined = 0;        // coordinates re-evaluated in long double
};

/// Compares analytic gradients against central differences
/// (f(x + h) - f(x - h)) / 2h, coordinate by coordinate. `values[i]` is
/// perturbed in place and restored; `analytic[i]` must have the same shape.
/// `loss` re-evaluates the scalar with the current values.
GradCheckResult grad_check(const std::vector<Tensor<double>*>& values,
                           const std::vector<const Tensor<double>*>& analytic,
                           const std::function<double()>& loss, double h = 1e-5);

/// Loss of a piecewise-smooth function plus a signature of the smooth piece
/// it was evaluated on (ReLU signs, pooling winners, ...).
template <typename R>
struct PiecewiseEval {
    R loss{};
    std::vector<std::uint8_t> region;
};

/// Central differences that stay on one smooth piece: when f(x + h) or
/// f(x - h) lands in a different region than f(x), the step shrinks tenfold,
/// down to h_min. Coordinates that still cross at h_min are compared anyway
/// and counted as unresolved. R is the precision `values` and the loss are
/// evaluated in; long double resolves coordinates whose gradient sits near
/// the double roundoff floor (about eps * |f| / h).
template <typename R>
GradCheckResult grad_check_piecewise(const std::vector<Tensor<R>*>& values,
                                     const std::vector<const Tensor<double>*>& analytic,
                                     const std::function<PiecewiseEval<R>()>& eval, R h = R(1e-5),
                                     R h_min = R(1e-8));

extern template GradCheckResult grad_check_piecewise<double>(const std::vector<Tensor<double>*>&,
                                                             const std::vector<const Tensor<double>*>&,
                                                             const std::function<PiecewiseEval<double>()>&,
                                                             double, double);
extern template GradCheckResult grad_check_piecewise<long double>(
    const std::vector<Tensor<long double>*>&, const std::vector<const Tensor<double>*>&,
    const std::function<PiecewiseEval<long double>()>&, long double, long double);

/// One loss over two mirrored copies of the same values: a double one and a
/// long double one. `fast[i]` and `exact[i]` must hold the same numbers.
struct DualPrecisionLoss {
    std::vector<Tensor<double>*> fast;
    std::vector<Tensor<long double>*> exact;
    std::function<PiecewiseEval<double>()> eval_fast;
    std::function<PiecewiseEval<long double>()> eval_exact;
};

/// grad_check_piecewise with precision escalation. Each coordinate's central
/// difference is taken in double first; when the roundoff bound of that
/// difference, 4 eps |f| / h, exceeds `accuracy` times its magnitude, the
/// coordinate is redone on the long double copy. The decision looks at the
/// numeric side only, never at the analytic gradient.
GradCheckResult grad_check_refined(const DualPrecisionLoss& loss, const std::vector<const Tensor<double>*>& analytic,
                                   double h = 1e-5, double h_min = 1e-8, double accuracy = 1e-5);

}  // namespace lungseg::nn
