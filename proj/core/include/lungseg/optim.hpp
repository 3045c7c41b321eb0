#pragma once

#include "lungseg/tensor.hpp"

namespace lungseg::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update of `param.value` from `param.grad`, in place.
/// Increments step_count. Throws MissingGradient if grad is not sized like value.
template <typename T>
void adam_step(Parameter<T>& param, const AdamConfig& cfg = {});

}  // namespace lungseg::nn
