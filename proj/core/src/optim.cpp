#include "lungseg/optim.hpp"

#include <cmath>

#include "lungseg/errors.hpp"

namespace lungseg::nn {

template <typename T>
void adam_step(Parameter<T>& param, const AdamConfig& cfg) {
    if (!(param.grad.shape == param.value.shape) || param.grad.size() != param.value.size()) {
        throw MissingGradient("parameter '" + param.name + "' has no gradient");
    }
    if (param.adam_m.size() != param.value.size()) param.adam_m = Tensor<T>(param.value.shape);
    if (param.adam_v.size() != param.value.size()) param.adam_v = Tensor<T>(param.value.shape);

    ++param.step_count;
    const double t = static_cast<double>(param.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double g = param.grad.data[i];
        const double m = cfg.beta1 * param.adam_m.data[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * param.adam_v.data[i] + (1.0 - cfg.beta2) * g * g;
        param.adam_m.data[i] = static_cast<T>(m);
        param.adam_v.data[i] = static_cast<T>(v);
        const double update = cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
        param.value.data[i] = static_cast<T>(param.value.data[i] - update);
    }
}

template void adam_step<float>(Parameter<float>&, const AdamConfig&);
template void adam_step<double>(Parameter<double>&, const AdamConfig&);

}  // namespace lungseg::nn
