#include "lungseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lungseg/errors.hpp"

namespace lungseg::nn {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check(const std::vector<Tensor<double>*>& values,
                           const std::vector<const Tensor<double>*>& analytic,
                           const std::function<double()>& loss, double h) {
    if (values.size() != analytic.size()) throw ShapeMismatch("grad_check: values/analytic count differ");
    GradCheckResult r;
    for (std::size_t t = 0; t < values.size(); ++t) {
        Tensor<double>& v = *values[t];
        const Tensor<double>& a = *analytic[t];
        if (!(v.shape == a.shape)) throw ShapeMismatch("grad_check: " + v.shape.str() + " vs " + a.shape.str());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double orig = v.data[i];
            v.data[i] = orig + h;
            const double up = loss();
            v.data[i] = orig - h;
            const double down = loss();
            v.data[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            r.max_rel_error = std::max(r.max_rel_error, relative_error(a.data[i], numeric));
            ++r.coordinates;
        }
    }
    return r;
}

template <typename R>
GradCheckResult grad_check_piecewise(const std::vector<Tensor<R>*>& values,
                                     const std::vector<const Tensor<double>*>& analytic,
                                     const std::function<PiecewiseEval<R>()>& eval, R h, R h_min) {
    if (values.size() != analytic.size()) throw ShapeMismatch("grad_check: values/analytic count differ");
    const std::vector<std::uint8_t> base = eval().region;
    GradCheckResult r;
    for (std::size_t t = 0; t < values.size(); ++t) {
        Tensor<R>& v = *values[t];
        const Tensor<double>& a = *analytic[t];
        if (!(v.shape == a.shape)) throw ShapeMismatch("grad_check: " + v.shape.str() + " vs " + a.shape.str());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const R orig = v.data[i];
            R step = h, numeric = 0;
            for (;;) {
                v.data[i] = orig + step;
                const PiecewiseEval<R> up = eval();
                v.data[i] = orig - step;
                const PiecewiseEval<R> down = eval();
                v.data[i] = orig;
                numeric = (up.loss - down.loss) / (2 * step);
                const bool smooth = up.region == base && down.region == base;
                if (smooth) break;
                if (step / 10 < h_min) {
                    ++r.unresolved;
                    break;
                }
                step /= 10;
            }
            if (step < h) ++r.reduced_steps;
            r.max_rel_error = std::max(r.max_rel_error, relative_error(a.data[i], static_cast<double>(numeric)));
            ++r.coordinates;
        }
    }
    return r;
}

template GradCheckResult grad_check_piecewise<double>(const std::vector<Tensor<double>*>&,
                                                      const std::vector<const Tensor<double>*>&,
                                                      const std::function<PiecewiseEval<double>()>&, double,
                                                      double);
template GradCheckResult grad_check_piecewise<long double>(const std::vector<Tensor<long double>*>&,
                                                           const std::vector<const Tensor<double>*>&,
                                                           const std::function<PiecewiseEval<long double>()>&,
                                                           long double, long double);

namespace {

template <typename R>
struct Estimate {
    R value = 0;
    R roundoff = 0;  // bound on the cancellation error of value
    R step = 0;
    bool unresolved = false;
};

template <typename R>
Estimate<R> central(Tensor<R>& v, std::size_t i, const std::function<PiecewiseEval<R>()>& eval,
                    const std::vector<std::uint8_t>& base, R h, R h_min) {
    const R orig = v.data[i];
    Estimate<R> est;
    est.step = h;
    for (;;) {
        v.data[i] = orig + est.step;
        const PiecewiseEval<R> up = eval();
        v.data[i] = orig - est.step;
        const PiecewiseEval<R> down = eval();
        v.data[i] = orig;
        const bool smooth = up.region == base && down.region == base;
        if (smooth || est.step / 10 < h_min) {
            est.unresolved = !smooth;
            est.value = (up.loss - down.loss) / (2 * est.step);
            est.roundoff = 4 * std::numeric_limits<R>::epsilon() * std::max(std::abs(up.loss), std::abs(down.loss)) /
                           est.step;
            return est;
        }
        est.step /= 10;
    }
}

}  // namespace

GradCheckResult grad_check_refined(const DualPrecisionLoss& loss, const std::vector<const Tensor<double>*>& analytic,
                                   double h, double h_min, double accuracy) {
    if (loss.fast.size() != analytic.size() || loss.exact.size() != analytic.size()) {
        throw ShapeMismatch("grad_check: values/analytic count differ");
    }
    const std::vector<std::uint8_t> base_fast = loss.eval_fast().region;
    const std::vector<std::uint8_t> base_exact = loss.eval_exact().region;
    GradCheckResult r;
    for (std::size_t t = 0; t < analytic.size(); ++t) {
        Tensor<double>& vf = *loss.fast[t];
        Tensor<long double>& ve = *loss.exact[t];
        const Tensor<double>& a = *analytic[t];
        if (!(vf.shape == a.shape) || !(ve.shape == a.shape)) {
            throw ShapeMismatch("grad_check: " + vf.shape.str() + " vs " + a.shape.str());
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            const Estimate<double> f = central<double>(vf, i, loss.eval_fast, base_fast, h, h_min);
            double numeric = f.value;
            bool reduced = f.step < h, unresolved = f.unresolved;
            if (!(f.roundoff <= accuracy * std::abs(f.value))) {
                const Estimate<long double> e = central<long double>(ve, i, loss.eval_exact, base_exact, h, h_min);
                numeric = static_cast<double>(e.value);
                reduced = e.step < h;
                unresolved = e.unresolved;
                ++r.refined;
            }
            if (reduced) ++r.reduced_steps;
            if (unresolved) ++r.unresolved;
            r.max_rel_error = std::max(r.max_rel_error, relative_error(a.data[i], numeric));
            ++r.coordinates;
        }
    }
    return r;
}

}  // namespace lungseg::nn
