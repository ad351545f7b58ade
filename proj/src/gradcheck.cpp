#include "lrc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lrc/errors.hpp"

namespace lrc {

namespace {

double finite_value(const ScalarGradFn& f, const Tensor& w) {
    const double v = f(w).first;
    if (!std::isfinite(v)) throw NumericalError("gradcheck: non-finite function value");
    return v;
}

}  // namespace

GradcheckReport gradcheck(const ScalarGradFn& f, const Tensor& w, double step, double tolerance) {
    if (!(step > 0.0)) throw std::invalid_argument("gradcheck: step must be > 0");
    if (!(tolerance > 0.0)) throw std::invalid_argument("gradcheck: tolerance must be > 0");
    if (w.numel() == 0) {
        throw std::invalid_argument("gradcheck: w must be non-empty, got " + shape_str(w.shape));
    }

    auto [value, grad] = f(w);
    if (!std::isfinite(value)) throw NumericalError("gradcheck: non-finite function value");
    if (grad.shape != w.shape) {
        throw std::invalid_argument("gradcheck: gradient shape " + shape_str(grad.shape) +
                                    " does not match w " + shape_str(w.shape));
    }

    GradcheckReport report;
    report.value = value;
    report.tolerance = tolerance;
    Tensor probe = w;
    for (std::size_t i = 0; i < w.numel(); ++i) {
        probe.data[i] = w.data[i] + step;
        const double plus = finite_value(f, probe);
        probe.data[i] = w.data[i] - step;
        const double minus = finite_value(f, probe);
        probe.data[i] = w.data[i];

        const double numeric = (plus - minus) / (2.0 * step);
        const double analytic = grad.data[i];
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
    }
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace lrc
