#pragma once

// Central-difference gradient verification for scalar functions of a
// flat parameter vector. Always runs in 64-bit; the function under
// test must be deterministic in w (freeze any sign samples first).

#include <functional>
#include <utility>

#include "lrc/tensor.hpp"

namespace lrc {

// Evaluates f at w, returning the value and the analytic gradient.
using ScalarGradFn = std::function<std::pair<double, Tensor>(const Tensor&)>;

struct GradcheckReport {
    double value{0.0};
    double max_rel_error{0.0};
    std::size_t worst_index{0};
    double worst_analytic{0.0};
    double worst_numeric{0.0};
    double tolerance{0.0};
    bool pass{false};
};

// Relative error per coordinate is |analytic - numeric| divided by
// max(1, |analytic|, |numeric|); pass iff the max over coordinates is
// below tolerance.
GradcheckReport gradcheck(const ScalarGradFn& f, const Tensor& w, double step, double tolerance);

}  // namespace lrc
