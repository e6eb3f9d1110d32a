#pragma once

#include <cmath>
#include <functional>

#include "scoreopt/errors.hpp"
#include "scoreopt/tensor.hpp"

namespace scoreopt {

/// Central-difference gradient of a scalar function. Test oracle; second
/// order accurate, default h tuned for double precision.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               double h = 1e-5) {
    if (!(h > 0.0)) throw ContractViolation("finite_diff_grad: h must be positive");
    Tensor g = Tensor::zeros_like(x);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw OracleFailure("finite_diff_grad: non-finite function value");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace scoreopt
