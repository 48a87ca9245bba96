#pragma once

#include "fetl/errors.hpp"
#include "fetl/numcore/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fetl {

template <typename Scalar>
struct GradCheckReport {
  Scalar max_rel_err = 0;
  Index worst_coordinate = -1;
  bool pass = true;
};

/// Central differences of a scalar function, one coordinate at a time.
template <typename Scalar, typename F>
VectorX<Scalar> central_difference(F&& f, const VectorX<Scalar>& params, Scalar h) {
  VectorX<Scalar> numeric(params.size());
  VectorX<Scalar> p = params;
  for (Index i = 0; i < params.size(); ++i) {
    p[i] = params[i] + h;
    const Scalar up = f(p);
    p[i] = params[i] - h;
    const Scalar down = f(p);
    p[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("grad_check: non-finite evaluation at coordinate " + std::to_string(i));
    numeric[i] = (up - down) / (Scalar(2) * h);
  }
  return numeric;
}

/// Compares `analytic` to the central difference of `f` at `params`.
/// Relative error per coordinate is |a - n| / max(|n|, floor).
template <typename Scalar, typename F>
GradCheckReport<Scalar> grad_check(F&& f, const VectorX<Scalar>& params, const VectorX<Scalar>& analytic,
                                   Scalar h = Scalar(1e-5), Scalar tol = Scalar(1e-5), Scalar floor = Scalar(1e-8)) {
  if (analytic.size() != params.size()) throw ShapeError("grad_check: analytic gradient has wrong length");
  if (!(h > 0)) throw ContractError("grad_check: h must be positive");
  const VectorX<Scalar> numeric = central_difference<Scalar>(f, params, h);
  GradCheckReport<Scalar> report;
  for (Index i = 0; i < params.size(); ++i) {
    if (!std::isfinite(analytic[i]))
      throw NumericalError("grad_check: non-finite analytic gradient at coordinate " + std::to_string(i));
    const Scalar err = std::abs(analytic[i] - numeric[i]) / std::max(std::abs(numeric[i]), floor);
    if (report.worst_coordinate < 0 || err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_coordinate = i;
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace fetl
