#pragma once

#include "grplq/model.hpp"

namespace grplq {

/**
 * Euclidean projection of v onto {x : ||x||_p <= radius}.
 *
 * p = 1 uses sort-and-threshold, p = 2 radial scaling, p = inf clipping.
 * Other p solve the stationarity system x_i + theta*|x_i|^{p-1} = |v_i| with
 * bisection on the multiplier theta; the returned point is on the feasible side.
 */
Vector project_ball(const Eigen::Ref<const Vector>& v, double radius, Exponent p);

/// argmin_x 1/2 ||x - v||^2 + t ||x||_q, via x = v - project_ball(v, t, q').
Vector prox_lq(const Eigen::Ref<const Vector>& v, double t, Exponent q);

/**
 * Violation score of g as a subgradient of ||.||_q at v; zero iff g is in the
 * subdifferential.
 *
 * v = 0: max(0, ||g||_{q'} - 1).
 * v != 0: max(0, ||g||_{q'} - 1) + |g.v / ||v||_q - 1|, the dual pairing gap
 * relative to ||v||_q. For q = 1 the componentwise form is used instead:
 * max_i of |g_i - sign(v_i)| on nonzero coordinates and max(0, |g_i| - 1) on zeros.
 */
double subgradient_residual(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& g, Exponent q);

} // namespace grplq
