#pragma once

#include "grplq/model.hpp"

#include <vector>

namespace grplq {

struct KktCertificate {
    Vector per_group_residual;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool optimal = false;
};

/**
 * Stationarity residual of one block, in units of the correlation
 * c_j = (1/n) X_j^T (y - X beta).
 *
 * beta_j = 0: max(0, ||c_j||_{q'} - level). Otherwise level times the
 * subgradient residual of c_j / level at beta_j. With level = 0 the residual
 * is ||c_j||_inf.
 */
double block_kkt_residual(const Eigen::Ref<const Vector>& beta_j, const Eigen::Ref<const Vector>& c_j, double level,
                          Exponent q);

/// Certifies beta against the optimality conditions of the penalized problem at `tol`.
KktCertificate kkt_check(const GroupedDesign& design, const Vector& y, const Coefficients& beta, const PenaltySpec& spec,
                         double tol);

struct CompactResult {
    Coefficients beta;
    Index groups_removed = 0;
    /// Set when the rank decision was ambiguous and the input was returned unchanged.
    bool ambiguous = false;
};

/**
 * Removes active groups from an optimal solution until at most n remain,
 * keeping X beta and the objective fixed.
 *
 * Each step finds w with sum_j w_j X_j beta_j = 0 over the active groups and
 * rescales beta_j by (1 + t w_j), with t the largest step keeping every factor
 * nonnegative, so at least one group reaches zero and no block changes sign.
 * Throws InvalidInput if beta does not certify at `tol`.
 */
CompactResult reduce_to_compact(const GroupedDesign& design, const Vector& y, const Coefficients& beta,
                                const PenaltySpec& spec, double tol);

} // namespace grplq
