#pragma once

#include "grplq/model.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace grplq {

/// Raised when a restricted Gram matrix is numerically singular.
class SingularGram : public std::runtime_error {
public:
    SingularGram(const std::string& what, double c_min) : std::runtime_error(what), c_min(c_min) {}
    double c_min;
};

struct NormEstimate {
    double value = 0.0;
    bool exact = false;
    /// Upper bracket when one is available (Riesz-Thorin for (a, a) norms).
    std::optional<double> upper;
};

/**
 * Induced norm sup ||Ax||_b / ||x||_a.
 *
 * Closed forms: (1, b) is the largest column b-norm, (a, inf) the largest
 * row a'-norm, (2, 2) the top singular value. Everything else is a lower
 * bound from multi-start dual power iterations.
 */
NormEstimate operator_norm(const Matrix& a, Exponent from, Exponent to);

/// Columns of the groups in `support`, in increasing group order.
std::vector<Index> support_columns(const GroupPartition& groups, const std::vector<Index>& support);

/// Smallest eigenvalue of (1/n) X_S^T X_S.
double min_gram_eigenvalue(const GroupedDesign& design, const std::vector<Index>& support);

struct IrrepresentableResult {
    double value = 0.0;
    bool exact = true;
    std::optional<double> upper;
};

/// max over j outside S of ||X_j^T X_S (X_S^T X_S)^{-1}||_{q',q'}; 0 when S covers every group.
IrrepresentableResult irrepresentable_constant(const GroupedDesign& design, const std::vector<Index>& support,
                                               Exponent q);

struct KappaOptions {
    std::size_t subset_budget = 2000; ///< Subsets S0 examined; enumeration when the count fits.
    int starts = 4;                   ///< Random starts per subset on top of the spectral starts.
    int iterations = 300;
    std::uint64_t seed = 0x5eed;
};

struct KappaEstimate {
    double value = 0.0;
    bool heuristic = true;           ///< Always set: the value is the ratio at a feasible point, an upper bound.
    bool exhaustive_subsets = false; ///< Every S0 of the largest admissible size was visited.
    bool budget_exhausted = false;
    std::size_t subsets_evaluated = 0;
    Vector argmin;                   ///< Cone point achieving `value`.
};

/**
 * Restricted-eigenvalue ratio
 *   ||X g|| / (sqrt(n) sqrt(sum_{j in S0} d_j^{2/q'-1} ||g_j||_q^2))
 * minimized over |S0| <= s_max and the cone
 *   sum_{j not in S0} w_j ||g_j||_q <= multiplier * sum_{j in S0} w_j ||g_j||_q.
 *
 * The ratio only decreases as S0 grows, so subsets of size min(s_max, p) are
 * searched. Every returned value is attained at a feasible point.
 */
KappaEstimate restricted_eigenvalue(const GroupedDesign& design, Index s_max, double multiplier, Exponent q,
                                    const KappaOptions& opts = {});

/// The restricted-eigenvalue ratio at one point, or nullopt when g is outside the cone of S0.
std::optional<double> restricted_ratio(const GroupedDesign& design, const std::vector<Index>& s0, double multiplier,
                                       Exponent q, const Vector& g);

struct LambdaSchedule {
    double lambda = 0.0;
    double probability_floor = 0.0; ///< 1 - m^{1 - A^2/8}
};

/// lambda = A sigma sqrt(log m / n) for A > 2 sqrt 2.
LambdaSchedule lambda_schedule(double a, double sigma, Index m, Index n);

struct VerdictThresholds {
    double c_min = 1e-10;          ///< C_min must exceed this.
    double lambda_growth = 10.0;   ///< lambda^2 n / log((p - s) dbar) must reach this.
    double rho_condition = 0.5;    ///< rho scalar must not exceed this.
};

struct DiagnosticsReport {
    std::vector<Index> support;
    double c_min = 0.0;
    IrrepresentableResult irrepresentable;
    double delta = 0.0;
    std::optional<double> rho_star;
    double lambda = 0.0;
    double sigma = 0.0;
    /// lambda^2 n / log((p - s) dbar); +inf when the complement is trivial.
    double lambda_growth = 0.0;
    /// (1/rho*)[sqrt(log(s dbar)/n) + lambda dbar^{1/q'} ||Sigma_SS^{-1}||_{inf,inf}].
    std::optional<double> rho_condition;
    double inverse_gram_inf_norm = 0.0;
    std::optional<KappaEstimate> kappa;
    VerdictThresholds thresholds;

    bool c_min_ok = false;
    bool irrepresentable_ok = false;
    bool lambda_growth_ok = false;
    std::optional<bool> rho_ok;

    bool all_pass() const { return c_min_ok && irrepresentable_ok && lambda_growth_ok && rho_ok.value_or(false); }
};

/**
 * Finite-sample surrogates of the selection-consistency hypotheses.
 *
 * `beta_star`, when given, must be nonzero on every support group; rho* is
 * taken from it. Throws SingularGram when C_min is below the threshold.
 */
DiagnosticsReport selection_verdict(const GroupedDesign& design, const std::vector<Index>& support,
                                   const std::optional<Coefficients>& beta_star, Exponent q, double lambda, double sigma,
                                   const VerdictThresholds& thresholds = {});

/// Support from beta_star; rejects a zero beta_star.
DiagnosticsReport selection_verdict(const GroupedDesign& design, const Coefficients& beta_star, Exponent q, double lambda,
                                   double sigma, const VerdictThresholds& thresholds = {});

struct RateBounds {
    double prediction = 0.0; ///< 9 A^2 sigma^2 / kappa^2 * s dbar log m / n
    double l1 = 0.0;         ///< 12 A^2 sigma^2 s dbar / kappa^2 * sqrt(log m / n)
};

RateBounds rate_bounds(double a, double sigma, double kappa, double s, double d_bar, double m, double n);

/// C(delta) = 8 b^2 / (b + 1) with b = 1 + 2/delta.
double oracle_constant(double delta);

struct OracleInputs {
    double delta = 0.5;
    double kappa = 1.0;
    double a = 3.0;
    double sigma = 1.0;
    double m = 2.0;
};

/// (1 + delta) [ (1/n)||f* - X beta||^2 + C(delta) A^2 sigma^2 / kappa^2 * dbar |S(beta)| log m / n ].
double oracle_bound_rhs(const GroupedDesign& design, const Vector& f_star, const Coefficients& beta,
                        const OracleInputs& inputs);

/// Whether (1/n)||f* - X beta||^2 <= B lambda^2 |S(beta)|.
bool in_oracle_set(const GroupedDesign& design, const Vector& f_star, const Coefficients& beta, double b_const,
                   double lambda);

} // namespace grplq
