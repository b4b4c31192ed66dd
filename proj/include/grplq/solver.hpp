#pragma once

#include "grplq/model.hpp"

#include <optional>
#include <vector>

namespace grplq {

struct SolverOptions {
    double tol = 1e-8;             ///< KKT residual at which a fit is declared converged.
    int max_iter = 10000;          ///< Cap on full sweeps over the groups.
    std::optional<double> inner_tol; ///< Block subproblem tolerance; defaults to tol / 10.
    int inner_max_iter = 5000;

    double effective_inner_tol() const { return inner_tol.value_or(tol / 10.0); }
    void validate() const;
};

struct FitResult {
    Coefficients beta;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
    double lambda = 0.0;
    Exponent q = Exponent::two();
};

struct PathResult {
    std::vector<double> lambdas;
    std::vector<FitResult> fits;
};

/// Smallest lambda at which beta = 0 is optimal: max_j ||(1/n) X_j^T y||_{q'} / d_j^{1/q'}.
double lambda_max(const GroupedDesign& design, const Vector& y, Exponent q);

/**
 * Cyclic blockwise coordinate descent.
 *
 * Each block minimizes the objective over beta_j with the other groups fixed
 * using proximal-gradient steps of length 1/L_j, L_j the top eigenvalue of
 * (1/n) X_j^T X_j. Blocks with an identity Gram take a single exact prox step.
 * Sweeps stop once the certified KKT residual is at most opts.tol.
 */
FitResult fit(const GroupedDesign& design, const Vector& y, const PenaltySpec& spec, const SolverOptions& opts = {},
              const std::optional<Coefficients>& warm_start = std::nullopt);

/// `count` log-spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> default_lambda_grid(const GroupedDesign& design, const Vector& y, Exponent q, int count = 50,
                                        double min_ratio = 1e-3);

/// Warm-started fits over a strictly decreasing grid.
PathResult fit_path(const GroupedDesign& design, const Vector& y, Exponent q, const std::vector<double>& lambdas,
                    const SolverOptions& opts = {});

/// Raised when the penalty budget cannot be matched by bisection on lambda.
class BracketError : public std::runtime_error {
public:
    BracketError(const std::string& what, double low_penalty, double high_penalty)
        : std::runtime_error(what), low_penalty(low_penalty), high_penalty(high_penalty)
    {
    }
    double low_penalty;
    double high_penalty;
};

struct ConstrainedOptions {
    SolverOptions solver;
    double relative_tol = 1e-6;      ///< Target accuracy of penalty_value against the budget.
    double lambda_floor_ratio = 1e-8; ///< lambda used for the unconstrained end, relative to lambda_max.
    int max_bisections = 200;
};

/**
 * Minimizes ||y - X beta||^2 subject to penalty_value(beta) <= budget.
 *
 * Returns the small-lambda solution when it already fits the budget; otherwise
 * bisects log(lambda) until penalty_value(beta(lambda)) matches the budget.
 * budget = 0 returns beta = 0. The FitResult's lambda is the multiplier found.
 */
FitResult fit_constrained(const GroupedDesign& design, const Vector& y, Exponent q, double budget,
                          const ConstrainedOptions& opts = {});

/// Top eigenvalue of a symmetric positive semidefinite matrix by power iteration.
double power_iteration(const Matrix& gram, double tol = 1e-10, int max_iter = 500);

} // namespace grplq
