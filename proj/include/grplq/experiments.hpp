#pragma once

#include "grplq/diagnostics.hpp"
#include "grplq/model.hpp"
#include "grplq/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace grplq {

enum class DesignKind { GaussianIid, Equicorrelated, Orthonormalized };

std::string to_string(DesignKind kind);
DesignKind parse_design_kind(const std::string& text);

struct PersistencySettings {
    double ln_scale = 1.0;  ///< L_n = ln_scale * (n / log n)^{1/4 - ln_eta}
    double ln_eta = 0.05;
    double quad_coef = 1.0; ///< f*(x) = x'beta_lin + quad_coef * (x_1^2 - 1)
};

struct ExperimentConfig {
    std::vector<Index> n_grid{100, 200, 400};
    Index p = 64;
    Index s = 3;
    std::vector<Index> group_sizes; ///< Empty means every group has `group_size` columns.
    Index group_size = 2;
    Exponent q = Exponent::two();
    double a = 3.0;
    double sigma = 0.5;
    double beta_magnitude = 1.0;
    DesignKind design = DesignKind::Orthonormalized;
    double rho = 0.0;
    int replicates = 100;
    std::uint64_t seed = 20080101;
    double xi = 0.5;                ///< Dimension check log m <= n^xi.
    double active_tol = 1e-6;
    double solver_tol = 1e-8;
    KappaOptions kappa{100, 1, 100, 0x5eed};
    PersistencySettings persistency;

    GroupPartition partition() const;
    /// Every violated invariant, empty when the config is valid.
    std::vector<std::string> violations() const;
};

struct Instance {
    GroupedDesign design;
    Vector y;
    Coefficients beta_star;
    Vector f_star; ///< Noiseless mean X beta* (or the misspecified truth).
    Vector noise;
};

/// Deterministic in (seed, n, replicate). y = X beta* + eps, eps ~ N(0, sigma^2).
Instance gen_instance(const ExperimentConfig& config, Index n, std::uint64_t replicate);

/// Sample variance of the noise lies within 3 sigma^2 / sqrt(n) of sigma^2.
bool noise_variance_ok(const Vector& noise, double sigma);

struct McRow {
    Index n = 0;
    double lambda = 0.0;
    int replicates = 0;
    int converged = 0;
    int nonconverged = 0;
    int kkt_failures = 0;
    int noise_gate_failures = 0;
    double selection_rate = 0.0;
    double mean_l1_error = 0.0;
    double mean_pred_error = 0.0;
    double mean_risk_gap = 0.0;
    std::optional<double> kappa_estimate;
    std::optional<double> bound_prediction;
    std::optional<double> bound_l1;
    std::optional<double> budget; ///< L_n in persistency mode.
    bool dimension_ok = true;     ///< log m <= n^xi
};

struct McReport {
    std::string mode;
    ExperimentConfig config;
    std::vector<McRow> rows;
    std::optional<double> l1_slope;   ///< Least-squares slope of log mean l1 error on log n.
    std::optional<double> pred_slope;
    std::optional<Index> approx_sample_size;
};

/// Threads used by the harnesses: GRPLQ_THREADS if set, else hardware concurrency.
unsigned harness_threads();

McReport run_selection(const ExperimentConfig& config);
McReport run_rates(const ExperimentConfig& config);
McReport run_persistency(const ExperimentConfig& config);

/// Population risk E(Y - x'beta)^2 = gamma' Sigma_Z gamma with gamma = (-1, beta).
double population_risk(const Matrix& sigma_z, const Vector& beta);

/// Joint covariance of (Y, x) for the persistency model in raw units.
Matrix persistency_covariance(const ExperimentConfig& config, const Vector& beta_lin);

/// Least-squares slope of log(values) on log(ns); nullopt with fewer than two positive points.
std::optional<double> log_log_slope(const std::vector<double>& ns, const std::vector<double>& values);

struct StackedProblem {
    GroupedDesign design;
    Vector y;
    Index responses = 0;
};

/**
 * Rewrites the multi-response problem as one grouped problem.
 *
 * Rows k*n..(k+1)*n-1 and column j*D + k hold sqrt(D) X[:, j]; group j
 * collects coefficient j of every response. The sqrt(D) factor makes the
 * (1/2N) loss over N = nD rows equal the (1/2n) multi-response loss, so the
 * q = inf problem at lambda / D has the same objective as the original.
 */
StackedProblem simlasso_reduce(const Matrix& x_shared, const std::vector<Vector>& responses);

/// Multi-response objective (1/2n) sum_k ||Y_k - X B_k||^2 + lambda sum_j max_k |B_jk|, B is p x D.
double simlasso_objective(const Matrix& x_shared, const std::vector<Vector>& responses, const Matrix& coef,
                          double lambda);

/// p x D coefficient matrix from the stacked vector.
Matrix unstack_coefficients(const Vector& stacked, Index p, Index responses);
Vector stack_coefficients(const Matrix& coef);

} // namespace grplq
