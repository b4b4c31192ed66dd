#include "grplq/experiments.hpp"

#include "grplq/certify.hpp"
#include "grplq/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

namespace grplq {

std::string to_string(DesignKind kind)
{
    switch (kind) {
    case DesignKind::GaussianIid: return "gaussian-iid";
    case DesignKind::Equicorrelated: return "equicorrelated";
    case DesignKind::Orthonormalized: return "orthonormalized";
    }
    return "unknown";
}

DesignKind parse_design_kind(const std::string& text)
{
    if (text == "gaussian-iid") return DesignKind::GaussianIid;
    if (text == "equicorrelated") return DesignKind::Equicorrelated;
    if (text == "orthonormalized") return DesignKind::Orthonormalized;
    throw InvalidInput("unknown design kind '" + text + "'");
}

GroupPartition ExperimentConfig::partition() const
{
    if (!group_sizes.empty()) return GroupPartition(group_sizes);
    return GroupPartition(std::vector<Index>(static_cast<std::size_t>(std::max<Index>(p, 1)), group_size));
}

std::vector<std::string> ExperimentConfig::violations() const
{
    std::vector<std::string> out;
    if (n_grid.empty()) out.emplace_back("nGrid must not be empty");
    for (Index n : n_grid) {
        if (n < 2) out.emplace_back("every n in nGrid must be at least 2");
    }
    if (p < 1) out.emplace_back("p must be at least 1");
    if (s < 0 || s > p) out.emplace_back("s must satisfy 0 <= s <= p");
    if (!group_sizes.empty() && static_cast<Index>(group_sizes.size()) != p) {
        out.emplace_back("dSizes must list exactly p group sizes");
    }
    for (Index d : group_sizes) {
        if (d < 1) out.emplace_back("every group size must be at least 1");
    }
    if (group_sizes.empty() && group_size < 1) out.emplace_back("groupSize must be at least 1");
    if (!(a > 2.0 * std::numbers::sqrt2)) out.emplace_back("A must exceed 2*sqrt(2)");
    if (!(sigma >= 0.0)) out.emplace_back("sigma must be nonnegative");
    if (s > 0 && !(beta_magnitude > 0.0)) out.emplace_back("betaMagnitude must be positive when s > 0 (rho* = 0)");
    if (design == DesignKind::Equicorrelated && !(rho >= 0.0 && rho < 1.0)) out.emplace_back("rho must lie in [0, 1)");
    if (replicates < 1) out.emplace_back("replicates must be at least 1");
    if (!(xi > 0.0 && xi < 1.0)) out.emplace_back("xi must lie in (0, 1)");
    if (!(active_tol >= 0.0)) out.emplace_back("activeTol must be nonnegative");
    if (!(solver_tol > 0.0)) out.emplace_back("solverTol must be positive");
    if (!(persistency.ln_scale >= 0.0)) out.emplace_back("persistency.lnScale must be nonnegative");
    if (!(persistency.ln_eta > 0.0 && persistency.ln_eta <= 0.25)) {
        out.emplace_back("persistency.lnEta must lie in (0, 1/4]");
    }
    return out;
}

namespace {

constexpr std::uint64_t kDesignStream = 1;
constexpr std::uint64_t kCoefStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kPersistencyTruth = 4;
constexpr std::uint64_t kKappaStream = 5;

void validate(const ExperimentConfig& config)
{
    const auto bad = config.violations();
    if (bad.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw InvalidInput(msg);
}

Matrix gaussian_matrix(CounterRng& rng, Index rows, Index cols)
{
    Matrix x(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index k = 0; k < cols; ++k) x(i, k) = rng.normal();
    }
    return x;
}

// sqrt(n) * Q from a thin QR, with columns signed so R has a positive diagonal.
Matrix orthonormal_columns(const Matrix& block)
{
    Eigen::HouseholderQR<Matrix> qr(block);
    Matrix q = qr.householderQ() * Matrix::Identity(block.rows(), block.cols());
    const Matrix r = qr.matrixQR().topRows(block.cols()).triangularView<Eigen::Upper>();
    for (Index k = 0; k < block.cols(); ++k) {
        if (r(k, k) < 0.0) q.col(k) = -q.col(k);
    }
    return q * std::sqrt(static_cast<double>(block.rows()));
}

Matrix raw_design(const ExperimentConfig& config, CounterRng& rng, Index n, const GroupPartition& groups)
{
    const Index m = groups.num_coefficients();
    Matrix x = gaussian_matrix(rng, n, m);
    switch (config.design) {
    case DesignKind::GaussianIid: break;
    case DesignKind::Equicorrelated: {
        const Vector shared = gaussian_matrix(rng, n, 1).col(0);
        x = std::sqrt(1.0 - config.rho) * x;
        x.colwise() += std::sqrt(config.rho) * shared;
        break;
    }
    case DesignKind::Orthonormalized:
        if (n >= m) {
            x = orthonormal_columns(x);
        } else {
            for (Index j = 0; j < groups.num_groups(); ++j) {
                if (groups.size(j) > n) continue;
                const Matrix block = x.middleCols(groups.offset(j), groups.size(j));
                x.middleCols(groups.offset(j), groups.size(j)) = orthonormal_columns(block);
            }
        }
        break;
    }
    return x;
}

std::vector<Index> draw_support(CounterRng& rng, Index p, Index s)
{
    std::vector<Index> pool(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) pool[static_cast<std::size_t>(j)] = j;
    for (Index t = 0; t < s; ++t) {
        const auto pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(p - t)));
        std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(t + pick)]);
    }
    std::vector<Index> support(pool.begin(), pool.begin() + s);
    std::sort(support.begin(), support.end());
    return support;
}

Coefficients draw_coefficients(const ExperimentConfig& config, CounterRng& rng, const GroupPartition& groups)
{
    Coefficients beta(groups);
    for (Index j : draw_support(rng, groups.num_groups(), config.s)) {
        for (Index k = 0; k < groups.size(j); ++k) beta.block(j)(k) = config.beta_magnitude * rng.sign();
    }
    return beta;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min<std::size_t>(harness_threads(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < count; i = next++) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct Outcome {
    bool converged = false;
    bool certified = false;
    bool selected = false;
    bool noise_ok = true;
    double l1_error = 0.0;
    double pred_error = 0.0;
    double risk_gap = 0.0;
};

void summarize(McRow& row, const std::vector<Outcome>& outcomes)
{
    row.replicates = static_cast<int>(outcomes.size());
    double l1 = 0.0;
    double pred = 0.0;
    double gap = 0.0;
    int selected = 0;
    for (const auto& o : outcomes) {
        if (!o.noise_ok) ++row.noise_gate_failures;
        if (!o.converged) {
            ++row.nonconverged;
            continue;
        }
        if (!o.certified) {
            ++row.kkt_failures;
            continue;
        }
        ++row.converged;
        l1 += o.l1_error;
        pred += o.pred_error;
        gap += o.risk_gap;
        if (o.selected) ++selected;
    }
    if (row.converged > 0) {
        const double c = static_cast<double>(row.converged);
        row.selection_rate = static_cast<double>(selected) / c;
        row.mean_l1_error = l1 / c;
        row.mean_pred_error = pred / c;
        row.mean_risk_gap = gap / c;
    }
}

McReport run_linear(const ExperimentConfig& config, const std::string& mode, bool with_bounds)
{
    validate(config);
    McReport report;
    report.mode = mode;
    report.config = config;
    const GroupPartition groups = config.partition();
    const Index m = groups.num_coefficients();
    SolverOptions opts;
    opts.tol = config.solver_tol;

    for (Index n : config.n_grid) {
        McRow row;
        row.n = n;
        row.lambda = lambda_schedule(config.a, config.sigma, std::max<Index>(m, 2), n).lambda;
        row.dimension_ok = std::log(static_cast<double>(m)) <= std::pow(static_cast<double>(n), config.xi);

        std::vector<Outcome> outcomes(static_cast<std::size_t>(config.replicates));
        parallel_for(outcomes.size(), [&](std::size_t r) {
            const Instance inst = gen_instance(config, n, r);
            const PenaltySpec spec(config.q, row.lambda, groups);
            const FitResult result = fit(inst.design, inst.y, spec, opts);
            Outcome& o = outcomes[r];
            o.noise_ok = config.sigma == 0.0 || noise_variance_ok(inst.noise, config.sigma);
            o.converged = result.converged;
            o.certified = kkt_check(inst.design, inst.y, result.beta, spec, opts.tol).optimal;
            o.selected = result.beta.active_set(config.active_tol) == inst.beta_star.active_set();
            const Vector diff = result.beta.values() - inst.beta_star.values();
            o.l1_error = diff.lpNorm<1>();
            o.pred_error = (inst.design.x() * diff).squaredNorm() / static_cast<double>(n);
        });
        summarize(row, outcomes);

        if (with_bounds && config.s > 0) {
            const Instance probe = gen_instance(config, n, 0);
            KappaOptions kopts = config.kappa;
            kopts.seed = derive_key(config.seed, {static_cast<std::uint64_t>(n), kKappaStream});
            const KappaEstimate kappa = restricted_eigenvalue(probe.design, config.s, 3.0, config.q, kopts);
            row.kappa_estimate = kappa.value;
            if (kappa.value > 0.0) {
                const RateBounds bounds = rate_bounds(config.a, config.sigma, kappa.value, static_cast<double>(config.s),
                                                      static_cast<double>(groups.max_size()), static_cast<double>(m),
                                                      static_cast<double>(n));
                row.bound_prediction = bounds.prediction;
                row.bound_l1 = bounds.l1;
            }
        }
        report.rows.push_back(row);
    }

    std::vector<double> ns;
    std::vector<double> l1;
    std::vector<double> pred;
    for (const auto& row : report.rows) {
        ns.push_back(static_cast<double>(row.n));
        l1.push_back(row.mean_l1_error);
        pred.push_back(row.mean_pred_error);
    }
    report.l1_slope = log_log_slope(ns, l1);
    report.pred_slope = log_log_slope(ns, pred);
    return report;
}

Vector persistency_truth(const ExperimentConfig& config, const GroupPartition& groups)
{
    CounterRng rng(config.seed, {kPersistencyTruth});
    return draw_coefficients(config, rng, groups).values();
}

Matrix population_factor(const ExperimentConfig& config, Index m)
{
    Matrix cov = Matrix::Identity(m, m);
    if (config.design == DesignKind::Equicorrelated) {
        cov = (1.0 - config.rho) * cov + config.rho * Matrix::Ones(m, m);
    }
    return cov;
}

} // namespace

Instance gen_instance(const ExperimentConfig& config, Index n, std::uint64_t replicate)
{
    validate(config);
    const GroupPartition groups = config.partition();
    const auto key_n = static_cast<std::uint64_t>(n);
    CounterRng design_rng(config.seed, {key_n, replicate, kDesignStream});
    CounterRng coef_rng(config.seed, {key_n, replicate, kCoefStream});
    CounterRng noise_rng(config.seed, {key_n, replicate, kNoiseStream});

    GroupedDesign design = standardize(raw_design(config, design_rng, n, groups), groups);
    Coefficients beta = draw_coefficients(config, coef_rng, groups);
    Vector noise(n);
    for (Index i = 0; i < n; ++i) noise(i) = config.sigma * noise_rng.normal();
    Vector f_star = design.x() * beta.values();
    Vector y = f_star + noise;
    return Instance{std::move(design), std::move(y), std::move(beta), std::move(f_star), std::move(noise)};
}

bool noise_variance_ok(const Vector& noise, double sigma)
{
    const double n = static_cast<double>(noise.size());
    if (noise.size() < 2) return true;
    const double mean = noise.mean();
    const double var = (noise.array() - mean).square().sum() / (n - 1.0);
    const double s2 = sigma * sigma;
    return std::abs(var - s2) <= 3.0 * s2 / std::sqrt(n);
}

unsigned harness_threads()
{
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GRPLQ_THREADS")) {
        const long value = std::strtol(env, nullptr, 10);
        if (value >= 1) threads = static_cast<unsigned>(value);
    }
    return threads;
}

std::optional<double> log_log_slope(const std::vector<double>& ns, const std::vector<double>& values)
{
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < ns.size() && i < values.size(); ++i) {
        if (ns[i] > 0.0 && values[i] > 0.0) {
            xs.push_back(std::log(ns[i]));
            ys.push_back(std::log(values[i]));
        }
    }
    if (xs.size() < 2) return std::nullopt;
    const double k = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

McReport run_selection(const ExperimentConfig& config)
{
    return run_linear(config, "selection", false);
}

McReport run_rates(const ExperimentConfig& config)
{
    return run_linear(config, "rates", true);
}

double population_risk(const Matrix& sigma_z, const Vector& beta)
{
    if (sigma_z.rows() != beta.size() + 1) throw InvalidInput("covariance size does not match coefficients");
    Vector gamma(beta.size() + 1);
    gamma(0) = -1.0;
    gamma.tail(beta.size()) = beta;
    return gamma.dot(sigma_z * gamma);
}

Matrix persistency_covariance(const ExperimentConfig& config, const Vector& beta_lin)
{
    const Index m = beta_lin.size();
    const Matrix cov_x = population_factor(config, m);
    const double c = config.persistency.quad_coef;
    // E(x_1^2 - 1)^2 = 2 for unit variance; the quadratic term is uncorrelated with every x_k.
    Matrix sigma_z(m + 1, m + 1);
    sigma_z(0, 0) = beta_lin.dot(cov_x * beta_lin) + 2.0 * c * c + config.sigma * config.sigma;
    const Vector cross = cov_x * beta_lin;
    sigma_z.block(1, 0, m, 1) = cross;
    sigma_z.block(0, 1, 1, m) = cross.transpose();
    sigma_z.bottomRightCorner(m, m) = cov_x;
    return sigma_z;
}

McReport run_persistency(const ExperimentConfig& config)
{
    validate(config);
    if (config.design == DesignKind::Orthonormalized) {
        throw InvalidInput("persistency needs a design with a known population covariance");
    }
    McReport report;
    report.mode = "persistency";
    report.config = config;
    report.approx_sample_size = 0;

    const GroupPartition groups = config.partition();
    const Index m = groups.num_coefficients();
    const Vector beta_lin = persistency_truth(config, groups);
    const Matrix sigma_z = persistency_covariance(config, beta_lin);
    const Matrix cov_x = sigma_z.bottomRightCorner(m, m);

    // Population design: (1/m) X'X = Sigma_X and (1/m) X'y = Sigma_X beta_lin, so
    // (1/m)||y - X beta||^2 equals the population risk up to a constant.
    const Matrix chol_upper = cov_x.llt().matrixU();
    const GroupedDesign population(std::sqrt(static_cast<double>(m)) * chol_upper, groups);
    const Vector population_y = population.x() * beta_lin;

    ConstrainedOptions copts;
    copts.solver.tol = config.solver_tol;

    for (Index n : config.n_grid) {
        McRow row;
        row.n = n;
        const double nd = static_cast<double>(n);
        const double budget = config.persistency.ln_scale * std::pow(nd / std::log(nd), 0.25 - config.persistency.ln_eta);
        row.budget = budget;
        row.dimension_ok = std::log(static_cast<double>(m)) <= std::pow(nd, config.xi);

        const FitResult best = fit_constrained(population, population_y, config.q, budget, copts);
        row.lambda = best.lambda;
        const double best_risk = population_risk(sigma_z, best.beta.values());

        std::vector<Outcome> outcomes(static_cast<std::size_t>(config.replicates));
        parallel_for(outcomes.size(), [&](std::size_t r) {
            CounterRng rng(config.seed, {static_cast<std::uint64_t>(n), r, kDesignStream});
            CounterRng noise_rng(config.seed, {static_cast<std::uint64_t>(n), r, kNoiseStream});
            Matrix raw = gaussian_matrix(rng, n, m);
            if (config.design == DesignKind::Equicorrelated) {
                const Vector shared = gaussian_matrix(rng, n, 1).col(0);
                raw = std::sqrt(1.0 - config.rho) * raw;
                raw.colwise() += std::sqrt(config.rho) * shared;
            }
            Vector noise(n);
            for (Index i = 0; i < n; ++i) noise(i) = config.sigma * noise_rng.normal();
            const Vector quad = (raw.col(0).array().square() - 1.0).matrix();
            const Vector y = raw * beta_lin + config.persistency.quad_coef * quad + noise;

            // Raw units, so the sample and population problems share the constraint set.
            const GroupedDesign design(raw, groups);
            const FitResult result = fit_constrained(design, y, config.q, budget, copts);
            Outcome& o = outcomes[r];
            o.noise_ok = config.sigma == 0.0 || noise_variance_ok(noise, config.sigma);
            o.converged = result.converged;
            const PenaltySpec spec(config.q, result.lambda, groups);
            o.certified = budget == 0.0 || kkt_check(design, y, result.beta, spec, copts.solver.tol).optimal;
            const Vector& raw_beta = result.beta.values();
            o.risk_gap = population_risk(sigma_z, raw_beta) - best_risk;
            o.l1_error = (raw_beta - best.beta.values()).lpNorm<1>();
            o.pred_error = (raw * (raw_beta - beta_lin)).squaredNorm() / nd;
        });
        summarize(row, outcomes);
        report.rows.push_back(row);
    }
    return report;
}

StackedProblem simlasso_reduce(const Matrix& x_shared, const std::vector<Vector>& responses)
{
    if (responses.empty()) throw InvalidInput("need at least one response");
    const Index n = x_shared.rows();
    const Index p = x_shared.cols();
    const auto d = static_cast<Index>(responses.size());
    for (const auto& y : responses) {
        if (y.size() != n) throw InvalidInput("every response must have one entry per row of X");
    }
    const double root = std::sqrt(static_cast<double>(d));
    Matrix stacked = Matrix::Zero(n * d, p * d);
    Vector y(n * d);
    for (Index k = 0; k < d; ++k) {
        for (Index j = 0; j < p; ++j) stacked.block(k * n, j * d + k, n, 1) = root * x_shared.col(j);
        y.segment(k * n, n) = root * responses[static_cast<std::size_t>(k)];
    }
    GroupPartition groups(std::vector<Index>(static_cast<std::size_t>(p), d));
    return StackedProblem{GroupedDesign(std::move(stacked), std::move(groups)), std::move(y), d};
}

double simlasso_objective(const Matrix& x_shared, const std::vector<Vector>& responses, const Matrix& coef,
                          double lambda)
{
    const auto d = static_cast<Index>(responses.size());
    if (coef.rows() != x_shared.cols() || coef.cols() != d) throw InvalidInput("coefficient matrix must be p x D");
    double loss = 0.0;
    for (Index k = 0; k < d; ++k) loss += (responses[static_cast<std::size_t>(k)] - x_shared * coef.col(k)).squaredNorm();
    loss /= 2.0 * static_cast<double>(x_shared.rows());
    double penalty = 0.0;
    for (Index j = 0; j < coef.rows(); ++j) penalty += coef.row(j).cwiseAbs().maxCoeff();
    return loss + lambda * penalty;
}

Matrix unstack_coefficients(const Vector& stacked, Index p, Index responses)
{
    if (stacked.size() != p * responses) throw InvalidInput("stacked coefficient length must be p * D");
    Matrix coef(p, responses);
    for (Index j = 0; j < p; ++j) {
        for (Index k = 0; k < responses; ++k) coef(j, k) = stacked(j * responses + k);
    }
    return coef;
}

Vector stack_coefficients(const Matrix& coef)
{
    Vector out(coef.size());
    for (Index j = 0; j < coef.rows(); ++j) {
        for (Index k = 0; k < coef.cols(); ++k) out(j * coef.cols() + k) = coef(j, k);
    }
    return out;
}

} // namespace grplq
