#include "grplq/solver.hpp"

#include "grplq/certify.hpp"
#include "grplq/prox.hpp"

#include <cmath>
#include <string>

namespace grplq {

void SolverOptions::validate() const
{
    if (!(tol > 0.0)) throw InvalidInput("solver tolerance must be positive");
    if (max_iter < 1) throw InvalidInput("max_iter must be at least 1");
    if (!(effective_inner_tol() > 0.0)) throw InvalidInput("inner tolerance must be positive");
    if (inner_max_iter < 1) throw InvalidInput("inner_max_iter must be at least 1");
}

double power_iteration(const Matrix& gram, double tol, int max_iter)
{
    const Index d = gram.rows();
    if (d == 0) return 0.0;
    if (d == 1) return gram(0, 0);

    auto run = [&](Vector v) {
        double estimate = 0.0;
        v.normalize();
        for (int it = 0; it < max_iter; ++it) {
            Vector w = gram * v;
            const double norm = w.norm();
            if (norm == 0.0) return 0.0;
            const double next = v.dot(w);
            v = w / norm;
            if (std::abs(next - estimate) <= tol * std::abs(next)) return next;
            estimate = next;
        }
        return estimate;
    };

    Vector ones = Vector::Ones(d);
    Vector diag_start = Vector::Zero(d);
    Index top = 0;
    gram.diagonal().maxCoeff(&top);
    diag_start(top) = 1.0;
    for (Index i = 0; i < d; ++i) diag_start(i) += 1e-3 * static_cast<double>(i + 1);
    return std::max(run(ones), run(diag_start));
}

double lambda_max(const GroupedDesign& design, const Vector& y, Exponent q)
{
    if (y.size() != design.n()) throw InvalidInput("response length does not match design");
    const Vector corr = design.x().transpose() * y / static_cast<double>(design.n());
    const Exponent dual = q.conjugate();
    double best = 0.0;
    for (Index j = 0; j < design.p(); ++j) {
        const double value = group_norm(design.groups().block(corr, j), dual) / group_weight(design.groups().size(j), q);
        best = std::max(best, value);
    }
    return best;
}

namespace {

struct BlockCache {
    Matrix gram;
    double lipschitz = 0.0;
    bool identity = false;
};

std::vector<BlockCache> build_cache(const GroupedDesign& design)
{
    std::vector<BlockCache> cache(static_cast<std::size_t>(design.p()));
    const double n = static_cast<double>(design.n());
    for (Index j = 0; j < design.p(); ++j) {
        auto& c = cache[static_cast<std::size_t>(j)];
        const auto xj = design.block(j);
        c.gram = xj.transpose() * xj / n;
        const Index d = c.gram.rows();
        c.identity = (c.gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-12;
        c.lipschitz = c.identity ? 1.0 : power_iteration(c.gram) * (1.0 + 1e-6);
    }
    return cache;
}

// Minimizes 1/2 b'Gb - z'b + level*||b||_q in place.
void solve_block(Eigen::Ref<Vector> b, const Vector& z, const BlockCache& cache, double level, Exponent q,
                 const SolverOptions& opts)
{
    if (group_norm(z, q.conjugate()) <= level) {
        b.setZero();
        return;
    }
    if (cache.identity) {
        b = prox_lq(z, level, q);
        return;
    }
    if (cache.lipschitz <= 0.0) return;
    const double inner_tol = opts.effective_inner_tol();
    const double step = 1.0 / cache.lipschitz;
    for (int it = 0; it < opts.inner_max_iter; ++it) {
        const Vector corr = z - cache.gram * b;
        if (block_kkt_residual(b, corr, level, q) <= inner_tol) return;
        b = prox_lq(b + step * corr, level * step, q);
    }
}

} // namespace

FitResult fit(const GroupedDesign& design, const Vector& y, const PenaltySpec& spec, const SolverOptions& opts,
              const std::optional<Coefficients>& warm_start)
{
    opts.validate();
    if (y.size() != design.n()) throw InvalidInput("response length does not match design");
    if (spec.weights().size() != design.p()) throw InvalidInput("penalty weights do not match design groups");

    Coefficients beta(design.groups());
    if (warm_start) {
        if (!(warm_start->groups() == design.groups())) throw InvalidInput("warm start partition does not match design");
        beta = *warm_start;
    }

    const auto cache = build_cache(design);
    const double n = static_cast<double>(design.n());
    const auto& groups = design.groups();
    Vector residual = y - design.x() * beta.values();

    FitResult result;
    result.lambda = spec.lambda();
    result.q = spec.q();

    auto certify_now = [&]() {
        residual = y - design.x() * beta.values();
        const Vector corr = design.x().transpose() * residual / n;
        double worst = 0.0;
        for (Index j = 0; j < design.p(); ++j) {
            const double level = spec.lambda() * spec.weight(j);
            worst = std::max(worst, block_kkt_residual(beta.block(j), groups.block(corr, j), level, spec.q()));
        }
        return worst;
    };

    double kkt = certify_now();
    int sweep = 0;
    while (kkt > opts.tol && sweep < opts.max_iter) {
        for (Index j = 0; j < design.p(); ++j) {
            const auto& c = cache[static_cast<std::size_t>(j)];
            const auto xj = design.block(j);
            const Vector old = beta.block(j);
            const Vector z = xj.transpose() * residual / n + c.gram * old;
            solve_block(beta.block(j), z, c, spec.lambda() * spec.weight(j), spec.q(), opts);
            const Vector delta = beta.block(j) - old;
            if (delta.lpNorm<Eigen::Infinity>() > 0.0) residual.noalias() -= xj * delta;
        }
        ++sweep;
        kkt = certify_now();
    }

    result.iterations = sweep;
    result.kkt_residual = kkt;
    result.converged = kkt <= opts.tol;
    result.objective = objective(design, y, beta, spec);
    result.beta = std::move(beta);
    return result;
}

std::vector<double> default_lambda_grid(const GroupedDesign& design, const Vector& y, Exponent q, int count,
                                        double min_ratio)
{
    if (count < 1) throw InvalidInput("grid size must be at least 1");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw InvalidInput("grid ratio must lie in (0, 1)");
    const double top = lambda_max(design, y, q);
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        grid.push_back(top);
        return grid;
    }
    const double log_ratio = std::log(min_ratio);
    for (int k = 0; k < count; ++k) {
        grid.push_back(top * std::exp(log_ratio * static_cast<double>(k) / static_cast<double>(count - 1)));
    }
    return grid;
}

PathResult fit_path(const GroupedDesign& design, const Vector& y, Exponent q, const std::vector<double>& lambdas,
                    const SolverOptions& opts)
{
    if (lambdas.empty()) throw InvalidInput("lambda grid is empty");
    for (std::size_t k = 1; k < lambdas.size(); ++k) {
        if (!(lambdas[k] < lambdas[k - 1])) throw InvalidInput("lambda grid must be strictly decreasing");
    }
    PathResult path;
    path.lambdas = lambdas;
    std::optional<Coefficients> warm;
    for (double lambda : lambdas) {
        PenaltySpec spec(q, lambda, design.groups());
        path.fits.push_back(fit(design, y, spec, opts, warm));
        warm = path.fits.back().beta;
    }
    return path;
}

FitResult fit_constrained(const GroupedDesign& design, const Vector& y, Exponent q, double budget,
                          const ConstrainedOptions& opts)
{
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw InvalidInput("penalty budget must be finite and nonnegative");
    const double top = lambda_max(design, y, q);
    const PenaltySpec base(q, top, design.groups());

    if (budget == 0.0 || top == 0.0) {
        Coefficients zero(design.groups());
        FitResult result;
        result.beta = zero;
        result.lambda = top;
        result.q = q;
        result.converged = true;
        result.objective = objective(design, y, zero, base);
        result.kkt_residual = kkt_check(design, y, zero, base, opts.solver.tol).max_residual;
        return result;
    }

    double lambda_lo = top * opts.lambda_floor_ratio;
    FitResult lo = fit(design, y, base.with_lambda(lambda_lo), opts.solver);
    double pen_lo = penalty_value(lo.beta, base);
    if (pen_lo <= budget) return lo;

    double lambda_hi = top;
    FitResult hi = fit(design, y, base.with_lambda(lambda_hi), opts.solver, lo.beta);
    double pen_hi = penalty_value(hi.beta, base);

    for (int it = 0; it < opts.max_bisections; ++it) {
        const double mid = std::sqrt(lambda_lo * lambda_hi);
        if (!(mid > lambda_lo && mid < lambda_hi)) break;
        const auto& warm = (pen_lo - budget) < (budget - pen_hi) ? lo.beta : hi.beta;
        FitResult trial = fit(design, y, base.with_lambda(mid), opts.solver, warm);
        const double pen = penalty_value(trial.beta, base);
        if (std::abs(pen - budget) <= opts.relative_tol * budget) return trial;
        if (pen > budget) {
            lambda_lo = mid;
            lo = std::move(trial);
            pen_lo = pen;
        } else {
            lambda_hi = mid;
            hi = std::move(trial);
            pen_hi = pen;
        }
    }
    throw BracketError("could not match penalty budget " + std::to_string(budget) + "; achieved range ["
                           + std::to_string(pen_hi) + ", " + std::to_string(pen_lo) + "]",
                       pen_hi, pen_lo);
}

} // namespace grplq
