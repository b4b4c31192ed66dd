#include "grplq/diagnostics.hpp"

#include "grplq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace grplq {

namespace {

double sign(double x)
{
    return (x > 0.0) - (x < 0.0);
}

// Unit vector in the dual of `p` aligned with v: ||s||_{p'} = 1 and s.v = ||v||_p.
Vector dual_direction(const Vector& v, Exponent p)
{
    Vector s = Vector::Zero(v.size());
    const double norm = group_norm(v, p);
    if (norm == 0.0) return s;
    switch (p.kind()) {
    case Exponent::Kind::One:
        for (Index i = 0; i < v.size(); ++i) s(i) = sign(v(i));
        return s;
    case Exponent::Kind::Two: return v / norm;
    case Exponent::Kind::Inf: {
        Index top = 0;
        v.cwiseAbs().maxCoeff(&top);
        s(top) = sign(v(top));
        return s;
    }
    case Exponent::Kind::Other: break;
    }
    const double e = p.value();
    for (Index i = 0; i < v.size(); ++i) s(i) = sign(v(i)) * std::pow(std::abs(v(i)) / norm, e - 1.0);
    return s;
}

double norm_ratio(const Matrix& a, const Vector& x, Exponent from, Exponent to)
{
    const double denom = group_norm(x, from);
    return denom > 0.0 ? group_norm(a * x, to) / denom : 0.0;
}

double ascent_estimate(const Matrix& a, Exponent from, Exponent to)
{
    const Index cols = a.cols();
    std::vector<Vector> starts;
    starts.push_back(Vector::Ones(cols));
    for (Index k = 0; k < cols; ++k) starts.push_back(Vector::Unit(cols, k));
    CounterRng rng(0xA5CE17, {static_cast<std::uint64_t>(a.rows()), static_cast<std::uint64_t>(cols)});
    for (int k = 0; k < 8; ++k) {
        Vector v(cols);
        for (Index i = 0; i < cols; ++i) v(i) = rng.normal();
        starts.push_back(v);
    }
    const Exponent from_dual = from.conjugate();
    double best = 0.0;
    for (Vector x : starts) {
        double value = norm_ratio(a, x, from, to);
        best = std::max(best, value);
        for (int it = 0; it < 200; ++it) {
            const Vector y = a * x;
            if (y.lpNorm<Eigen::Infinity>() == 0.0) break;
            const Vector z = a.transpose() * dual_direction(y, to);
            if (z.lpNorm<Eigen::Infinity>() == 0.0) break;
            const Vector next = dual_direction(z, from_dual);
            const double next_value = norm_ratio(a, next, from, to);
            best = std::max(best, next_value);
            if (next_value <= value * (1.0 + 1e-13)) break;
            x = next;
            value = next_value;
        }
    }
    return best;
}

std::vector<Index> complement(Index p, const std::vector<Index>& support)
{
    std::vector<bool> in(static_cast<std::size_t>(p), false);
    for (Index j : support) in[static_cast<std::size_t>(j)] = true;
    std::vector<Index> rest;
    for (Index j = 0; j < p; ++j) {
        if (!in[static_cast<std::size_t>(j)]) rest.push_back(j);
    }
    return rest;
}

void validate_support(const GroupedDesign& design, const std::vector<Index>& support)
{
    if (support.empty()) throw InvalidInput("support must name at least one group");
    std::set<Index> seen;
    for (Index j : support) {
        if (j < 0 || j >= design.p()) throw InvalidInput("support group " + std::to_string(j) + " out of range");
        if (!seen.insert(j).second) throw InvalidInput("support group " + std::to_string(j) + " repeated");
    }
}

Matrix restricted_gram(const GroupedDesign& design, const std::vector<Index>& cols)
{
    Matrix xs(design.n(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) xs.col(static_cast<Index>(k)) = design.x().col(cols[k]);
    return xs.transpose() * xs / static_cast<double>(design.n());
}

} // namespace

NormEstimate operator_norm(const Matrix& a, Exponent from, Exponent to)
{
    NormEstimate out;
    if (a.size() == 0) {
        out.exact = true;
        return out;
    }
    if (from.kind() == Exponent::Kind::One) {
        for (Index k = 0; k < a.cols(); ++k) out.value = std::max(out.value, group_norm(a.col(k), to));
        out.exact = true;
        return out;
    }
    if (to.kind() == Exponent::Kind::Inf) {
        const Exponent row_norm = from.conjugate();
        for (Index i = 0; i < a.rows(); ++i) {
            out.value = std::max(out.value, group_norm(a.row(i).transpose(), row_norm));
        }
        out.exact = true;
        return out;
    }
    if (from.kind() == Exponent::Kind::Two && to.kind() == Exponent::Kind::Two) {
        Eigen::JacobiSVD<Matrix> svd(a);
        out.value = svd.singularValues()(0);
        out.exact = true;
        return out;
    }
    out.value = ascent_estimate(a, from, to);
    out.exact = false;
    if (from == to) {
        const double col = operator_norm(a, Exponent::one(), Exponent::one()).value;
        const double row = operator_norm(a, Exponent::inf(), Exponent::inf()).value;
        const double t = from.reciprocal();
        out.upper = std::pow(col, t) * std::pow(row, 1.0 - t);
    }
    return out;
}

std::vector<Index> support_columns(const GroupPartition& groups, const std::vector<Index>& support)
{
    std::vector<Index> sorted = support;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Index> cols;
    for (Index j : sorted) {
        for (Index k = 0; k < groups.size(j); ++k) cols.push_back(groups.offset(j) + k);
    }
    return cols;
}

double min_gram_eigenvalue(const GroupedDesign& design, const std::vector<Index>& support)
{
    validate_support(design, support);
    const Matrix gram = restricted_gram(design, support_columns(design.groups(), support));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
}

IrrepresentableResult irrepresentable_constant(const GroupedDesign& design, const std::vector<Index>& support,
                                               Exponent q)
{
    validate_support(design, support);
    const double c_min = min_gram_eigenvalue(design, support);
    if (!(c_min > 1e-10)) {
        throw SingularGram("restricted Gram matrix is singular (C_min = " + std::to_string(c_min) + ")", c_min);
    }
    const auto cols = support_columns(design.groups(), support);
    Matrix xs(design.n(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) xs.col(static_cast<Index>(k)) = design.x().col(cols[k]);
    const Eigen::LLT<Matrix> chol(xs.transpose() * xs);

    IrrepresentableResult result;
    const Exponent dual = q.conjugate();
    for (Index j : complement(design.p(), support)) {
        const auto xj = design.block(j);
        // (X_j^T X_S)(X_S^T X_S)^{-1} = ((X_S^T X_S)^{-1} X_S^T X_j)^T
        const Matrix m = chol.solve(xs.transpose() * xj).transpose();
        const NormEstimate est = operator_norm(m, dual, dual);
        result.value = std::max(result.value, est.value);
        if (!est.exact) {
            result.exact = false;
            if (est.upper) result.upper = std::max(result.upper.value_or(0.0), *est.upper);
        }
    }
    return result;
}

std::optional<double> restricted_ratio(const GroupedDesign& design, const std::vector<Index>& s0, double multiplier,
                                       Exponent q, const Vector& g)
{
    if (g.size() != design.m()) throw InvalidInput("cone point length does not match design");
    const auto& groups = design.groups();
    const double dual_inv = q.conjugate().reciprocal();
    std::vector<bool> in(static_cast<std::size_t>(design.p()), false);
    for (Index j : s0) in[static_cast<std::size_t>(j)] = true;
    double on = 0.0;
    double off = 0.0;
    double denom = 0.0;
    for (Index j = 0; j < design.p(); ++j) {
        const double norm = group_norm(groups.block(g, j), q);
        const double d = static_cast<double>(groups.size(j));
        const double w = group_weight(groups.size(j), q);
        if (in[static_cast<std::size_t>(j)]) {
            on += w * norm;
            denom += std::pow(d, 2.0 * dual_inv - 1.0) * norm * norm;
        } else {
            off += w * norm;
        }
    }
    if (!(on > 0.0) || off > multiplier * on * (1.0 + 1e-12)) return std::nullopt;
    return (design.x() * g).norm() / std::sqrt(static_cast<double>(design.n()) * denom);
}

namespace {

struct ConeProblem {
    const GroupedDesign& design;
    const Matrix& gram;
    Exponent q;
    double multiplier;
    std::vector<bool> in;
    Vector denom_coef;
    Vector weights;

    double norm(const Vector& g, Index j) const { return group_norm(design.groups().block(g, j), q); }

    // Scales the off-support blocks so the cone constraint holds; false if the support part vanishes.
    bool restore(Vector& g) const
    {
        double on = 0.0;
        double off = 0.0;
        for (Index j = 0; j < design.p(); ++j) {
            const double v = weights(j) * norm(g, j);
            (in[static_cast<std::size_t>(j)] ? on : off) += v;
        }
        if (!(on > 0.0)) return false;
        if (off > multiplier * on) {
            const double shrink = multiplier * on / off * (1.0 - 1e-14);
            for (Index j = 0; j < design.p(); ++j) {
                if (!in[static_cast<std::size_t>(j)]) design.groups().block(g, j) *= shrink;
            }
        }
        const double d = std::sqrt(denom_sq(g));
        g /= d;
        return true;
    }

    double denom_sq(const Vector& g) const
    {
        double total = 0.0;
        for (Index j = 0; j < design.p(); ++j) {
            if (in[static_cast<std::size_t>(j)]) {
                const double v = norm(g, j);
                total += denom_coef(j) * v * v;
            }
        }
        return total;
    }

    double value(const Vector& g) const { return g.dot(gram * g) / denom_sq(g); }

    Vector gradient(const Vector& g, double f) const
    {
        Vector grad = 2.0 * (gram * g);
        const double dsq = denom_sq(g);
        for (Index j = 0; j < design.p(); ++j) {
            if (!in[static_cast<std::size_t>(j)]) continue;
            const Vector block = design.groups().block(g, j);
            const double v = group_norm(block, q);
            if (v == 0.0) continue;
            design.groups().block(grad, j) -= f * 2.0 * denom_coef(j) * v * dual_direction(block, q);
        }
        return grad / dsq;
    }

    // Backtracking descent on the squared ratio; g ends at the best feasible point seen.
    double descend(Vector& g, int iterations) const
    {
        if (!restore(g)) return std::numeric_limits<double>::infinity();
        double f = value(g);
        double step = 0.1;
        for (int it = 0; it < iterations && step > 1e-14; ++it) {
            const Vector grad = gradient(g, f);
            Vector trial = g - step * grad;
            if (!restore(trial)) {
                step *= 0.5;
                continue;
            }
            const double ft = value(trial);
            if (ft < f) {
                g = std::move(trial);
                f = ft;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        return f;
    }
};

double binomial(Index p, Index k)
{
    double total = 1.0;
    for (Index i = 0; i < k; ++i) total = total * static_cast<double>(p - i) / static_cast<double>(i + 1);
    return total;
}

} // namespace

KappaEstimate restricted_eigenvalue(const GroupedDesign& design, Index s_max, double multiplier, Exponent q,
                                    const KappaOptions& opts)
{
    if (s_max < 1 || s_max > design.p()) throw InvalidInput("s_max must lie in [1, p]");
    if (!(multiplier > 0.0)) throw InvalidInput("cone multiplier must be positive");

    const Index p = design.p();
    const Index k = std::min(s_max, p);
    const Matrix gram = design.x().transpose() * design.x() / static_cast<double>(design.n());
    const double dual_inv = q.conjugate().reciprocal();

    ConeProblem problem{design, gram, q, multiplier, {}, Vector(p), Vector(p)};
    for (Index j = 0; j < p; ++j) {
        const double d = static_cast<double>(design.groups().size(j));
        problem.denom_coef(j) = std::pow(d, 2.0 * dual_inv - 1.0);
        problem.weights(j) = group_weight(design.groups().size(j), q);
    }

    Eigen::SelfAdjointEigenSolver<Matrix> full(gram);
    std::vector<Vector> global_starts;
    for (Index i = 0; i < std::min<Index>(3, gram.rows()); ++i) global_starts.push_back(full.eigenvectors().col(i));

    KappaEstimate best;
    best.value = std::numeric_limits<double>::infinity();
    CounterRng rng(opts.seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k)});

    auto evaluate = [&](const std::vector<Index>& s0) {
        problem.in.assign(static_cast<std::size_t>(p), false);
        for (Index j : s0) problem.in[static_cast<std::size_t>(j)] = true;

        std::vector<Vector> starts = global_starts;
        const auto cols = support_columns(design.groups(), s0);
        Matrix sub(static_cast<Index>(cols.size()), static_cast<Index>(cols.size()));
        for (std::size_t a = 0; a < cols.size(); ++a) {
            for (std::size_t b = 0; b < cols.size(); ++b) {
                sub(static_cast<Index>(a), static_cast<Index>(b)) = gram(cols[a], cols[b]);
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> local(sub);
        Vector embedded = Vector::Zero(design.m());
        for (std::size_t a = 0; a < cols.size(); ++a) embedded(cols[a]) = local.eigenvectors()(static_cast<Index>(a), 0);
        starts.push_back(embedded);
        for (int r = 0; r < opts.starts; ++r) {
            Vector v(design.m());
            for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
            starts.push_back(v);
        }
        for (const Vector& start : starts) {
            Vector g = start;
            const double f = problem.descend(g, opts.iterations);
            if (!std::isfinite(f)) continue;
            const double ratio = std::sqrt(std::max(f, 0.0));
            if (ratio < best.value) {
                best.value = ratio;
                best.argmin = g;
            }
        }
        ++best.subsets_evaluated;
    };

    const double count = binomial(p, k);
    if (count <= static_cast<double>(opts.subset_budget)) {
        best.exhaustive_subsets = true;
        std::vector<Index> s0(static_cast<std::size_t>(k));
        std::iota(s0.begin(), s0.end(), Index{0});
        for (;;) {
            evaluate(s0);
            Index i = k - 1;
            while (i >= 0 && s0[static_cast<std::size_t>(i)] == p - k + i) --i;
            if (i < 0) break;
            ++s0[static_cast<std::size_t>(i)];
            for (Index t = i + 1; t < k; ++t) s0[static_cast<std::size_t>(t)] = s0[static_cast<std::size_t>(t - 1)] + 1;
        }
    } else {
        best.budget_exhausted = true;
        std::vector<Index> pool(static_cast<std::size_t>(p));
        for (std::size_t draw = 0; draw < opts.subset_budget; ++draw) {
            std::iota(pool.begin(), pool.end(), Index{0});
            for (Index t = 0; t < k; ++t) {
                const auto pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(p - t)));
                std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(t + pick)]);
            }
            std::vector<Index> s0(pool.begin(), pool.begin() + k);
            std::sort(s0.begin(), s0.end());
            evaluate(s0);
        }
    }
    if (!std::isfinite(best.value)) best.value = 0.0;
    return best;
}

LambdaSchedule lambda_schedule(double a, double sigma, Index m, Index n)
{
    if (!(a > 2.0 * std::numbers::sqrt2)) throw InvalidInput("schedule constant A must exceed 2 sqrt 2");
    if (!(sigma >= 0.0)) throw InvalidInput("sigma must be nonnegative");
    if (m < 2) throw InvalidInput("schedule needs m >= 2");
    if (n < 1) throw InvalidInput("schedule needs n >= 1");
    const double log_m = std::log(static_cast<double>(m));
    LambdaSchedule out;
    out.lambda = a * sigma * std::sqrt(log_m / static_cast<double>(n));
    out.probability_floor = 1.0 - std::pow(static_cast<double>(m), 1.0 - a * a / 8.0);
    return out;
}

DiagnosticsReport selection_verdict(const GroupedDesign& design, const std::vector<Index>& support,
                                   const std::optional<Coefficients>& beta_star, Exponent q, double lambda, double sigma,
                                   const VerdictThresholds& thresholds)
{
    validate_support(design, support);
    if (!(lambda >= 0.0)) throw InvalidInput("lambda must be nonnegative");

    DiagnosticsReport report;
    report.support = support;
    std::sort(report.support.begin(), report.support.end());
    report.lambda = lambda;
    report.sigma = sigma;
    report.thresholds = thresholds;

    if (beta_star) {
        if (!(beta_star->groups() == design.groups())) throw InvalidInput("beta_star partition does not match design");
        double rho = std::numeric_limits<double>::infinity();
        for (Index j : report.support) rho = std::min(rho, beta_star->block(j).lpNorm<Eigen::Infinity>());
        if (!(rho > 0.0)) throw InvalidInput("a support group has zero coefficients (rho* = 0)");
        report.rho_star = rho;
    }

    report.c_min = min_gram_eigenvalue(design, report.support);
    report.c_min_ok = report.c_min > thresholds.c_min;
    if (!report.c_min_ok) {
        throw SingularGram("restricted Gram matrix is singular (C_min = " + std::to_string(report.c_min) + ")",
                           report.c_min);
    }
    report.irrepresentable = irrepresentable_constant(design, report.support, q);
    report.delta = 1.0 - report.irrepresentable.value;
    const double irrep_for_verdict = report.irrepresentable.exact
                                         ? report.irrepresentable.value
                                         : report.irrepresentable.upper.value_or(report.irrepresentable.value);
    report.irrepresentable_ok = irrep_for_verdict < 1.0;

    const double n = static_cast<double>(design.n());
    const double s = static_cast<double>(report.support.size());
    const double p = static_cast<double>(design.p());
    const double d_bar = static_cast<double>(design.groups().max_size());
    const double growth_log = std::log((p - s) * d_bar);
    report.lambda_growth = growth_log > 0.0 ? lambda * lambda * n / growth_log : std::numeric_limits<double>::infinity();
    report.lambda_growth_ok = report.lambda_growth >= thresholds.lambda_growth;

    const Matrix gram = restricted_gram(design, support_columns(design.groups(), report.support));
    const Matrix inv = gram.llt().solve(Matrix::Identity(gram.rows(), gram.cols()));
    report.inverse_gram_inf_norm = inv.cwiseAbs().rowwise().sum().maxCoeff();

    if (report.rho_star) {
        const double d_weight = std::pow(d_bar, q.conjugate().reciprocal());
        const double inner = std::sqrt(std::log(s * d_bar) / n) + lambda * d_weight * report.inverse_gram_inf_norm;
        report.rho_condition = inner / *report.rho_star;
        report.rho_ok = *report.rho_condition <= thresholds.rho_condition;
    }
    return report;
}

DiagnosticsReport selection_verdict(const GroupedDesign& design, const Coefficients& beta_star, Exponent q, double lambda,
                                   double sigma, const VerdictThresholds& thresholds)
{
    const auto support = beta_star.active_set();
    if (support.empty()) throw InvalidInput("beta_star is zero; the support is empty");
    return selection_verdict(design, support, beta_star, q, lambda, sigma, thresholds);
}

RateBounds rate_bounds(double a, double sigma, double kappa, double s, double d_bar, double m, double n)
{
    if (!(kappa > 0.0)) throw InvalidInput("kappa must be positive");
    if (!(n > 0.0) || !(m > 1.0)) throw InvalidInput("rate bounds need n > 0 and m > 1");
    const double scale = a * a * sigma * sigma / (kappa * kappa);
    const double log_m = std::log(m);
    RateBounds out;
    out.prediction = 9.0 * scale * s * d_bar * log_m / n;
    out.l1 = 12.0 * scale * s * d_bar * std::sqrt(log_m / n);
    return out;
}

double oracle_constant(double delta)
{
    if (!(delta > 0.0)) throw InvalidInput("delta must be positive");
    const double b = 1.0 + 2.0 / delta;
    return 8.0 * b * b / (b + 1.0);
}

double oracle_bound_rhs(const GroupedDesign& design, const Vector& f_star, const Coefficients& beta,
                        const OracleInputs& inputs)
{
    check_dimensions(design, f_star, beta);
    if (!(inputs.kappa > 0.0)) throw InvalidInput("kappa must be positive");
    const double n = static_cast<double>(design.n());
    const double approx = (f_star - design.x() * beta.values()).squaredNorm() / n;
    const double support = static_cast<double>(beta.active_set().size());
    const double d_bar = static_cast<double>(design.groups().max_size());
    const double complexity = oracle_constant(inputs.delta) * inputs.a * inputs.a * inputs.sigma * inputs.sigma
                              / (inputs.kappa * inputs.kappa) * d_bar * support * std::log(inputs.m) / n;
    return (1.0 + inputs.delta) * (approx + complexity);
}

bool in_oracle_set(const GroupedDesign& design, const Vector& f_star, const Coefficients& beta, double b_const,
                   double lambda)
{
    check_dimensions(design, f_star, beta);
    const double approx = (f_star - design.x() * beta.values()).squaredNorm() / static_cast<double>(design.n());
    return approx <= b_const * lambda * lambda * static_cast<double>(beta.active_set().size());
}

} // namespace grplq
