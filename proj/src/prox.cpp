#include "grplq/prox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace grplq {

namespace {

constexpr int kMultiplierIterations = 200;
constexpr double kMultiplierTol = 1e-10;

double sign(double x)
{
    return (x > 0.0) - (x < 0.0);
}

Vector project_l1(const Eigen::Ref<const Vector>& v, double radius)
{
    if (v.lpNorm<1>() <= radius) return v;
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(mags.begin(), mags.end(), std::greater<>());

    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        cumulative += mags[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (mags[k] - candidate > 0.0) threshold = candidate;
    }
    Vector x(v.size());
    for (Index i = 0; i < v.size(); ++i) x(i) = sign(v(i)) * std::max(std::abs(v(i)) - threshold, 0.0);
    return x;
}

// Root of u + theta * u^{e-1} = a on [0, a] for e > 1, a >= 0.
double solve_scalar(double a, double theta, double e)
{
    if (a == 0.0) return 0.0;
    if (theta == 0.0) return a;
    double lo = 0.0;
    double hi = a;
    double u = a;
    for (int it = 0; it < 100; ++it) {
        const double pw = std::pow(u, e - 1.0);
        const double h = u + theta * pw - a;
        if (h > 0.0) {
            hi = u;
        } else if (h < 0.0) {
            lo = u;
        } else {
            return u;
        }
        if (hi - lo <= 1e-17 * a) break;
        const double slope = u > 0.0 ? 1.0 + theta * (e - 1.0) * pw / u : 0.0;
        double next = (slope > 0.0 && std::isfinite(slope)) ? u - h / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        u = next;
    }
    return lo;
}

Vector project_lp(const Eigen::Ref<const Vector>& v, double radius, double e)
{
    const double top = v.lpNorm<Eigen::Infinity>();
    const Vector a = v.cwiseAbs() / top;
    const double r = radius / top;
    const double target = std::pow(r, e);

    auto mass = [&](double theta, Vector& u) {
        double total = 0.0;
        for (Index i = 0; i < a.size(); ++i) {
            u(i) = solve_scalar(a(i), theta, e);
            total += std::pow(u(i), e);
        }
        return total;
    };

    Vector u(a.size());
    Vector u_hi(a.size());
    double lo = 0.0;
    double hi = 1.0;
    while (mass(hi, u_hi) > target) {
        lo = hi;
        hi *= 2.0;
    }
    for (int it = 0; it < kMultiplierIterations; ++it) {
        if (hi - lo <= kMultiplierTol * kMultiplierTol * std::max(1.0, hi)) break;
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (mass(mid, u) > target) {
            lo = mid;
        } else {
            hi = mid;
            u_hi = u;
        }
    }
    Vector x(v.size());
    for (Index i = 0; i < v.size(); ++i) x(i) = sign(v(i)) * top * u_hi(i);
    return x;
}

} // namespace

Vector project_ball(const Eigen::Ref<const Vector>& v, double radius, Exponent p)
{
    if (!(radius >= 0.0)) throw InvalidInput("projection radius must be nonnegative");
    if (radius == 0.0) return Vector::Zero(v.size());
    switch (p.kind()) {
    case Exponent::Kind::One: return project_l1(v, radius);
    case Exponent::Kind::Two: {
        const double norm = v.norm();
        if (norm <= radius) return v;
        return v * (radius / norm);
    }
    case Exponent::Kind::Inf: return v.cwiseMax(-radius).cwiseMin(radius);
    case Exponent::Kind::Other: break;
    }
    if (group_norm(v, p) <= radius) return v;
    return project_lp(v, radius, p.value());
}

Vector prox_lq(const Eigen::Ref<const Vector>& v, double t, Exponent q)
{
    if (!(t >= 0.0)) throw InvalidInput("prox weight must be nonnegative");
    switch (q.kind()) {
    case Exponent::Kind::One: {
        Vector x(v.size());
        for (Index i = 0; i < v.size(); ++i) x(i) = sign(v(i)) * std::max(std::abs(v(i)) - t, 0.0);
        return x;
    }
    case Exponent::Kind::Two: {
        const double norm = v.norm();
        if (norm <= t) return Vector::Zero(v.size());
        return v * (1.0 - t / norm);
    }
    default: break;
    }
    return v - project_ball(v, t, q.conjugate());
}

double subgradient_residual(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& g, Exponent q)
{
    if (v.size() != g.size()) throw InvalidInput("subgradient length does not match block length");
    if (q.kind() == Exponent::Kind::One) {
        double worst = 0.0;
        for (Index i = 0; i < v.size(); ++i) {
            const double r = v(i) != 0.0 ? std::abs(g(i) - sign(v(i))) : std::max(0.0, std::abs(g(i)) - 1.0);
            worst = std::max(worst, r);
        }
        return worst;
    }
    const double dual_excess = std::max(0.0, group_norm(g, q.conjugate()) - 1.0);
    const double norm = group_norm(v, q);
    if (norm == 0.0) return dual_excess;
    return dual_excess + std::abs(g.dot(v) / norm - 1.0);
}

} // namespace grplq
