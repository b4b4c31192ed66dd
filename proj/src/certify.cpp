#include "grplq/certify.hpp"

#include "grplq/prox.hpp"

#include <cmath>
#include <limits>

namespace grplq {

double block_kkt_residual(const Eigen::Ref<const Vector>& beta_j, const Eigen::Ref<const Vector>& c_j, double level,
                          Exponent q)
{
    if (level == 0.0) return c_j.lpNorm<Eigen::Infinity>();
    const bool zero = beta_j.lpNorm<Eigen::Infinity>() == 0.0;
    if (zero) return std::max(0.0, group_norm(c_j, q.conjugate()) - level);
    return level * subgradient_residual(beta_j, c_j / level, q);
}

KktCertificate kkt_check(const GroupedDesign& design, const Vector& y, const Coefficients& beta, const PenaltySpec& spec,
                         double tol)
{
    check_dimensions(design, y, beta);
    if (!(tol >= 0.0)) throw InvalidInput("certificate tolerance must be nonnegative");
    const Vector residual = y - design.x() * beta.values();
    const Vector corr = design.x().transpose() * residual / static_cast<double>(design.n());

    KktCertificate cert;
    cert.tolerance = tol;
    cert.per_group_residual.resize(design.p());
    const auto& groups = design.groups();
    for (Index j = 0; j < design.p(); ++j) {
        const double level = spec.lambda() * spec.weight(j);
        cert.per_group_residual(j) = block_kkt_residual(beta.block(j), groups.block(corr, j), level, spec.q());
    }
    cert.max_residual = cert.per_group_residual.maxCoeff();
    cert.optimal = cert.max_residual <= tol;
    return cert;
}

CompactResult reduce_to_compact(const GroupedDesign& design, const Vector& y, const Coefficients& beta,
                                const PenaltySpec& spec, double tol)
{
    const KktCertificate cert = kkt_check(design, y, beta, spec, tol);
    if (!cert.optimal) {
        throw InvalidInput("reduce_to_compact requires an optimal input; max KKT residual "
                           + std::to_string(cert.max_residual) + " exceeds " + std::to_string(tol));
    }
    CompactResult result{beta, 0, false};
    const Index n = design.n();
    const Vector fitted = design.x() * beta.values();

    Coefficients current = beta;
    for (;;) {
        const std::vector<Index> active = current.active_set();
        const Index s = static_cast<Index>(active.size());
        if (s <= n) break;

        Matrix blocks(n, s);
        Vector norms(s);
        for (Index k = 0; k < s; ++k) {
            const Index j = active[static_cast<std::size_t>(k)];
            blocks.col(k) = design.block(j) * current.block(j);
            norms(k) = spec.weight(j) * group_norm(current.block(j), spec.q());
        }

        Eigen::ColPivHouseholderQR<Matrix> qr(blocks);
        qr.setThreshold(1e-10);
        const Index rank = qr.rank();
        if (rank >= s) {
            result.ambiguous = true;
            break;
        }
        const Matrix r = qr.matrixR().topLeftCorner(std::min(n, s), s).template triangularView<Eigen::Upper>();
        Vector z = Vector::Zero(s);
        z(rank) = 1.0;
        if (rank > 0) {
            z.head(rank) = -r.topLeftCorner(rank, rank).template triangularView<Eigen::Upper>().solve(r.col(rank).head(rank));
        }
        Vector w = qr.colsPermutation() * z;
        w /= w.lpNorm<Eigen::Infinity>();

        const double scale = blocks.colwise().norm().maxCoeff();
        if ((blocks * w).norm() > 1e-9 * std::max(scale, 1e-300) * std::sqrt(static_cast<double>(s))) {
            result.ambiguous = true;
            break;
        }

        // Orient the step so the penalty does not increase to first order.
        if (w.dot(norms) > 0.0 || w.minCoeff() >= 0.0) w = -w;
        if (w.minCoeff() >= 0.0) {
            result.ambiguous = true;
            break;
        }

        double step = std::numeric_limits<double>::infinity();
        Index hit = -1;
        for (Index k = 0; k < s; ++k) {
            if (w(k) < 0.0 && -1.0 / w(k) < step) {
                step = -1.0 / w(k);
                hit = k;
            }
        }
        for (Index k = 0; k < s; ++k) {
            const Index j = active[static_cast<std::size_t>(k)];
            const double factor = k == hit ? 0.0 : std::max(0.0, 1.0 + step * w(k));
            current.block(j) *= factor;
        }
        ++result.groups_removed;
    }

    if (result.ambiguous) {
        result.beta = beta;
        result.groups_removed = 0;
        return result;
    }
    const double drift = (design.x() * current.values() - fitted).lpNorm<Eigen::Infinity>();
    if (drift > 1e-10 * std::max(1.0, fitted.lpNorm<Eigen::Infinity>())) {
        result.beta = beta;
        result.groups_removed = 0;
        result.ambiguous = true;
        return result;
    }
    result.beta = std::move(current);
    return result;
}

} // namespace grplq
