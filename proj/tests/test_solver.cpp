#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grplq/certify.hpp"
#include "grplq/solver.hpp"
#include "test_support.hpp"

using namespace grplq;

namespace {

struct Problem {
    GroupedDesign design;
    Vector y;
};

Problem random_problem(CounterRng& rng, Index n, Index p, Index max_d)
{
    const auto sizes = testing::random_sizes(rng, p, max_d);
    const GroupPartition g(sizes);
    const Matrix x = testing::unit_columns(testing::gaussian(rng, n, g.num_coefficients()));
    Vector beta = Vector::Zero(g.num_coefficients());
    beta.head(std::min<Index>(3, beta.size())).setConstant(1.0);
    return Problem{GroupedDesign(x, g), x * beta + 0.5 * testing::gaussian(rng, n)};
}

} // namespace

TEST_CASE("objective agrees with an accelerated proximal gradient reference")
{
    CounterRng rng(101);
    for (int trial = 0; trial < 12; ++trial) {
        const auto pr = random_problem(rng, 40, 6, 3);
        for (double q : {1.0, 2.0, double(INFINITY)}) {
            const Exponent e = std::isinf(q) ? Exponent::inf() : Exponent::real(q);
            const double lambda = 0.3 * lambda_max(pr.design, pr.y, e);
            const PenaltySpec spec(e, lambda, pr.design.groups());
            const FitResult fr = fit(pr.design, pr.y, spec);
            REQUIRE(fr.converged);
            const Coefficients ref(testing::fista(pr.design.x(), pr.y, pr.design.groups().sizes(), q, lambda),
                                   pr.design.groups());
            CHECK(fr.objective <= objective(pr.design, pr.y, ref, spec) + 1e-10);
            CHECK(fr.objective == doctest::Approx(objective(pr.design, pr.y, ref, spec)).epsilon(1e-8));
        }
    }
}

TEST_CASE("lambda_max is the smallest penalty with a zero solution")
{
    CounterRng rng(102);
    for (int trial = 0; trial < 10; ++trial) {
        const auto pr = random_problem(rng, 30, 5, 3);
        for (Exponent e : {Exponent::one(), Exponent::two(), Exponent::inf(), Exponent::real(3.0)}) {
            const double lmax = lambda_max(pr.design, pr.y, e);
            // direct evaluation of max_j ||X_j'y/n||_{q'} / w_j
            double ref = 0.0;
            for (Index j = 0; j < pr.design.p(); ++j) {
                const Vector c = pr.design.block(j).transpose() * pr.y / double(pr.design.n());
                ref = std::max(ref, testing::lq_norm(c, e.conjugate().value()) /
                                        group_weight(pr.design.groups().size(j), e));
            }
            CHECK(lmax == doctest::Approx(ref).epsilon(1e-12));
            CHECK(fit(pr.design, pr.y, PenaltySpec(e, lmax, pr.design.groups())).beta.active_set().empty());
            CHECK_FALSE(fit(pr.design, pr.y, PenaltySpec(e, 0.95 * lmax, pr.design.groups())).beta.active_set().empty());
        }
    }
}

TEST_CASE("orthonormal groups reduce to one prox step")
{
    CounterRng rng(103);
    const GroupPartition g({2, 3, 1, 2});
    const Matrix x = testing::orthonormal_design(rng, 50, 8);
    const GroupedDesign d(x, g);
    const Vector y = testing::gaussian(rng, 50);
    const Vector z = x.transpose() * y / 50.0;
    const double lambda = 0.1;
    const FitResult fr = fit(d, y, PenaltySpec(Exponent::two(), lambda, g));
    for (Index j = 0; j < g.num_groups(); ++j) {
        const Vector zj = g.block(z, j);
        const double shrink = std::max(0.0, 1.0 - lambda * std::sqrt(double(g.size(j))) / zj.norm());
        CHECK((fr.beta.block(j) - shrink * zj).norm() < 1e-12);
    }
}

TEST_CASE("general q fits certify")
{
    CounterRng rng(104);
    const auto pr = random_problem(rng, 40, 6, 3);
    for (double q : {1.5, 3.0}) {
        const PenaltySpec spec(Exponent::real(q), 0.2 * lambda_max(pr.design, pr.y, Exponent::real(q)),
                               pr.design.groups());
        const FitResult fr = fit(pr.design, pr.y, spec);
        CHECK(fr.converged);
        CHECK(kkt_check(pr.design, pr.y, fr.beta, spec, 1e-8).optimal);
    }
}

TEST_CASE("warm path agrees with cold fits")
{
    CounterRng rng(105);
    const auto pr = random_problem(rng, 40, 8, 3);
    const auto grid = default_lambda_grid(pr.design, pr.y, Exponent::two(), 10, 1e-2);
    CHECK(grid.front() == doctest::Approx(lambda_max(pr.design, pr.y, Exponent::two())).epsilon(1e-15));
    const PathResult path = fit_path(pr.design, pr.y, Exponent::two(), grid);
    REQUIRE(path.fits.size() == grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const FitResult cold = fit(pr.design, pr.y, PenaltySpec(Exponent::two(), grid[k], pr.design.groups()));
        CHECK(path.fits[k].objective == doctest::Approx(cold.objective).epsilon(1e-8));
    }
    CHECK_THROWS_AS(fit_path(pr.design, pr.y, Exponent::two(), {0.1, 0.2}), InvalidInput);
}

TEST_CASE("constrained fit matches the budget")
{
    CounterRng rng(106);
    const auto pr = random_problem(rng, 40, 6, 2);
    const PenaltySpec unit(Exponent::two(), 1.0, pr.design.groups());
    const double full = penalty_value(fit(pr.design, pr.y, unit.with_lambda(1e-9)).beta, unit);
    for (double frac : {0.2, 0.5, 0.9}) {
        const FitResult fr = fit_constrained(pr.design, pr.y, Exponent::two(), frac * full);
        CHECK(penalty_value(fr.beta, unit) == doctest::Approx(frac * full).epsilon(1e-5));
        // the constrained solution is the penalized one at the multiplier found
        const FitResult pen = fit(pr.design, pr.y, unit.with_lambda(fr.lambda));
        CHECK((pen.beta.values() - fr.beta.values()).norm() < 1e-5);
    }
    CHECK(fit_constrained(pr.design, pr.y, Exponent::two(), 0.0).beta.values().norm() == 0.0);
    CHECK_THROWS_AS(fit_constrained(pr.design, pr.y, Exponent::two(), -1.0), InvalidInput);
}

TEST_CASE("power iteration")
{
    CounterRng rng(107);
    const Matrix a = testing::gaussian(rng, 20, 6);
    const Matrix gram = a.transpose() * a;
    const double ref = Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues().maxCoeff();
    CHECK(power_iteration(gram) == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("options validation")
{
    SolverOptions opts;
    opts.tol = 0.0;
    CHECK_THROWS_AS(opts.validate(), InvalidInput);
}
