#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grplq/certify.hpp"
#include "grplq/solver.hpp"
#include "test_support.hpp"

using namespace grplq;

namespace {

Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

} // namespace

TEST_CASE("block residual by hand")
{
    // zero block: ||c||_2 = 5 against level 4
    CHECK(block_kkt_residual(vec({0, 0}), vec({3, 4}), 4.0, Exponent::two()) == doctest::Approx(1.0));
    CHECK(block_kkt_residual(vec({0, 0}), vec({3, 4}), 5.0, Exponent::two()) == 0.0);
    // active block aligned with c at the right length
    CHECK(block_kkt_residual(vec({0.3, 0.4}), vec({3, 4}), 5.0, Exponent::two()) < 1e-15);
    // q = inf: zero block compares ||c||_1
    CHECK(block_kkt_residual(vec({0, 0}), vec({1, -2}), 2.5, Exponent::inf()) == doctest::Approx(0.5));
    // q = 1: componentwise
    CHECK(block_kkt_residual(vec({1, 0}), vec({2, 1}), 2.0, Exponent::one()) == 0.0);
    CHECK(block_kkt_residual(vec({1, 0}), vec({1, 1}), 2.0, Exponent::one()) == doctest::Approx(1.0));
    // lambda = 0: plain gradient size
    CHECK(block_kkt_residual(vec({1, 0}), vec({0.1, -0.3}), 0.0, Exponent::two()) == doctest::Approx(0.3));
}

TEST_CASE("crafted optima certify and perturbations fail")
{
    CounterRng rng(201);
    for (Exponent q : {Exponent::one(), Exponent::two(), Exponent::inf(), Exponent::real(3.0)}) {
        const auto c = testing::crafted_dense_optimum(rng, 5, {2, 1, 3}, q, 0.4);
        const auto cert = kkt_check(c.design, c.y, c.beta, c.spec, 1e-8);
        CHECK(cert.optimal);
        CHECK(cert.max_residual < 1e-12);
        Coefficients moved = c.beta;
        moved.values()(0) += 0.1;
        CHECK_FALSE(kkt_check(c.design, c.y, moved, c.spec, 1e-8).optimal);
    }
}

TEST_CASE("zero vector certifies exactly at lambda_max")
{
    CounterRng rng(202);
    const GroupPartition g({2, 2, 2});
    const GroupedDesign d(testing::unit_columns(testing::gaussian(rng, 20, 6)), g);
    const Vector y = testing::gaussian(rng, 20);
    const double lmax = lambda_max(d, y, Exponent::two());
    const Coefficients zero(g);
    CHECK(kkt_check(d, y, zero, PenaltySpec(Exponent::two(), lmax, g), 1e-12).optimal);
    CHECK_FALSE(kkt_check(d, y, zero, PenaltySpec(Exponent::two(), 0.9 * lmax, g), 1e-8).optimal);
}

TEST_CASE("reduce_to_compact keeps fitted values and objective")
{
    CounterRng rng(203);
    for (Exponent q : {Exponent::one(), Exponent::two(), Exponent::inf()}) {
        for (int trial = 0; trial < 10; ++trial) {
            const Index n = 2 + static_cast<Index>(rng.below(3));
            const auto sizes = testing::random_sizes(rng, n + 3, 2);
            const auto c = testing::crafted_dense_optimum(rng, n, sizes, q, 0.3);
            REQUIRE(static_cast<Index>(c.beta.active_set().size()) > n);
            const CompactResult red = reduce_to_compact(c.design, c.y, c.beta, c.spec, 1e-8);
            CHECK_FALSE(red.ambiguous);
            CHECK(static_cast<Index>(red.beta.active_set().size()) <= n);
            const Vector f0 = c.design.x() * c.beta.values();
            const Vector f1 = c.design.x() * red.beta.values();
            CHECK((f0 - f1).cwiseAbs().maxCoeff() <= 1e-10);
            CHECK(std::abs(objective(c.design, c.y, red.beta, c.spec) - objective(c.design, c.y, c.beta, c.spec)) <= 1e-10);
            CHECK(kkt_check(c.design, c.y, red.beta, c.spec, 1e-8).optimal);
        }
    }
}

TEST_CASE("reduce_to_compact leaves compact inputs alone and rejects non-optimal ones")
{
    CounterRng rng(204);
    const auto c = testing::crafted_dense_optimum(rng, 6, {2, 2}, Exponent::two(), 0.5);
    const CompactResult red = reduce_to_compact(c.design, c.y, c.beta, c.spec, 1e-8);
    CHECK(red.groups_removed == 0);
    CHECK((red.beta.values() - c.beta.values()).norm() == 0.0);
    Coefficients moved = c.beta;
    moved.values()(1) += 0.2;
    CHECK_THROWS_AS(reduce_to_compact(c.design, c.y, moved, c.spec, 1e-8), InvalidInput);
}
