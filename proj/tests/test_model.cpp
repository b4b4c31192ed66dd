#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "grplq/model.hpp"
#include "test_support.hpp"

#include <limits>

using namespace grplq;

TEST_CASE("exponent parsing and conjugates")
{
    CHECK(Exponent::parse("1") == Exponent::one());
    CHECK(Exponent::parse("2") == Exponent::two());
    CHECK(Exponent::parse("inf") == Exponent::inf());
    CHECK(Exponent::parse("1").conjugate() == Exponent::inf());
    CHECK(Exponent::parse("inf").conjugate() == Exponent::one());
    CHECK(Exponent::parse("2").conjugate() == Exponent::two());
    CHECK(Exponent::parse("3").conjugate().value() == doctest::Approx(1.5));
    CHECK(Exponent::parse("1.5").conjugate().value() == doctest::Approx(3.0));
    CHECK(Exponent::parse("2.0") == Exponent::two());
    CHECK(Exponent::inf().reciprocal() == 0.0);
    CHECK_THROWS_AS(Exponent::parse("0.5"), InvalidInput);
    CHECK_THROWS_AS(Exponent::parse("abc"), InvalidInput);
    CHECK_THROWS_AS(Exponent::parse("3x"), InvalidInput);
}

TEST_CASE("group weights")
{
    CHECK(group_weight(4, Exponent::two()) == doctest::Approx(2.0));
    CHECK(group_weight(4, Exponent::inf()) == doctest::Approx(4.0));
    CHECK(group_weight(4, Exponent::one()) == doctest::Approx(1.0));
    // q = 3: q' = 1.5, 1/q' = 2/3
    CHECK(group_weight(8, Exponent::real(3.0)) == doctest::Approx(4.0));
}

TEST_CASE("group norms against direct sums")
{
    CounterRng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector v = testing::gaussian(rng, 1 + static_cast<Index>(rng.below(6)));
        for (double q : {1.0, 1.5, 2.0, 3.0, 7.0}) {
            CHECK(group_norm(v, Exponent::real(q)) == doctest::Approx(testing::lq_norm(v, q)).epsilon(1e-12));
        }
        CHECK(group_norm(v, Exponent::inf()) == v.cwiseAbs().maxCoeff());
    }
    Vector big(2);
    big << 1e200, 1e200;
    CHECK(group_norm(big, Exponent::real(3.0)) == doctest::Approx(1e200 * std::cbrt(2.0)));
}

TEST_CASE("partition validation")
{
    CHECK_THROWS_AS(GroupPartition({2, 0, 1}), InvalidInput);
    const GroupPartition g({2, 1, 3});
    CHECK(g.num_coefficients() == 6);
    CHECK(g.offset(2) == 3);
    CHECK(g.max_size() == 3);
    CHECK_THROWS_AS(GroupedDesign(Matrix::Ones(4, 5), g), InvalidInput);
}

TEST_CASE("standardize rescales columns and maps coefficients back")
{
    CounterRng rng(11);
    Matrix raw = testing::gaussian(rng, 30, 5);
    raw.col(1) *= 40.0;
    raw.col(3).array() += 5.0;
    const GroupPartition g({2, 3});
    for (bool center : {false, true}) {
        const GroupedDesign d = standardize(raw, g, center);
        CHECK(d.is_standardized(1e-12));
        const Vector beta = testing::gaussian(rng, 5);
        const Vector raw_beta = d.to_original_units(beta);
        Matrix ref = raw;
        if (center) ref.rowwise() -= raw.colwise().mean();
        CHECK((ref * raw_beta - d.x() * beta).norm() < 1e-10);
        CHECK(d.column_means().has_value() == center);
    }
    Matrix zero = raw;
    zero.col(2).setZero();
    CHECK_THROWS_AS(standardize(zero, g), InvalidInput);
}

TEST_CASE("objective by hand")
{
    Matrix x(2, 2);
    x << 1, 0, 0, 1;
    const GroupPartition g({2});
    const GroupedDesign d(x, g);
    Vector y(2);
    y << 1, 2;
    const Coefficients beta(Vector::Constant(2, 1.0), g);
    // residual (0, 1): 1/(2*2) * 1 = 0.25; penalty sqrt(2) * sqrt(2) = 2
    const PenaltySpec spec(Exponent::two(), 0.5, g);
    CHECK(objective(d, y, beta, spec) == doctest::Approx(0.25 + 0.5 * 2.0));
    CHECK(penalty_value(beta, PenaltySpec(Exponent::inf(), 1.0, g)) == doctest::Approx(2.0));
    CHECK_THROWS_AS(objective(d, Vector::Ones(3), beta, spec), InvalidInput);
    CHECK_THROWS_AS(PenaltySpec(Exponent::two(), -1.0, g), InvalidInput);
}

TEST_CASE("active sets")
{
    const GroupPartition g({1, 2, 2});
    Vector v(5);
    v << 0, 0, 1e-9, 3, 0;
    const Coefficients beta(v, g);
    CHECK(beta.active_set() == std::vector<Index>{1, 2});
    CHECK(beta.active_set(1e-6) == std::vector<Index>{2});
    CHECK_FALSE(beta.is_active(0));
}
