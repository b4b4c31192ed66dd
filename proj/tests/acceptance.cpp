// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "grplq/certify.hpp"
#include "grplq/cli.hpp"
#include "grplq/experiments.hpp"
#include "grplq/io.hpp"
#include "grplq/prox.hpp"
#include "grplq/solver.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <unistd.h>

using namespace grplq;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Exponent exponent_of(double q)
{
    return std::isinf(q) ? Exponent::inf() : Exponent::real(q);
}

// 1. prox output against a refined grid, and the Moreau decomposition v = prox + projection
Outcome prox_oracle()
{
    CounterRng rng(1001);
    const std::vector<double> qs{1.0, 1.5, 2.0, 3.0, INFINITY};
    double worst_obj = 0.0;
    double worst_moreau = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const double q = qs[rng.below(qs.size())];
        const Exponent e = exponent_of(q);
        const Index d = 1 + static_cast<Index>(rng.below(3));
        const Vector v = 2.0 * testing::gaussian(rng, d);
        const double t = 0.05 + 1.5 * rng.uniform();

        const Vector x = prox_lq(v, t, e);
        const Vector proj = project_ball(v, t, e.conjugate());
        auto f = [&](const Vector& z) { return 0.5 * (z - v).squaredNorm() + t * testing::lq_norm(z, q); };
        const double grid = testing::grid_minimum(f, v.cwiseMin(0.0), v.cwiseMax(0.0));
        worst_obj = std::max(worst_obj, std::abs(f(x) - grid));

        // x + p = v with ||p||_{q'} <= t and <x, p> = t ||x||_q pins down both parts
        const double qd = e.conjugate().value();
        const double split = (x + proj - v).cwiseAbs().maxCoeff();
        const double feasible = std::max(0.0, testing::lq_norm(proj, qd) - t);
        const double pairing = std::abs(x.dot(proj) - t * testing::lq_norm(x, q));
        worst_moreau = std::max({worst_moreau, split, feasible, pairing});
    }
    return Outcome{worst_obj <= 1e-6 && worst_moreau <= 1e-10,
                   "max |prox obj - grid min| = " + fmt("%.2e", worst_obj) +
                       ", max Moreau residual = " + fmt("%.2e", worst_moreau)};
}

// 2. converged fits certify; a 0.1 move on an active coordinate breaks the certificate
Outcome kkt_round_trip()
{
    CounterRng rng(1002);
    const std::vector<Exponent> qs{Exponent::one(), Exponent::two(), Exponent::inf()};
    int converged = 0, certified = 0, perturbed_failed = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 10 + static_cast<Index>(rng.below(41));
        const Index p = 2 + static_cast<Index>(rng.below(19));
        const GroupPartition g(testing::random_sizes(rng, p, 4));
        const Matrix x = testing::unit_columns(testing::gaussian(rng, n, g.num_coefficients()));
        Vector beta = Vector::Zero(g.num_coefficients());
        for (Index j = 0; j < std::min<Index>(3, p); ++j) g.block(beta, j).setConstant(rng.sign());
        const Vector y = x * beta + 0.5 * testing::gaussian(rng, n);
        const GroupedDesign design(x, g);
        const Exponent q = qs[static_cast<std::size_t>(trial % 3)];
        const double lambda = (0.05 + 0.85 * rng.uniform()) * lambda_max(design, y, q);
        const PenaltySpec spec(q, lambda, g);

        const FitResult fr = fit(design, y, spec);
        if (!fr.converged) continue;
        ++converged;
        if (kkt_check(design, y, fr.beta, spec, 1e-8).optimal) ++certified;
        const auto active = fr.beta.active_set();
        Coefficients moved = fr.beta;
        const Index j = active[rng.below(active.size())];
        Index k = 0;
        moved.block(j).cwiseAbs().maxCoeff(&k);
        moved.block(j)(k) += 0.1;
        if (!kkt_check(design, y, moved, spec, 1e-8).optimal) ++perturbed_failed;
    }
    return Outcome{converged > 0 && certified == converged && perturbed_failed == converged,
                   std::to_string(converged) + "/200 converged, " + std::to_string(certified) + " certified, " +
                       std::to_string(perturbed_failed) + " perturbed fits rejected"};
}

// 3. orthonormal designs: block soft-thresholding (q = 2) and soft-thresholding (q = 1)
Outcome closed_forms()
{
    CounterRng rng(1003);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index p = 2 + static_cast<Index>(rng.below(6));
        const GroupPartition g(testing::random_sizes(rng, p, 4));
        const Index n = g.num_coefficients() + 5 + static_cast<Index>(rng.below(30));
        const Matrix x = testing::orthonormal_design(rng, n, g.num_coefficients());
        const GroupedDesign design(x, g);
        const Vector y = x * testing::gaussian(rng, g.num_coefficients()) * 0.5 + testing::gaussian(rng, n);
        const Vector z = x.transpose() * y / static_cast<double>(n);
        const double lambda = 0.5 * rng.uniform() * z.cwiseAbs().maxCoeff();

        const FitResult f2 = fit(design, y, PenaltySpec(Exponent::two(), lambda, g));
        for (Index j = 0; j < p; ++j) {
            const Vector zj = g.block(z, j);
            const double shrink = std::max(0.0, 1.0 - lambda * std::sqrt(static_cast<double>(g.size(j))) / zj.norm());
            worst = std::max(worst, (f2.beta.block(j) - shrink * zj).cwiseAbs().maxCoeff());
        }
        const FitResult f1 = fit(design, y, PenaltySpec(Exponent::one(), lambda, g));
        const Vector soft = z.unaryExpr([lambda](double a) { return std::copysign(std::max(std::abs(a) - lambda, 0.0), a); });
        worst = std::max(worst, (f1.beta.values() - soft).cwiseAbs().maxCoeff());
    }
    return Outcome{worst <= 1e-8, "max coefficient deviation = " + fmt("%.2e", worst)};
}

// 4. q = 1 objective does not depend on the grouping
Outcome grouping_invariance()
{
    CounterRng rng(1004);
    double worst = 0.0;
    int nonconverged = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 20 + static_cast<Index>(rng.below(40));
        const GroupPartition g(testing::random_sizes(rng, 3 + static_cast<Index>(rng.below(8)), 4));
        const Index m = g.num_coefficients();
        const Matrix x = testing::unit_columns(testing::gaussian(rng, n, m));
        Vector beta = Vector::Zero(m);
        beta.head(std::min<Index>(m, 4)) = testing::gaussian(rng, std::min<Index>(m, 4));
        const Vector y = x * beta + 0.5 * testing::gaussian(rng, n);
        const GroupedDesign grouped(x, g);
        const GroupedDesign single(x, GroupPartition(std::vector<Index>(static_cast<std::size_t>(m), 1)));
        const double lambda = (0.05 + 0.8 * rng.uniform()) * lambda_max(single, y, Exponent::one());
        const FitResult a = fit(grouped, y, PenaltySpec(Exponent::one(), lambda, grouped.groups()));
        const FitResult b = fit(single, y, PenaltySpec(Exponent::one(), lambda, single.groups()));
        if (!a.converged || !b.converged) ++nonconverged;
        worst = std::max(worst, std::abs(a.objective - b.objective));
    }
    return Outcome{worst <= 1e-8 && nonconverged == 0,
                   "max objective difference = " + fmt("%.2e", worst) + ", nonconverged = " + std::to_string(nonconverged)};
}

// 5. reduction to at most n active groups on crafted dense optima
Outcome compact_reduction()
{
    CounterRng rng(1005);
    const std::vector<Exponent> qs{Exponent::two(), Exponent::inf(), Exponent::one()};
    double worst_fit = 0.0, worst_obj = 0.0;
    int cases = 0, ok = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const Index n = 2 + static_cast<Index>(rng.below(3));
        const Exponent q = qs[static_cast<std::size_t>(trial % 3)];
        const auto sizes = testing::random_sizes(rng, n + 2 + static_cast<Index>(rng.below(4)), 3);
        const auto c = testing::crafted_dense_optimum(rng, n, sizes, q, 0.2 + rng.uniform());
        if (static_cast<Index>(c.beta.active_set().size()) <= n) continue;
        ++cases;
        const CompactResult red = reduce_to_compact(c.design, c.y, c.beta, c.spec, 1e-8);
        const double dfit = (c.design.x() * (red.beta.values() - c.beta.values())).cwiseAbs().maxCoeff();
        const double dobj = std::abs(objective(c.design, c.y, red.beta, c.spec) - objective(c.design, c.y, c.beta, c.spec));
        worst_fit = std::max(worst_fit, dfit);
        worst_obj = std::max(worst_obj, dobj);
        if (!red.ambiguous && static_cast<Index>(red.beta.active_set().size()) <= n && dfit <= 1e-10 && dobj <= 1e-10 &&
            kkt_check(c.design, c.y, red.beta, c.spec, 1e-8).optimal)
            ++ok;
    }
    return Outcome{cases > 0 && ok == cases, std::to_string(ok) + "/" + std::to_string(cases) +
                                                 " reduced; max fitted change = " + fmt("%.2e", worst_fit) +
                                                 ", max objective change = " + fmt("%.2e", worst_obj)};
}

ExperimentConfig linear_regime()
{
    ExperimentConfig c;
    c.p = 64;
    c.group_size = 2;
    c.s = 3;
    c.sigma = 0.5;
    c.a = 3.0;
    c.beta_magnitude = 1.0;
    c.design = DesignKind::Orthonormalized;
    c.replicates = 100;
    return c;
}

// 6. selection consistency at desk scale
Outcome selection_regime()
{
    ExperimentConfig c = linear_regime();
    c.n_grid = {100, 200, 400};
    const McReport r = run_selection(c);
    bool monotone = true;
    std::string rates;
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        if (k > 0 && r.rows[k].selection_rate < r.rows[k - 1].selection_rate - 0.1) monotone = false;
        rates += (k ? ", " : "") + fmt("%.2f", r.rows[k].selection_rate);
    }
    const double last = r.rows.back().selection_rate;
    return Outcome{last >= 0.9 && monotone, "recovery rates over n = 100, 200, 400: " + rates};
}

// 7. error rates and the prediction bound
Outcome rates_regime()
{
    ExperimentConfig c = linear_regime();
    c.n_grid = {200, 400, 800, 1600};
    const McReport r = run_rates(c);
    bool below = true;
    int cells = 0;
    std::string detail;
    for (const auto& row : r.rows) {
        if (row.kappa_estimate && *row.kappa_estimate > 0.1 && row.bound_prediction) {
            ++cells;
            if (!(row.mean_pred_error < *row.bound_prediction)) below = false;
            detail += " n=" + std::to_string(row.n) + ": " + fmt("%.3g", row.mean_pred_error) + " < " +
                      fmt("%.3g", *row.bound_prediction) + ";";
        }
    }
    const double slope = r.l1_slope.value_or(NAN);
    return Outcome{slope >= -0.65 && slope <= -0.35 && below,
                   "l1 slope = " + fmt("%.3f", slope) + ", " + std::to_string(cells) + " bound cells;" + detail};
}

// 8. persistency under a misspecified quadratic truth
Outcome persistency_regime()
{
    ExperimentConfig c;
    c.n_grid = {100, 200, 400, 800, 1600};
    c.p = 10;
    c.group_size = 2;
    c.s = 3;
    c.sigma = 0.5;
    c.design = DesignKind::GaussianIid;
    c.replicates = 50;
    c.persistency.ln_scale = 1.0;
    c.persistency.ln_eta = 0.05; // L_n = (n / log n)^{1/5}
    c.persistency.quad_coef = 1.0;
    const McReport r = run_persistency(c);
    const double first = r.rows.front().mean_risk_gap;
    const double last = r.rows.back().mean_risk_gap;
    std::string gaps;
    for (std::size_t k = 0; k < r.rows.size(); ++k) gaps += (k ? ", " : "") + fmt("%.4f", r.rows[k].mean_risk_gap);
    return Outcome{last <= 0.5 * first, "mean risk gaps: " + gaps};
}

// 9. stacked q = inf problem against the multi-response formulation
Outcome simultaneous_lasso()
{
    CounterRng rng(1009);
    double worst_solution = 0.0, worst_arbitrary = 0.0, worst_ref = -INFINITY;
    int nonconverged = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 15 + static_cast<Index>(rng.below(20));
        const Index p = 3 + static_cast<Index>(rng.below(8));
        const Index responses = 1 + static_cast<Index>(rng.below(3));
        const Matrix x = testing::unit_columns(testing::gaussian(rng, n, p));
        Matrix b = Matrix::Zero(p, responses);
        b.topRows(2) = testing::gaussian(rng, 2, responses);
        std::vector<Vector> ys;
        for (Index k = 0; k < responses; ++k) ys.push_back(x * b.col(k) + 0.5 * testing::gaussian(rng, n));
        const double lambda = 0.1 + 0.3 * rng.uniform();

        const StackedProblem sp = simlasso_reduce(x, ys);
        const PenaltySpec spec(Exponent::inf(), lambda / static_cast<double>(responses), sp.design.groups());
        const FitResult fr = fit(sp.design, sp.y, spec);
        if (!fr.converged) ++nonconverged;
        const Matrix coef = unstack_coefficients(fr.beta.values(), p, responses);
        auto direct = [&](const Matrix& bm) {
            double loss = 0.0;
            for (Index k = 0; k < responses; ++k) loss += (ys[static_cast<std::size_t>(k)] - x * bm.col(k)).squaredNorm();
            return loss / (2.0 * static_cast<double>(n)) + lambda * bm.cwiseAbs().rowwise().maxCoeff().sum();
        };
        worst_solution = std::max(worst_solution, std::abs(fr.objective - direct(coef)));

        // reference minimizer of the multi-response problem: proximal gradient with row-wise l_inf prox
        const double lip = Eigen::SelfAdjointEigenSolver<Matrix>(x.transpose() * x / double(n)).eigenvalues().maxCoeff();
        Matrix bm = Matrix::Zero(p, responses), z = bm;
        double tk = 1.0;
        Matrix ymat(n, responses);
        for (Index k = 0; k < responses; ++k) ymat.col(k) = ys[static_cast<std::size_t>(k)];
        for (int it = 0; it < 20000; ++it) {
            const Matrix v = z - x.transpose() * (x * z - ymat) / (double(n) * lip);
            Matrix next(p, responses);
            for (Index j = 0; j < p; ++j) {
                const Vector row = v.row(j).transpose();
                next.row(j) = testing::simple_prox(row, lambda / lip, INFINITY).transpose();
            }
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
            z = next + ((tk - 1.0) / tn) * (next - bm);
            bm = next;
            tk = tn;
        }
        worst_ref = std::max(worst_ref, direct(coef) - direct(bm));

        for (int k = 0; k < 5; ++k) {
            const Matrix arb = 2.0 * testing::gaussian(rng, p, responses);
            const Coefficients sb(stack_coefficients(arb), sp.design.groups());
            worst_arbitrary = std::max(worst_arbitrary, std::abs(objective(sp.design, sp.y, sb, spec) - direct(arb)));
        }
    }
    return Outcome{worst_solution <= 1e-8 && worst_arbitrary <= 1e-10 && worst_ref <= 1e-8 && nonconverged == 0,
                   "objective gap at solution = " + fmt("%.2e", worst_solution) + ", at 100 arbitrary B = " +
                       fmt("%.2e", worst_arbitrary) + ", excess over reference minimizer = " + fmt("%.2e", worst_ref)};
}

// 10. two identical experiment runs write identical CSV bytes
Outcome determinism()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("grplq_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    io::write_file(dir / "config.json",
                   R"({"nGrid":[100,200],"p":32,"s":3,"groupSize":2,"replicates":20,"seed":777})");
    std::vector<std::string> bytes;
    std::vector<std::string> json;
    bool codes_ok = true;
    for (const std::string& threads : {"", "1"}) {
        for (int rep = 0; rep < 2; ++rep) {
            if (threads.empty()) {
                unsetenv("GRPLQ_THREADS");
            } else {
                setenv("GRPLQ_THREADS", threads.c_str(), 1);
            }
            const std::string csv = (dir / ("run" + std::to_string(bytes.size()) + ".csv")).string();
            const std::string out = (dir / ("run" + std::to_string(bytes.size()) + ".json")).string();
            std::ostringstream o, e;
            const int code = cli::run({"experiment", "--config", (dir / "config.json").string(), "--mode", "rates",
                                       "--csv", csv, "--out", out, "--omit-timing"},
                                      o, e);
            codes_ok = codes_ok && code == 0;
            bytes.push_back(io::read_file(csv));
            json.push_back(io::read_file(out));
        }
    }
    unsetenv("GRPLQ_THREADS");
    fs::remove_all(dir);
    bool same = codes_ok && !bytes[0].empty();
    for (std::size_t k = 1; k < bytes.size(); ++k) same = same && bytes[k] == bytes[0] && json[k] == json[0];
    return Outcome{same, std::to_string(bytes.size()) + " runs, CSV sha256 " + io::sha256_hex(bytes[0]).substr(0, 16) +
                             (same ? " identical" : " differ")};
}

} // namespace

int main()
{
    struct Criterion {
        const char* name;
        double limit_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"prox/projection oracle equivalence", 60, prox_oracle},
        {"KKT certification round-trip", 120, kkt_round_trip},
        {"closed-form agreement on orthonormal designs", 60, closed_forms},
        {"q=1 grouping invariance", 60, grouping_invariance},
        {"compact-solution reduction", 60, compact_reduction},
        {"selection consistency", 600, selection_regime},
        {"l1 and prediction rates", 900, rates_regime},
        {"persistency trend", 600, persistency_regime},
        {"simultaneous-Lasso equivalence", 120, simultaneous_lasso},
        {"experiment determinism", 120, determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o = Outcome{false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= criteria[k].limit_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << k + 1 << "] " << criteria[k].name << ": " << o.detail << " ("
                  << fmt("%.1f", secs) << " s" << (in_time ? "" : ", over the time limit") << ")" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
