#include "grplq/cli.hpp"

#include "grplq/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

namespace grplq::cli {

namespace {

using io::Json;

struct InputFile {
    std::string role;
    std::string path;
    std::string bytes;
};

class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    const std::string& add_input(std::string role, const std::string& path)
    {
        inputs_.push_back(InputFile{std::move(role), path, io::read_file(path)});
        return inputs_.back().bytes;
    }

    Json to_json(const Json& config, const Json& seed, bool omit_timing) const
    {
        Json inputs = Json::array();
        for (const auto& f : inputs_) {
            inputs.push_back(
                Json{{"role", f.role}, {"path", f.path}, {"sha256", io::sha256_hex(f.bytes)}, {"bytes", f.bytes.size()}});
        }
        Json j{{"command", command_}, {"toolkitVersion", kVersion}, {"inputs", inputs}, {"config", config}, {"seed", seed}};
        if (!omit_timing) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
            j["durationSeconds"] = elapsed.count();
        }
        return j;
    }

private:
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::vector<InputFile> inputs_;
};

Vector as_vector(const Matrix& m, const std::string& what)
{
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw InvalidInput(what + " must be a single column");
}

struct DataOptions {
    std::string x_path;
    std::string y_path;
    std::string groups_path;
    bool standardize_columns = false;
    bool center = false;
};

struct LoadedData {
    GroupedDesign design;
    Vector y;
};

GroupedDesign load_design(Manifest& manifest, const DataOptions& opt)
{
    Matrix raw = io::parse_csv(manifest.add_input("x", opt.x_path));
    GroupPartition groups = io::parse_groups(manifest.add_input("groups", opt.groups_path));
    if (opt.standardize_columns || opt.center) return standardize(std::move(raw), std::move(groups), opt.center);
    return GroupedDesign(std::move(raw), std::move(groups));
}

LoadedData load_data(Manifest& manifest, const DataOptions& opt)
{
    GroupedDesign design = load_design(manifest, opt);
    Vector y = as_vector(io::parse_csv(manifest.add_input("y", opt.y_path)), "response");
    if (y.size() != design.n()) {
        throw InvalidInput("response has " + std::to_string(y.size()) + " rows, X has " + std::to_string(design.n()));
    }
    if (opt.center) y.array() -= y.mean();
    return LoadedData{std::move(design), std::move(y)};
}

Json data_config(const DataOptions& opt)
{
    return Json{{"standardize", opt.standardize_columns}, {"center", opt.center}};
}

void add_data_options(CLI::App* cmd, DataOptions& opt, bool with_y)
{
    cmd->add_option("--x", opt.x_path, "design matrix CSV (rows = observations)")->required();
    if (with_y) cmd->add_option("--y", opt.y_path, "response CSV (one column)")->required();
    cmd->add_option("--groups", opt.groups_path, "group sizes JSON {\"sizes\": [...]}")->required();
    cmd->add_flag("--standardize", opt.standardize_columns, "rescale columns to (1/n)||x||^2 = 1");
    cmd->add_flag("--center", opt.center, "center columns and response (implies --standardize)");
}

void emit(const Json& j, const std::string& out_path, std::ostream& out)
{
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty()) {
        out << text;
    } else {
        io::write_file(out_path, text);
    }
}

Json design_extras(const GroupedDesign& design, const Vector& beta)
{
    Json j = Json::object();
    j["scales"] = io::to_json(design.scales());
    j["betaOriginalUnits"] = io::to_json(design.to_original_units(beta));
    return j;
}

struct Common {
    std::string out_path;
    bool omit_timing = false;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--out", c.out_path, "output JSON path (stdout when omitted)");
    cmd->add_flag("--omit-timing", c.omit_timing, "leave durationSeconds out of the manifest");
}

SolverOptions solver_options(double tol, int max_iter)
{
    SolverOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.validate();
    return opts;
}

Coefficients read_beta(Manifest& manifest, const std::string& path, const GroupPartition& groups)
{
    const std::string& bytes = manifest.add_input("beta", path);
    Vector values;
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        Json j;
        try {
            j = Json::parse(bytes);
        } catch (const Json::parse_error& e) {
            throw InvalidInput(std::string("beta file is not valid JSON: ") + e.what());
        }
        if (j.contains("fit") && j["fit"].contains("beta")) {
            values = io::vector_from_json(j["fit"]["beta"]);
        } else if (j.contains("beta")) {
            values = io::vector_from_json(j["beta"]);
        } else {
            throw InvalidInput("beta JSON needs a \"beta\" or \"fit.beta\" array");
        }
    } else {
        values = as_vector(io::parse_csv(bytes), "beta");
    }
    return Coefficients(std::move(values), groups);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Grouped l1-lq regularized regression toolkit", "grplq"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // fit
    DataOptions fit_data;
    Common fit_common;
    std::string fit_q;
    double fit_lambda = 0.0;
    double fit_tol = 1e-8;
    int fit_max_iter = 10000;
    auto* fit_cmd = app.add_subcommand("fit", "solve the penalized problem at one lambda");
    add_data_options(fit_cmd, fit_data, true);
    add_common(fit_cmd, fit_common);
    fit_cmd->add_option("--q", fit_q, "1, 2, inf or a real >= 1")->required();
    fit_cmd->add_option("--lambda", fit_lambda, "penalty level")->required();
    fit_cmd->add_option("--tol", fit_tol, "KKT tolerance");
    fit_cmd->add_option("--max-iter", fit_max_iter, "sweep cap");

    // path
    DataOptions path_data;
    Common path_common;
    std::string path_q;
    std::string path_grid;
    int path_grid_size = 50;
    double path_min_ratio = 1e-3;
    double path_tol = 1e-8;
    int path_max_iter = 10000;
    std::string path_csv;
    auto* path_cmd = app.add_subcommand("path", "warm-started fits over a decreasing lambda grid");
    add_data_options(path_cmd, path_data, true);
    add_common(path_cmd, path_common);
    path_cmd->add_option("--q", path_q, "1, 2, inf or a real >= 1")->required();
    auto* grid_opt = path_cmd->add_option("--lambda-grid", path_grid, "comma-separated decreasing lambdas");
    path_cmd->add_option("--grid-size", path_grid_size, "points in the default grid")->excludes(grid_opt);
    path_cmd->add_option("--grid-min-ratio", path_min_ratio, "smallest lambda / lambda_max")->excludes(grid_opt);
    path_cmd->add_option("--tol", path_tol, "KKT tolerance");
    path_cmd->add_option("--max-iter", path_max_iter, "sweep cap");
    path_cmd->add_option("--csv", path_csv, "flat CSV mirror of the path");

    // diagnose
    DataOptions diag_data;
    Common diag_common;
    std::string diag_q;
    std::string diag_support;
    std::string diag_beta_star;
    std::optional<double> diag_lambda;
    double diag_sigma = 1.0;
    double diag_a = 3.0;
    std::optional<Index> diag_kappa_s;
    std::size_t diag_kappa_budget = 2000;
    VerdictThresholds thresholds;
    auto* diag_cmd = app.add_subcommand("diagnose", "evaluate the selection-consistency conditions of a design");
    add_data_options(diag_cmd, diag_data, false);
    add_common(diag_cmd, diag_common);
    diag_cmd->add_option("--q", diag_q, "1, 2, inf or a real >= 1")->required();
    auto* support_opt = diag_cmd->add_option("--support", diag_support, "JSON list of support group indices");
    diag_cmd->add_option("--beta-star", diag_beta_star, "true coefficients CSV")->excludes(support_opt);
    diag_cmd->add_option("--lambda", diag_lambda, "penalty level (default: A sigma sqrt(log m / n))");
    diag_cmd->add_option("--sigma", diag_sigma, "noise level");
    diag_cmd->add_option("--A", diag_a, "schedule constant, > 2 sqrt 2");
    diag_cmd->add_option("--kappa-s-max", diag_kappa_s, "also estimate kappa over |S0| <= this");
    diag_cmd->add_option("--kappa-budget", diag_kappa_budget, "subset budget for the kappa search");
    diag_cmd->add_option("--lambda-growth-threshold", thresholds.lambda_growth, "pass level for lambda^2 n / log((p-s)d)");
    diag_cmd->add_option("--rho-threshold", thresholds.rho_condition, "pass level for the rho* scalar");
    diag_cmd->add_option("--cmin-threshold", thresholds.c_min, "C_min must exceed this");

    // certify
    DataOptions cert_data;
    Common cert_common;
    std::string cert_q;
    std::string cert_beta;
    double cert_lambda = 0.0;
    double cert_tol = 1e-8;
    bool cert_reduce = false;
    auto* cert_cmd = app.add_subcommand("certify", "check the optimality conditions for a given beta");
    add_data_options(cert_cmd, cert_data, true);
    add_common(cert_cmd, cert_common);
    cert_cmd->add_option("--q", cert_q, "1, 2, inf or a real >= 1")->required();
    cert_cmd->add_option("--lambda", cert_lambda, "penalty level")->required();
    cert_cmd->add_option("--beta", cert_beta, "coefficients: CSV column or fit JSON")->required();
    cert_cmd->add_option("--tol", cert_tol, "KKT tolerance");
    cert_cmd->add_flag("--reduce", cert_reduce, "reduce to at most n active groups");

    // experiment
    Common exp_common;
    std::string exp_config;
    std::string exp_mode;
    std::string exp_csv;
    auto* exp_cmd = app.add_subcommand("experiment", "Monte Carlo consistency experiments");
    add_common(exp_cmd, exp_common);
    exp_cmd->add_option("--config", exp_config, "experiment config JSON")->required();
    exp_cmd->add_option("--mode", exp_mode, "selection | rates | persistency")
        ->required()
        ->check(CLI::IsMember({"selection", "rates", "persistency"}));
    exp_cmd->add_option("--csv", exp_csv, "flat per-n CSV output");

    // simlasso
    Common sim_common;
    std::string sim_x;
    std::string sim_ys;
    double sim_lambda = 0.0;
    double sim_tol = 1e-8;
    int sim_max_iter = 10000;
    auto* sim_cmd = app.add_subcommand("simlasso", "multi-response fit through the grouped q = inf reduction");
    add_common(sim_cmd, sim_common);
    sim_cmd->add_option("--x", sim_x, "shared design CSV (n x p)")->required();
    sim_cmd->add_option("--ys", sim_ys, "responses CSV (n x D)")->required();
    sim_cmd->add_option("--lambda", sim_lambda, "multi-response penalty level")->required();
    sim_cmd->add_option("--tol", sim_tol, "KKT tolerance");
    sim_cmd->add_option("--max-iter", sim_max_iter, "sweep cap");

    std::vector<std::string> argv_store{"grplq"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInputError;
    }

    try {
        if (*fit_cmd) {
            Manifest manifest("fit");
            const auto data = load_data(manifest, fit_data);
            const Exponent q = Exponent::parse(fit_q);
            const PenaltySpec spec(q, fit_lambda, data.design.groups());
            const SolverOptions opts = solver_options(fit_tol, fit_max_iter);
            const FitResult result = fit(data.design, data.y, spec, opts);
            const KktCertificate cert = kkt_check(data.design, data.y, result.beta, spec, fit_tol);
            Json config = data_config(fit_data);
            config.update(Json{{"q", q.to_string()}, {"lambda", fit_lambda}, {"tol", fit_tol}, {"maxIter", fit_max_iter}});
            Json j{{"manifest", manifest.to_json(config, nullptr, fit_common.omit_timing)},
                   {"fit", io::to_json(result)},
                   {"certificate", io::to_json(cert)}};
            j.update(design_extras(data.design, result.beta.values()));
            emit(j, fit_common.out_path, out);
            return result.converged ? kSuccess : kNotConverged;
        }

        if (*path_cmd) {
            Manifest manifest("path");
            const auto data = load_data(manifest, path_data);
            const Exponent q = Exponent::parse(path_q);
            std::vector<double> grid;
            if (!path_grid.empty()) {
                const Matrix parsed = io::parse_csv(path_grid);
                for (Index k = 0; k < parsed.cols(); ++k) grid.push_back(parsed(0, k));
            } else {
                grid = default_lambda_grid(data.design, data.y, q, path_grid_size, path_min_ratio);
            }
            const PathResult path = fit_path(data.design, data.y, q, grid, solver_options(path_tol, path_max_iter));
            Json config = data_config(path_data);
            config.update(Json{{"q", q.to_string()},
                               {"lambdaGrid", grid},
                               {"gridSize", path_grid.empty() ? Json(path_grid_size) : Json(nullptr)},
                               {"gridMinRatio", path_grid.empty() ? Json(path_min_ratio) : Json(nullptr)},
                               {"tol", path_tol},
                               {"maxIter", path_max_iter}});
            Json j{{"manifest", manifest.to_json(config, nullptr, path_common.omit_timing)},
                   {"lambdaMax", lambda_max(data.design, data.y, q)},
                   {"path", io::to_json(path)}};
            emit(j, path_common.out_path, out);
            if (!path_csv.empty()) {
                std::string csv = "lambda,objective,active_groups,converged,kkt_residual,iterations\n";
                for (std::size_t k = 0; k < path.fits.size(); ++k) {
                    const auto& f = path.fits[k];
                    csv += io::format_double(path.lambdas[k]) + ',' + io::format_double(f.objective) + ','
                           + std::to_string(f.beta.active_set().size()) + ',' + (f.converged ? "1" : "0") + ','
                           + io::format_double(f.kkt_residual) + ',' + std::to_string(f.iterations) + '\n';
                }
                io::write_file(path_csv, csv);
            }
            for (const auto& f : path.fits) {
                if (!f.converged) return kNotConverged;
            }
            return kSuccess;
        }

        if (*diag_cmd) {
            Manifest manifest("diagnose");
            const GroupedDesign design = load_design(manifest, diag_data);
            const Exponent q = Exponent::parse(diag_q);
            std::vector<Index> support;
            std::optional<Coefficients> beta_star;
            if (!diag_beta_star.empty()) {
                beta_star = Coefficients(as_vector(io::parse_csv(manifest.add_input("betaStar", diag_beta_star)), "beta*"),
                                         design.groups());
                support = beta_star->active_set();
                if (support.empty()) throw InvalidInput("beta* is zero; the support is empty");
            } else if (!diag_support.empty()) {
                Json s;
                try {
                    s = Json::parse(diag_support);
                    support = s.get<std::vector<Index>>();
                } catch (const Json::exception& e) {
                    throw InvalidInput(std::string("--support must be a JSON list of integers: ") + e.what());
                }
            } else {
                throw InvalidInput("diagnose needs --support or --beta-star");
            }
            const double lambda = diag_lambda ? *diag_lambda
                                              : lambda_schedule(diag_a, diag_sigma, std::max<Index>(design.m(), 2),
                                                                design.n())
                                                    .lambda;
            Json config = data_config(diag_data);
            config.update(Json{{"q", q.to_string()},
                               {"support", support},
                               {"lambda", lambda},
                               {"sigma", diag_sigma},
                               {"A", diag_a},
                               {"kappaSMax", diag_kappa_s ? Json(*diag_kappa_s) : Json(nullptr)}});
            try {
                DiagnosticsReport report = selection_verdict(design, support, beta_star, q, lambda, diag_sigma, thresholds);
                if (diag_kappa_s) {
                    KappaOptions kopts;
                    kopts.subset_budget = diag_kappa_budget;
                    report.kappa = restricted_eigenvalue(design, *diag_kappa_s, 3.0, q, kopts);
                }
                Json j{{"manifest", manifest.to_json(config, nullptr, diag_common.omit_timing)},
                       {"report", io::to_json(report)}};
                emit(j, diag_common.out_path, out);
                return kSuccess;
            } catch (const SingularGram& e) {
                Json j{{"manifest", manifest.to_json(config, nullptr, diag_common.omit_timing)},
                       {"error", e.what()},
                       {"cMin", e.c_min}};
                emit(j, diag_common.out_path, out);
                err << "grplq: " << e.what() << "\n";
                return kInfeasible;
            }
        }

        if (*cert_cmd) {
            Manifest manifest("certify");
            const auto data = load_data(manifest, cert_data);
            const Exponent q = Exponent::parse(cert_q);
            const PenaltySpec spec(q, cert_lambda, data.design.groups());
            const Coefficients beta = read_beta(manifest, cert_beta, data.design.groups());
            const KktCertificate cert = kkt_check(data.design, data.y, beta, spec, cert_tol);
            Json config = data_config(cert_data);
            config.update(Json{{"q", q.to_string()}, {"lambda", cert_lambda}, {"tol", cert_tol}, {"reduce", cert_reduce}});
            Json j{{"manifest", nullptr},
                   {"objective", objective(data.design, data.y, beta, spec)},
                   {"activeSet", beta.active_set()},
                   {"certificate", io::to_json(cert)}};
            if (cert_reduce && cert.optimal) {
                const CompactResult compact = reduce_to_compact(data.design, data.y, beta, spec, cert_tol);
                j["reduced"] = Json{{"beta", io::to_json(compact.beta.values())},
                                    {"activeSet", compact.beta.active_set()},
                                    {"groupsRemoved", compact.groups_removed},
                                    {"ambiguous", compact.ambiguous},
                                    {"objective", objective(data.design, data.y, compact.beta, spec)},
                                    {"certificate",
                                     io::to_json(kkt_check(data.design, data.y, compact.beta, spec, cert_tol))}};
            }
            j["manifest"] = manifest.to_json(config, nullptr, cert_common.omit_timing);
            emit(j, cert_common.out_path, out);
            return cert.optimal ? kSuccess : kNotConverged;
        }

        if (*exp_cmd) {
            Manifest manifest("experiment");
            const std::string& text = manifest.add_input("config", exp_config);
            Json cj;
            try {
                cj = Json::parse(text);
            } catch (const Json::parse_error& e) {
                throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
            }
            const ExperimentConfig config = io::config_from_json(cj);
            const auto bad = config.violations();
            if (!bad.empty()) {
                err << "grplq: invalid experiment config:\n";
                for (const auto& b : bad) err << "  - " << b << "\n";
                return kInputError;
            }
            McReport report;
            if (exp_mode == "selection") {
                report = run_selection(config);
            } else if (exp_mode == "rates") {
                report = run_rates(config);
            } else {
                report = run_persistency(config);
            }
            Json resolved = io::to_json(config);
            resolved["mode"] = exp_mode;
            Json j{{"manifest", manifest.to_json(resolved, config.seed, exp_common.omit_timing)},
                   {"report", io::to_json(report)}};
            emit(j, exp_common.out_path, out);
            if (!exp_csv.empty()) io::write_file(exp_csv, io::mc_report_csv(report));
            return kSuccess;
        }

        if (*sim_cmd) {
            Manifest manifest("simlasso");
            const Matrix x = io::parse_csv(manifest.add_input("x", sim_x));
            const Matrix ys = io::parse_csv(manifest.add_input("ys", sim_ys));
            if (ys.rows() != x.rows()) throw InvalidInput("responses and X must have the same number of rows");
            std::vector<Vector> responses;
            for (Index k = 0; k < ys.cols(); ++k) responses.push_back(ys.col(k));
            const StackedProblem stacked = simlasso_reduce(x, responses);
            const double lambda_stacked = sim_lambda / static_cast<double>(stacked.responses);
            const PenaltySpec spec(Exponent::inf(), lambda_stacked, stacked.design.groups());
            const FitResult result = fit(stacked.design, stacked.y, spec, solver_options(sim_tol, sim_max_iter));
            const Matrix coef = unstack_coefficients(result.beta.values(), x.cols(), stacked.responses);
            Json rows = Json::array();
            for (Index j = 0; j < coef.rows(); ++j) rows.push_back(io::to_json(coef.row(j).transpose()));
            Json config{{"lambda", sim_lambda}, {"tol", sim_tol}, {"maxIter", sim_max_iter}};
            Json j{{"manifest", manifest.to_json(config, nullptr, sim_common.omit_timing)},
                   {"responses", stacked.responses},
                   {"lambdaStacked", lambda_stacked},
                   {"coefficients", rows},
                   {"objectiveStacked", result.objective},
                   {"objectiveDirect", simlasso_objective(x, responses, coef, sim_lambda)},
                   {"fit", io::to_json(result)},
                   {"certificate", io::to_json(kkt_check(stacked.design, stacked.y, result.beta, spec, sim_tol))}};
            emit(j, sim_common.out_path, out);
            return result.converged ? kSuccess : kNotConverged;
        }
    } catch (const InvalidInput& e) {
        err << "grplq: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "grplq: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}

} // namespace grplq::cli
