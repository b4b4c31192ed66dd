#include "grplq/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace grplq::io {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

Json optional_json(const std::optional<double>& v)
{
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

Json finite_or_null(double v)
{
    if (!std::isfinite(v)) return nullptr;
    return v;
}

} // namespace

Matrix parse_csv(std::string_view text)
{
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (!text.empty()) {
        const auto end = text.find('\n');
        std::string_view line = text.substr(0, end);
        text = end == std::string_view::npos ? std::string_view{} : text.substr(end + 1);
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;

        std::vector<double> row;
        std::size_t col = 0;
        for (;;) {
            const auto comma = line.find(',');
            const std::string_view cell = trim(line.substr(0, comma));
            ++col;
            double value = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (cell.empty() || ec != std::errc{} || ptr != last) {
                throw CsvError("non-numeric cell '" + std::string(cell) + "' at row " + std::to_string(line_no)
                                   + ", column " + std::to_string(col),
                               line_no, col);
            }
            if (!std::isfinite(value)) {
                throw CsvError("non-finite cell at row " + std::to_string(line_no) + ", column " + std::to_string(col),
                               line_no, col);
            }
            row.push_back(value);
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (rows.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            throw CsvError("row " + std::to_string(line_no) + " has " + std::to_string(row.size())
                               + " columns, expected " + std::to_string(width),
                           line_no, std::min(row.size(), width) + 1);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw CsvError("CSV has no rows", 0, 0);
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < width; ++k) out(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    }
    return out;
}

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string format_csv(const Matrix& values)
{
    std::string out;
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index k = 0; k < values.cols(); ++k) {
            if (k > 0) out += ',';
            out += format_double(values(i, k));
        }
        out += '\n';
    }
    return out;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

GroupPartition parse_groups(std::string_view json_text)
{
    Json j;
    try {
        j = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        throw InvalidInput(std::string("groups file is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("sizes") || !j["sizes"].is_array()) {
        throw InvalidInput("groups file must be {\"sizes\": [d_1, ..., d_p]}");
    }
    std::vector<Index> sizes;
    for (const auto& v : j["sizes"]) {
        if (!v.is_number_integer()) throw InvalidInput("group sizes must be integers");
        sizes.push_back(v.get<Index>());
    }
    return GroupPartition(std::move(sizes));
}

Json to_json(const Vector& v)
{
    Json arr = Json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(finite_or_null(v(i)));
    return arr;
}

Vector vector_from_json(const Json& j)
{
    if (!j.is_array()) throw InvalidInput("expected a JSON array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidInput("expected a JSON array of numbers");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json to_json(const KktCertificate& cert)
{
    return Json{{"perGroupResidual", to_json(cert.per_group_residual)},
                {"maxResidual", cert.max_residual},
                {"tolerance", cert.tolerance},
                {"optimal", cert.optimal}};
}

Json to_json(const FitResult& fit)
{
    return Json{{"beta", to_json(fit.beta.values())},
                {"groupSizes", fit.beta.groups().sizes()},
                {"activeSet", fit.beta.active_set()},
                {"objective", fit.objective},
                {"iterations", fit.iterations},
                {"converged", fit.converged},
                {"kktResidual", fit.kkt_residual},
                {"lambda", fit.lambda},
                {"q", fit.q.to_string()}};
}

Json to_json(const PathResult& path)
{
    Json fits = Json::array();
    for (const auto& f : path.fits) fits.push_back(to_json(f));
    return Json{{"lambdas", path.lambdas}, {"fits", fits}};
}

Json to_json(const NormEstimate& est)
{
    return Json{{"value", est.value}, {"exact", est.exact}, {"upper", optional_json(est.upper)}};
}

Json to_json(const KappaEstimate& kappa)
{
    return Json{{"value", kappa.value},
                {"heuristicUpperBound", kappa.heuristic},
                {"exhaustiveSubsets", kappa.exhaustive_subsets},
                {"budgetExhausted", kappa.budget_exhausted},
                {"subsetsEvaluated", kappa.subsets_evaluated}};
}

Json to_json(const DiagnosticsReport& r)
{
    Json j{{"support", r.support},
           {"cMin", r.c_min},
           {"irrepConst", r.irrepresentable.value},
           {"irrepExact", r.irrepresentable.exact},
           {"irrepUpper", optional_json(r.irrepresentable.upper)},
           {"delta", r.delta},
           {"rhoStar", optional_json(r.rho_star)},
           {"lambda", r.lambda},
           {"sigma", r.sigma},
           {"lambdaGrowth", finite_or_null(r.lambda_growth)},
           {"rhoCondition", optional_json(r.rho_condition)},
           {"inverseGramInfNorm", r.inverse_gram_inf_norm},
           {"kappa", r.kappa ? to_json(*r.kappa) : Json(nullptr)},
           {"thresholds",
            Json{{"cMin", r.thresholds.c_min},
                 {"lambdaGrowth", r.thresholds.lambda_growth},
                 {"rhoCondition", r.thresholds.rho_condition},
                 {"irrepConst", 1.0}}},
           {"verdicts",
            Json{{"cMinPositive", r.c_min_ok},
                 {"irrepresentable", r.irrepresentable_ok},
                 {"lambdaGrowth", r.lambda_growth_ok},
                 {"rhoCondition", r.rho_ok ? Json(*r.rho_ok) : Json(nullptr)},
                 {"allPass", r.all_pass()}}}};
    return j;
}

Json to_json(const ExperimentConfig& c)
{
    Json design{{"kind", to_string(c.design)}};
    if (c.design == DesignKind::Equicorrelated) design["rho"] = c.rho;
    return Json{{"nGrid", c.n_grid},
                {"p", c.p},
                {"s", c.s},
                {"groupSize", c.group_size},
                {"dSizes", c.group_sizes},
                {"q", c.q.to_string()},
                {"A", c.a},
                {"sigma", c.sigma},
                {"betaMagnitude", c.beta_magnitude},
                {"design", design},
                {"replicates", c.replicates},
                {"seed", c.seed},
                {"xi", c.xi},
                {"activeTol", c.active_tol},
                {"solverTol", c.solver_tol},
                {"kappa",
                 Json{{"subsetBudget", c.kappa.subset_budget},
                      {"starts", c.kappa.starts},
                      {"iterations", c.kappa.iterations}}},
                {"persistency",
                 Json{{"lnScale", c.persistency.ln_scale},
                      {"lnEta", c.persistency.ln_eta},
                      {"quadCoef", c.persistency.quad_coef}}}};
}

ExperimentConfig config_from_json(const Json& j)
{
    if (!j.is_object()) throw InvalidInput("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        if (j.contains("nGrid")) c.n_grid = j["nGrid"].get<std::vector<Index>>();
        if (j.contains("p")) c.p = j["p"].get<Index>();
        if (j.contains("s")) c.s = j["s"].get<Index>();
        if (j.contains("groupSize")) c.group_size = j["groupSize"].get<Index>();
        if (j.contains("dSizes")) c.group_sizes = j["dSizes"].get<std::vector<Index>>();
        if (j.contains("q")) {
            c.q = j["q"].is_string() ? Exponent::parse(j["q"].get<std::string>()) : Exponent::real(j["q"].get<double>());
        }
        if (j.contains("A")) c.a = j["A"].get<double>();
        if (j.contains("sigma")) c.sigma = j["sigma"].get<double>();
        if (j.contains("betaMagnitude")) c.beta_magnitude = j["betaMagnitude"].get<double>();
        if (j.contains("design")) {
            const auto& d = j["design"];
            if (d.is_string()) {
                c.design = parse_design_kind(d.get<std::string>());
            } else {
                c.design = parse_design_kind(d.at("kind").get<std::string>());
                if (d.contains("rho")) c.rho = d["rho"].get<double>();
            }
        }
        if (j.contains("replicates")) c.replicates = j["replicates"].get<int>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("xi")) c.xi = j["xi"].get<double>();
        if (j.contains("activeTol")) c.active_tol = j["activeTol"].get<double>();
        if (j.contains("solverTol")) c.solver_tol = j["solverTol"].get<double>();
        if (j.contains("kappa")) {
            const auto& k = j["kappa"];
            if (k.contains("subsetBudget")) c.kappa.subset_budget = k["subsetBudget"].get<std::size_t>();
            if (k.contains("starts")) c.kappa.starts = k["starts"].get<int>();
            if (k.contains("iterations")) c.kappa.iterations = k["iterations"].get<int>();
        }
        if (j.contains("persistency")) {
            const auto& ps = j["persistency"];
            if (ps.contains("lnScale")) c.persistency.ln_scale = ps["lnScale"].get<double>();
            if (ps.contains("lnEta")) c.persistency.ln_eta = ps["lnEta"].get<double>();
            if (ps.contains("quadCoef")) c.persistency.quad_coef = ps["quadCoef"].get<double>();
        }
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("malformed experiment config: ") + e.what());
    }
    if (!c.group_sizes.empty() && !j.contains("p")) c.p = static_cast<Index>(c.group_sizes.size());
    return c;
}

Json to_json(const McReport& report)
{
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        rows.push_back(Json{{"n", r.n},
                            {"lambda", r.lambda},
                            {"replicates", r.replicates},
                            {"converged", r.converged},
                            {"nonconverged", r.nonconverged},
                            {"kktFailures", r.kkt_failures},
                            {"noiseGateFailures", r.noise_gate_failures},
                            {"selectionRate", r.selection_rate},
                            {"meanL1Error", r.mean_l1_error},
                            {"meanPredError", r.mean_pred_error},
                            {"meanRiskGap", r.mean_risk_gap},
                            {"kappaEstimate", optional_json(r.kappa_estimate)},
                            {"boundPrediction", optional_json(r.bound_prediction)},
                            {"boundL1", optional_json(r.bound_l1)},
                            {"budget", optional_json(r.budget)},
                            {"dimensionOk", r.dimension_ok}});
    }
    Json j{{"mode", report.mode},
           {"seed", report.config.seed},
           {"activeTol", report.config.active_tol},
           {"config", to_json(report.config)},
           {"rows", rows},
           {"l1Slope", optional_json(report.l1_slope)},
           {"predSlope", optional_json(report.pred_slope)}};
    if (report.approx_sample_size) j["approxSampleSize"] = *report.approx_sample_size;
    return j;
}

std::string mc_report_csv(const McReport& report)
{
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out = "n,lambda,replicates,converged,nonconverged,kkt_failures,noise_gate_failures,selection_rate,"
                      "mean_l1_error,mean_pred_error,mean_risk_gap,kappa_estimate,bound_prediction,bound_l1,budget,"
                      "dimension_ok\n";
    for (const auto& r : report.rows) {
        out += std::to_string(r.n) + ',' + format_double(r.lambda) + ',' + std::to_string(r.replicates) + ','
               + std::to_string(r.converged) + ',' + std::to_string(r.nonconverged) + ','
               + std::to_string(r.kkt_failures) + ',' + std::to_string(r.noise_gate_failures) + ','
               + format_double(r.selection_rate) + ',' + format_double(r.mean_l1_error) + ','
               + format_double(r.mean_pred_error) + ',' + format_double(r.mean_risk_gap) + ','
               + opt(r.kappa_estimate) + ',' + opt(r.bound_prediction) + ',' + opt(r.bound_l1) + ','
               + opt(r.budget) + ',' + (r.dimension_ok ? "1" : "0") + '\n';
    }
    return out;
}

} // namespace grplq::io
