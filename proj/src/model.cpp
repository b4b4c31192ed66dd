#include "grplq/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace grplq {

Exponent Exponent::real(double value)
{
    if (!(value >= 1.0)) {
        throw InvalidInput("norm exponent must lie in [1, inf], got " + std::to_string(value));
    }
    if (std::isinf(value)) return inf();
    if (value == 1.0) return one();
    if (value == 2.0) return two();
    return Exponent(Kind::Other, value);
}

Exponent Exponent::parse(std::string_view text)
{
    if (text == "inf" || text == "Inf" || text == "INF") return inf();
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw InvalidInput("cannot parse norm exponent '" + std::string(text) + "'");
    }
    return real(value);
}

double Exponent::value() const
{
    return kind_ == Kind::Inf ? std::numeric_limits<double>::infinity() : value_;
}

double Exponent::reciprocal() const
{
    return kind_ == Kind::Inf ? 0.0 : 1.0 / value_;
}

Exponent Exponent::conjugate() const
{
    switch (kind_) {
    case Kind::One: return inf();
    case Kind::Two: return two();
    case Kind::Inf: return one();
    case Kind::Other: break;
    }
    return Exponent(Kind::Other, value_ / (value_ - 1.0));
}

std::string Exponent::to_string() const
{
    switch (kind_) {
    case Kind::One: return "1";
    case Kind::Two: return "2";
    case Kind::Inf: return "inf";
    case Kind::Other: break;
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value_);
    return std::string(buf, ptr);
}

GroupPartition::GroupPartition(std::vector<Index> sizes) : sizes_(std::move(sizes))
{
    if (sizes_.empty()) throw InvalidInput("group partition needs at least one group");
    offsets_.reserve(sizes_.size() + 1);
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
        if (sizes_[j] < 1) {
            throw InvalidInput("group " + std::to_string(j) + " has size " + std::to_string(sizes_[j]));
        }
        offsets_.push_back(offsets_.back() + sizes_[j]);
    }
}

Index GroupPartition::max_size() const
{
    return sizes_.empty() ? 0 : *std::max_element(sizes_.begin(), sizes_.end());
}

GroupedDesign::GroupedDesign(Matrix x, GroupPartition groups)
    : x_(std::move(x)), groups_(std::move(groups)), scales_(Vector::Ones(x_.cols()))
{
    if (x_.rows() < 1) throw InvalidInput("design needs at least one row");
    if (groups_.num_groups() < 1) throw InvalidInput("design needs at least one group");
    if (groups_.num_coefficients() != x_.cols()) {
        throw InvalidInput("group sizes sum to " + std::to_string(groups_.num_coefficients()) + " but X has "
                           + std::to_string(x_.cols()) + " columns");
    }
}

bool GroupedDesign::is_standardized(double tol) const
{
    const double n = static_cast<double>(x_.rows());
    for (Index k = 0; k < x_.cols(); ++k) {
        if (std::abs(x_.col(k).squaredNorm() / n - 1.0) > tol) return false;
    }
    return true;
}

Vector GroupedDesign::to_original_units(const Vector& beta) const
{
    if (beta.size() != m()) throw InvalidInput("coefficient length does not match design");
    return beta.cwiseProduct(scales_);
}

GroupedDesign standardize(Matrix raw, GroupPartition groups, bool center)
{
    const Index n = raw.rows();
    if (n < 1) throw InvalidInput("design needs at least one row");
    std::optional<Vector> means;
    if (center) {
        Vector mu = raw.colwise().mean().transpose();
        raw.rowwise() -= mu.transpose();
        means = std::move(mu);
    }
    Vector scales(raw.cols());
    for (Index k = 0; k < raw.cols(); ++k) {
        const double sq = raw.col(k).squaredNorm();
        if (!(sq > 0.0)) throw InvalidInput("column " + std::to_string(k) + " is zero");
        scales(k) = std::sqrt(static_cast<double>(n) / sq);
        raw.col(k) *= scales(k);
    }
    GroupedDesign design(std::move(raw), std::move(groups));
    design.scales_ = std::move(scales);
    design.means_ = std::move(means);
    return design;
}

double group_weight(Index size, Exponent q)
{
    const double inv = q.conjugate().reciprocal();
    switch (q.kind()) {
    case Exponent::Kind::One: return 1.0;
    case Exponent::Kind::Two: return std::sqrt(static_cast<double>(size));
    case Exponent::Kind::Inf: return static_cast<double>(size);
    case Exponent::Kind::Other: break;
    }
    return std::pow(static_cast<double>(size), inv);
}

PenaltySpec::PenaltySpec(Exponent q, double lambda, const GroupPartition& groups)
    : q_(q), lambda_(lambda), weights_(groups.num_groups())
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidInput("lambda must be finite and nonnegative");
    }
    for (Index j = 0; j < groups.num_groups(); ++j) weights_(j) = group_weight(groups.size(j), q);
}

PenaltySpec PenaltySpec::with_lambda(double lambda) const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidInput("lambda must be finite and nonnegative");
    }
    PenaltySpec copy = *this;
    copy.lambda_ = lambda;
    return copy;
}

Coefficients::Coefficients(GroupPartition groups)
    : values_(Vector::Zero(groups.num_coefficients())), groups_(std::move(groups))
{
}

Coefficients::Coefficients(Vector values, GroupPartition groups) : values_(std::move(values)), groups_(std::move(groups))
{
    if (values_.size() != groups_.num_coefficients()) {
        throw InvalidInput("coefficient length " + std::to_string(values_.size()) + " does not match partition size "
                           + std::to_string(groups_.num_coefficients()));
    }
}

bool Coefficients::is_active(Index j) const
{
    return block(j).cwiseAbs().maxCoeff() > 0.0;
}

std::vector<Index> Coefficients::active_set() const
{
    return active_set(0.0);
}

std::vector<Index> Coefficients::active_set(double tol) const
{
    std::vector<Index> active;
    for (Index j = 0; j < groups_.num_groups(); ++j) {
        if (block(j).cwiseAbs().maxCoeff() > tol) active.push_back(j);
    }
    return active;
}

double group_norm(const Eigen::Ref<const Vector>& v, Exponent q)
{
    if (v.size() == 0) return 0.0;
    switch (q.kind()) {
    case Exponent::Kind::One: return v.lpNorm<1>();
    case Exponent::Kind::Two: return v.norm();
    case Exponent::Kind::Inf: return v.lpNorm<Eigen::Infinity>();
    case Exponent::Kind::Other: break;
    }
    const double top = v.lpNorm<Eigen::Infinity>();
    if (top == 0.0) return 0.0;
    const double e = q.value();
    double sum = 0.0;
    for (Index i = 0; i < v.size(); ++i) sum += std::pow(std::abs(v(i)) / top, e);
    return top * std::pow(sum, 1.0 / e);
}

double penalty_value(const Coefficients& beta, const PenaltySpec& spec)
{
    const auto& groups = beta.groups();
    if (spec.weights().size() != groups.num_groups()) {
        throw InvalidInput("penalty weights do not match coefficient partition");
    }
    double total = 0.0;
    for (Index j = 0; j < groups.num_groups(); ++j) total += spec.weight(j) * group_norm(beta.block(j), spec.q());
    return total;
}

void check_dimensions(const GroupedDesign& design, const Vector& y, const Coefficients& beta)
{
    if (y.size() != design.n()) {
        throw InvalidInput("response has " + std::to_string(y.size()) + " rows, design has " + std::to_string(design.n()));
    }
    if (!(beta.groups() == design.groups())) throw InvalidInput("coefficient partition does not match design");
}

double objective(const GroupedDesign& design, const Vector& y, const Coefficients& beta, const PenaltySpec& spec)
{
    check_dimensions(design, y, beta);
    const double rss = (y - design.x() * beta.values()).squaredNorm();
    return rss / (2.0 * static_cast<double>(design.n())) + spec.lambda() * penalty_value(beta, spec);
}

} // namespace grplq
