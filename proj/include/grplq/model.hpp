#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grplq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised for malformed inputs: dimension mismatches, bad partitions, zero columns.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Norm exponent in [1, inf]. The common values are tagged so the closed-form
 * branches are selected without comparing floating point values.
 */
class Exponent {
public:
    enum class Kind { One, Two, Inf, Other };

    static Exponent one() { return Exponent(Kind::One, 1.0); }
    static Exponent two() { return Exponent(Kind::Two, 2.0); }
    static Exponent inf() { return Exponent(Kind::Inf, 0.0); }
    /// Any real >= 1; snaps exactly 1 and 2 onto the tagged kinds.
    static Exponent real(double value);
    /// Accepts "1", "2", "inf" or a decimal >= 1.
    static Exponent parse(std::string_view text);

    Kind kind() const { return kind_; }
    /// Numeric value; +infinity for Kind::Inf.
    double value() const;
    /// The conjugate exponent q' with 1/q + 1/q' = 1.
    Exponent conjugate() const;
    /// 1/q, with 1/inf = 0.
    double reciprocal() const;

    std::string to_string() const;

    friend bool operator==(const Exponent& a, const Exponent& b)
    {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::Other || a.value_ == b.value_);
    }

private:
    Exponent(Kind kind, double value) : kind_(kind), value_(value) {}

    Kind kind_;
    double value_;
};

/// Contiguous partition of m columns into p groups.
class GroupPartition {
public:
    GroupPartition() = default;
    explicit GroupPartition(std::vector<Index> sizes);

    Index num_groups() const { return static_cast<Index>(sizes_.size()); }
    Index num_coefficients() const { return offsets_.back(); }
    Index size(Index j) const { return sizes_[static_cast<std::size_t>(j)]; }
    Index offset(Index j) const { return offsets_[static_cast<std::size_t>(j)]; }
    Index max_size() const;
    const std::vector<Index>& sizes() const { return sizes_; }

    template <class V>
    auto block(V&& v, Index j) const
    {
        return std::forward<V>(v).segment(offset(j), size(j));
    }

    friend bool operator==(const GroupPartition& a, const GroupPartition& b) { return a.sizes_ == b.sizes_; }

private:
    std::vector<Index> sizes_;
    std::vector<Index> offsets_{0};
};

/**
 * Design matrix with its column partition. Immutable after construction.
 *
 * `scales()` holds the per-column factors applied by `standardize`, so that
 * X_std = X_raw * diag(scales); coefficients map back as beta_raw = scales .* beta_std.
 */
class GroupedDesign {
public:
    GroupedDesign(Matrix x, GroupPartition groups);

    const Matrix& x() const { return x_; }
    const GroupPartition& groups() const { return groups_; }
    Index n() const { return x_.rows(); }
    Index m() const { return x_.cols(); }
    Index p() const { return groups_.num_groups(); }

    auto block(Index j) const { return x_.middleCols(groups_.offset(j), groups_.size(j)); }

    const Vector& scales() const { return scales_; }
    const std::optional<Vector>& column_means() const { return means_; }

    /// True when (1/n)||X_k||^2 = 1 for every column within `tol`.
    bool is_standardized(double tol = 1e-12) const;

    /// Maps coefficients on this design back to the units of the raw columns.
    Vector to_original_units(const Vector& beta) const;

private:
    friend GroupedDesign standardize(Matrix, GroupPartition, bool);

    Matrix x_;
    GroupPartition groups_;
    Vector scales_;
    std::optional<Vector> means_;
};

/// Rescales columns to (1/n)||X_k||^2 = 1, optionally centering them first.
GroupedDesign standardize(Matrix raw, GroupPartition groups, bool center = false);

/// Penalty exponent, level and the size weights d_j^{1/q'}.
class PenaltySpec {
public:
    PenaltySpec(Exponent q, double lambda, const GroupPartition& groups);

    Exponent q() const { return q_; }
    Exponent q_conjugate() const { return q_.conjugate(); }
    double lambda() const { return lambda_; }
    const Vector& weights() const { return weights_; }
    double weight(Index j) const { return weights_(j); }

    PenaltySpec with_lambda(double lambda) const;

private:
    Exponent q_;
    double lambda_;
    Vector weights_;
};

/// Weight d^{1/q'} for a group of size d.
double group_weight(Index size, Exponent q);

/// Coefficient vector tied to a group partition.
class Coefficients {
public:
    Coefficients() = default;
    explicit Coefficients(GroupPartition groups);
    Coefficients(Vector values, GroupPartition groups);

    const Vector& values() const { return values_; }
    Vector& values() { return values_; }
    const GroupPartition& groups() const { return groups_; }

    auto block(Index j) const { return groups_.block(values_, j); }
    auto block(Index j) { return groups_.block(values_, j); }

    bool is_active(Index j) const;
    /// Groups with ||beta_j||_inf > 0, in increasing order; computed on each call.
    std::vector<Index> active_set() const;
    /// Groups with ||beta_j||_inf > tol.
    std::vector<Index> active_set(double tol) const;

private:
    Vector values_;
    GroupPartition groups_;
};

/// ||v||_q, with the maximum factored out for general q.
double group_norm(const Eigen::Ref<const Vector>& v, Exponent q);

/// Sum_j w_j ||beta_j||_q (without lambda).
double penalty_value(const Coefficients& beta, const PenaltySpec& spec);

/// (1/2n)||y - X beta||^2 + lambda * penalty_value(beta).
double objective(const GroupedDesign& design, const Vector& y, const Coefficients& beta, const PenaltySpec& spec);

/// Throws InvalidInput unless y has n rows and beta uses the design's partition.
void check_dimensions(const GroupedDesign& design, const Vector& y, const Coefficients& beta);

} // namespace grplq
