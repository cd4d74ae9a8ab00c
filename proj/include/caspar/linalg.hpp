#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <caspar/errors.hpp>

namespace caspar {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<Index>;

/// Default reciprocal-condition threshold on a restricted Gram matrix.
inline constexpr double default_rcond = 1e-12;

/// Tolerance used to verify the standardized-column invariants.
inline constexpr double standardization_tol = 1e-10;

struct StandardizeOptions
{
    /// Zero out constant columns (scale recorded as 0) instead of throwing.
    /// Used on CV training folds of indicator data, where a column can be
    /// constant on a subset of rows.
    bool allow_constant = false;
};

/**
 * Design matrix plus response.
 *
 * A standardized dataset has centered columns with (1/n)||x_j||^2 = 1 and a
 * centered response; the transform is recorded so coefficients can be
 * mapped back to the original scale. Columns with a recorded scale of 0
 * were constant and are stored as all-zero.
 */
class Dataset
{
public:
    Dataset() = default;

    Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y))
    {
        if (X_.rows() < 1 || X_.cols() < 1) {
            throw DimensionMismatch("dataset needs n >= 1 and p >= 1");
        }
        if (y_.size() != X_.rows()) {
            throw DimensionMismatch("response length " + std::to_string(y_.size())
                                    + " does not match " + std::to_string(X_.rows()) + " rows");
        }
        if (!X_.allFinite() || !y_.allFinite()) {
            throw DimensionMismatch("dataset contains non-finite values");
        }
        column_means_ = Vector::Zero(X_.cols());
        column_scales_ = Vector::Ones(X_.cols());
    }

    Index n() const { return X_.rows(); }
    Index p() const { return X_.cols(); }
    const Matrix& X() const { return X_; }
    const Vector& y() const { return y_; }
    bool standardized() const { return standardized_; }
    const Vector& column_means() const { return column_means_; }
    const Vector& column_scales() const { return column_scales_; }
    double response_mean() const { return response_mean_; }

    /// Rows in `rows`, in order, with no transform metadata.
    Dataset subset(const std::vector<Index>& rows) const
    {
        Matrix Xs(static_cast<Index>(rows.size()), p());
        Vector ys(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Xs.row(static_cast<Index>(i)) = X_.row(rows[i]);
            ys(static_cast<Index>(i)) = y_(rows[i]);
        }
        return Dataset(std::move(Xs), std::move(ys));
    }

private:
    friend Dataset standardize(const Dataset&, StandardizeOptions);

    Matrix X_;
    Vector y_;
    bool standardized_ = false;
    Vector column_means_;
    Vector column_scales_;
    double response_mean_ = 0.0;
};

class CoefficientVector
{
public:
    CoefficientVector() = default;

    explicit CoefficientVector(Vector values) : values_(std::move(values))
    {
        for (Index j = 0; j < values_.size(); ++j) {
            if (values_(j) != 0.0) support_.push_back(j);
        }
    }

    static CoefficientVector zeros(Index p) { return CoefficientVector(Vector::Zero(p)); }

    const Vector& values() const { return values_; }
    const IndexSet& support() const { return support_; }
    Index size() const { return values_.size(); }
    double operator[](Index j) const { return values_(j); }

private:
    Vector values_;
    IndexSet support_;
};

/// A fitted linear predictor on the original data scale.
struct LinearModel
{
    double intercept = 0.0;
    Vector beta;

    Vector predict(const Matrix& X) const
    {
        return (X * beta).array() + intercept;
    }
};

/// Centers and scales every column to (1/n)||x_j||^2 = 1 and centers y.
inline Dataset standardize(const Dataset& data, StandardizeOptions opts = {})
{
    const Index n = data.n();
    const Index p = data.p();
    Matrix X = data.X();
    Vector means(p);
    Vector scales(p);
    for (Index j = 0; j < p; ++j) {
        const double mean = X.col(j).mean();
        X.col(j).array() -= mean;
        const double scale = std::sqrt(X.col(j).squaredNorm() / static_cast<double>(n));
        // Relative to the column magnitude so large-offset constants are caught.
        const double magnitude = std::max(1.0, std::abs(mean));
        if (!(scale > 1e-12 * magnitude)) {
            if (!opts.allow_constant) throw ConstantColumn(static_cast<std::size_t>(j));
            X.col(j).setZero();
            means(j) = mean;
            scales(j) = 0.0;
            continue;
        }
        X.col(j) /= scale;
        means(j) = mean;
        scales(j) = scale;
    }
    const double ymean = data.y().mean();
    Vector y = data.y().array() - ymean;

    Dataset out(std::move(X), std::move(y));
    out.standardized_ = true;
    out.column_means_ = std::move(means);
    out.column_scales_ = std::move(scales);
    out.response_mean_ = ymean;
    return out;
}

/// Maps coefficients fitted on `data` back to the original scale.
inline LinearModel to_original_scale(const Dataset& data, const Vector& beta)
{
    LinearModel model;
    if (!data.standardized()) {
        model.beta = beta;
        return model;
    }
    model.beta = Vector::Zero(beta.size());
    for (Index j = 0; j < beta.size(); ++j) {
        const double s = data.column_scales()(j);
        if (s > 0.0) model.beta(j) = beta(j) / s;
    }
    model.intercept = data.response_mean() - data.column_means().dot(model.beta);
    return model;
}

/// Applies the column transform recorded in `reference` to raw rows `X`.
inline Matrix apply_column_transform(const Dataset& reference, const Matrix& X)
{
    if (!reference.standardized()) return X;
    Matrix out(X.rows(), X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        const double s = reference.column_scales()(j);
        if (s > 0.0) {
            out.col(j) = (X.col(j).array() - reference.column_means()(j)) / s;
        } else {
            out.col(j).setZero();
        }
    }
    return out;
}

inline Matrix gather_columns(const Matrix& X, const IndexSet& cols)
{
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = X.col(cols[k]);
    return out;
}

inline void check_support(const Dataset& data, const IndexSet& support)
{
    for (auto j : support) {
        if (j < 0 || j >= data.p()) {
            throw DimensionMismatch("support index " + std::to_string(j) + " outside [0, "
                                    + std::to_string(data.p()) + ")");
        }
    }
}

/**
 * Least squares restricted to the columns in `support`.
 *
 * Solved by column-pivoted Householder QR of the restricted submatrix. The
 * reciprocal condition of the restricted Gram matrix is estimated as
 * (min|R_ii| / max|R_ii|)^2; below `rcond` the support is refused.
 */
inline CoefficientVector restricted_ols(const Dataset& data, const IndexSet& support,
                                        double rcond = default_rcond)
{
    check_support(data, support);
    Vector beta = Vector::Zero(data.p());
    if (support.empty()) return CoefficientVector(std::move(beta));

    const Matrix Xs = gather_columns(data.X(), support);
    Eigen::ColPivHouseholderQR<Matrix> qr(Xs);
    const auto k = static_cast<Index>(support.size());
    if (k > data.n()) throw SingularSupport("support larger than the number of rows");

    const auto diag = qr.matrixR().diagonal().head(k).cwiseAbs();
    const double dmax = diag.maxCoeff();
    const double dmin = diag.minCoeff();
    if (!(dmax > 0.0) || (dmin / dmax) * (dmin / dmax) < rcond) {
        throw SingularSupport("restricted Gram matrix is numerically singular");
    }
    const Vector bs = qr.solve(data.y());
    for (Index i = 0; i < k; ++i) beta(support[static_cast<std::size_t>(i)]) = bs(i);
    return CoefficientVector(std::move(beta));
}

/// r = y - X beta
inline Vector residual(const Dataset& data, const Vector& beta)
{
    return data.y() - data.X() * beta;
}

inline double rss(const Dataset& data, const Vector& beta)
{
    return residual(data, beta).squaredNorm();
}

/// C_j = |x_j^T (X beta - y)| for every column j.
inline Vector correlation_scores(const Dataset& data, const Vector& beta)
{
    if (beta.size() != data.p()) {
        throw DimensionMismatch("coefficient length does not match p");
    }
    const Vector r = data.X() * beta - data.y();
    return (data.X().transpose() * r).cwiseAbs();
}

inline Vector correlation_scores(const Dataset& data, const CoefficientVector& beta)
{
    return correlation_scores(data, beta.values());
}

/**
 * Least squares on a growing active set.
 *
 * Keeps an orthonormal basis Q of the active columns (classical Gram-Schmidt
 * with one reorthogonalization pass) and the triangular factor R, so each
 * append costs O(n k). The rank test matches restricted_ols: a column is
 * refused when the estimated reciprocal condition of the Gram matrix drops
 * below rcond, or when its component outside span(Q) is that small
 * relative to its norm.
 */
class ActiveLeastSquares
{
public:
    ActiveLeastSquares(const Matrix& X, const Vector& y, double rcond = default_rcond)
        : X_(X), y_(y), rcond_(rcond), residual_(y)
    {
        Q_.resize(X.rows(), 0);
    }

    Index size() const { return static_cast<Index>(active_.size()); }
    const IndexSet& active() const { return active_; }
    const Vector& residual() const { return residual_; }
    double rss() const { return residual_.squaredNorm(); }

    /// Appends column j; returns false (state unchanged) if it is singular.
    bool try_add(Index j)
    {
        const Index k = size();
        if (k >= X_.rows()) return false;
        const auto x = X_.col(j);
        const double xnorm = x.norm();
        if (!(xnorm > 0.0)) return false;

        Vector coeffs = Vector::Zero(k);
        Vector q = x;
        for (int pass = 0; pass < 2; ++pass) {
            if (k == 0) break;
            const Vector c = Q_.leftCols(k).transpose() * q;
            q.noalias() -= Q_.leftCols(k) * c;
            coeffs += c;
        }
        const double rkk = q.norm();
        const double rel = rkk / xnorm;
        if (rel * rel < rcond_) return false;

        double dmin = rkk, dmax = rkk;
        for (Index i = 0; i < k; ++i) {
            dmin = std::min(dmin, std::abs(R_(i, i)));
            dmax = std::max(dmax, std::abs(R_(i, i)));
        }
        if ((dmin / dmax) * (dmin / dmax) < rcond_) return false;

        q /= rkk;
        Q_.conservativeResize(Eigen::NoChange, k + 1);
        Q_.col(k) = q;
        R_.conservativeResize(k + 1, k + 1);
        R_.row(k).setZero();
        R_.col(k).head(k) = coeffs;
        R_(k, k) = rkk;
        Qty_.conservativeResize(k + 1);
        Qty_(k) = q.dot(y_);
        residual_ -= Qty_(k) * q;
        active_.push_back(j);
        return true;
    }

    /// Coefficients on the full p-vector.
    Vector coefficients() const
    {
        Vector beta = Vector::Zero(X_.cols());
        const Index k = size();
        if (k == 0) return beta;
        const Vector b = R_.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(Qty_);
        for (Index i = 0; i < k; ++i) beta(active_[static_cast<std::size_t>(i)]) = b(i);
        return beta;
    }

private:
    const Matrix& X_;
    const Vector& y_;
    double rcond_;
    Matrix Q_;
    Matrix R_;
    Vector Qty_;
    Vector residual_;
    IndexSet active_;
};

} // namespace caspar
