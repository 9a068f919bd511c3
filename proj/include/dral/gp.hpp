#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dral/errors.hpp"
#include "dral/kernel.hpp"
#include "dral/random.hpp"

namespace dral {

using Index = Eigen::Index;

/// Grid inputs together with their prior covariance. Shared read-only by every state of a run.
struct PriorModel {
    Points points;
    KernelSpec kernel;
    Matrix gram;

    [[nodiscard]] Index size() const noexcept { return points.rows(); }
};

inline std::shared_ptr<const PriorModel> make_prior(Points points, const KernelSpec& kernel) {
    if (points.rows() == 0) throw std::invalid_argument("prior: grid must be nonempty");
    Matrix k = gram(kernel, points);
    return std::make_shared<const PriorModel>(PriorModel{std::move(points), kernel, std::move(k)});
}

/**
 * Exact GP posterior over a finite grid.
 *
 * A state is immutable; `extend` returns the successor. The Cholesky factor L of
 * (K + noise I) grows by one row per observation, and the cached cross term
 * V = L^{-1} K(A, grid) gives every posterior variance and covariance without a solve.
 *
 * Observations may be appended without labels. Variance queries never need them; mean,
 * likelihood, and weight queries throw StateError until `finalize` supplies all labels.
 */
class GpState {
public:
    GpState(std::shared_ptr<const PriorModel> prior, double noise_variance)
        : prior_(std::move(prior)), noise_(noise_variance) {
        if (!prior_) throw std::invalid_argument("GpState: null prior");
        if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
            throw std::invalid_argument("GpState: noise variance must be positive");
        const Index n = prior_->size();
        chol_.resize(0, 0);
        cross_.resize(0, n);
        whitened_.resize(0);
        raw_var_ = prior_->gram.diagonal();
    }

    GpState(const Points& points, const KernelSpec& kernel, double noise_variance)
        : GpState(make_prior(points, kernel), noise_variance) {}

    /// Factorizes the whole design in one dense Cholesky. Same result as a chain of `extend` calls.
    static GpState build(std::shared_ptr<const PriorModel> prior, double noise_variance,
                         std::span<const Index> indices, std::optional<std::span<const double>> labels = std::nullopt) {
        GpState s(std::move(prior), noise_variance);
        const Index t = static_cast<Index>(indices.size());
        if (t == 0) return s;
        for (Index idx : indices) s.check_index(idx);
        if (labels && static_cast<Index>(labels->size()) != t)
            throw std::invalid_argument("GpState::build: label count does not match design size");

        const Matrix& k = s.prior_->gram;
        Matrix system(t, t);
        for (Index a = 0; a < t; ++a)
            for (Index b = 0; b < t; ++b) system(a, b) = k(indices[a], indices[b]);
        system.diagonal().array() += noise_variance;
        Eigen::LLT<Matrix> llt(system);
        if (llt.info() != Eigen::Success) throw NumericalError("GpState::build: Cholesky factorization failed");
        s.chol_ = llt.matrixL();

        Matrix k_design(t, s.prior_->size());
        for (Index a = 0; a < t; ++a) k_design.row(a) = k.row(indices[a]);
        s.cross_ = s.chol_.triangularView<Eigen::Lower>().solve(k_design);
        s.raw_var_ = k.diagonal() - s.cross_.colwise().squaredNorm().transpose();
        s.observed_.assign(indices.begin(), indices.end());
        s.labels_.assign(static_cast<std::size_t>(t), std::nullopt);
        if (labels) {
            for (Index a = 0; a < t; ++a) s.labels_[static_cast<std::size_t>(a)] = check_label((*labels)[a]);
            s.solve_weights();
        }
        return s;
    }

    [[nodiscard]] Index grid_size() const noexcept { return prior_->size(); }
    [[nodiscard]] Index num_observations() const noexcept { return static_cast<Index>(observed_.size()); }
    [[nodiscard]] const std::vector<Index>& observed_indices() const noexcept { return observed_; }
    [[nodiscard]] double noise_variance() const noexcept { return noise_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return prior_->kernel; }
    [[nodiscard]] const Points& points() const noexcept { return prior_->points; }
    [[nodiscard]] const std::shared_ptr<const PriorModel>& prior() const noexcept { return prior_; }
    [[nodiscard]] const Matrix& chol() const noexcept { return chol_; }

    [[nodiscard]] bool labels_finalized() const noexcept { return finalized_; }

    [[nodiscard]] std::vector<double> labels() const {
        require_finalized("labels");
        std::vector<double> out;
        out.reserve(labels_.size());
        for (const auto& y : labels_) out.push_back(*y);
        return out;
    }

    /// alpha = (K + noise I)^{-1} y.
    [[nodiscard]] Vector weights() const {
        require_finalized("weights");
        if (observed_.empty()) return Vector();
        return chol_.transpose().triangularView<Eigen::Upper>().solve(whitened_);
    }

    [[nodiscard]] double posterior_mean(Index i) const {
        check_index(i);
        require_finalized("posterior_mean");
        if (observed_.empty()) return 0.0;
        return cross_.col(i).dot(whitened_);
    }

    [[nodiscard]] Vector mean_vector() const {
        require_finalized("mean_vector");
        if (observed_.empty()) return Vector::Zero(grid_size());
        return cross_.transpose() * whitened_;
    }

    /// Posterior variance before clamping; may be slightly negative in floating point.
    [[nodiscard]] double raw_posterior_var(Index i) const {
        check_index(i);
        return raw_var_(i);
    }

    [[nodiscard]] double posterior_var(Index i) const { return std::max(0.0, raw_posterior_var(i)); }

    [[nodiscard]] const Vector& raw_var_vector() const noexcept { return raw_var_; }

    [[nodiscard]] Vector var_vector() const { return raw_var_.cwiseMax(0.0); }

    [[nodiscard]] double posterior_cov(Index i, Index j) const {
        check_index(i);
        check_index(j);
        if (i == j) return raw_var_(i);
        const double prior_cov = prior_->gram(i, j);
        if (observed_.empty()) return prior_cov;
        return prior_cov - cross_.col(i).dot(cross_.col(j));
    }

    /// Posterior covariance between the listed rows and every grid point (|rows| x n).
    [[nodiscard]] Matrix cov_rows(std::span<const Index> rows) const {
        Matrix out(static_cast<Index>(rows.size()), grid_size());
        for (Index r = 0; r < out.rows(); ++r) {
            check_index(rows[r]);
            out.row(r) = prior_->gram.row(rows[r]);
        }
        if (!observed_.empty()) {
            Matrix cross_rows(cross_.rows(), out.rows());
            for (Index r = 0; r < out.rows(); ++r) cross_rows.col(r) = cross_.col(rows[r]);
            out.noalias() -= cross_rows.transpose() * cross_;
        }
        for (Index r = 0; r < out.rows(); ++r) out(r, rows[r]) = raw_var_(rows[r]);
        return out;
    }

    [[nodiscard]] Matrix cov_matrix() const {
        Matrix out = prior_->gram;
        if (!observed_.empty()) out.noalias() -= cross_.transpose() * cross_;
        out.diagonal() = raw_var_;
        return out;
    }

    /// Variance at target i after one more (label-free) observation at candidate j.
    [[nodiscard]] double lookahead_var(Index i, Index j) const {
        const double c = posterior_cov(i, j);
        const double denom = std::max(0.0, raw_var_(j)) + noise_;
        return std::max(0.0, raw_var_(i) - c * c / denom);
    }

    /// Appends grid point j. Pass std::nullopt to defer the label.
    [[nodiscard]] GpState extend(Index j, std::optional<double> y = std::nullopt) const {
        check_index(j);
        if (y) check_label(*y);
        GpState next = *this;
        const Index t = num_observations();
        const Index n = grid_size();

        // New Cholesky row: l = L^{-1} k(A, x_j) is already column j of V.
        Vector l = t > 0 ? Vector(cross_.col(j)) : Vector();
        const double pivot_sq = prior_->gram(j, j) + noise_ - (t > 0 ? l.squaredNorm() : 0.0);
        if (!(pivot_sq > 0.0)) throw NumericalError("GpState::extend: non-positive Cholesky pivot");
        const double pivot = std::sqrt(pivot_sq);

        next.chol_.conservativeResize(t + 1, t + 1);
        next.chol_.col(t).setZero();
        if (t > 0) next.chol_.row(t).head(t) = l.transpose();
        next.chol_(t, t) = pivot;

        Eigen::RowVectorXd new_row = prior_->gram.row(j);
        if (t > 0) new_row.noalias() -= l.transpose() * cross_;
        new_row /= pivot;
        next.cross_.conservativeResize(t + 1, n);
        next.cross_.row(t) = new_row;
        next.raw_var_ -= new_row.transpose().cwiseAbs2();

        next.observed_.push_back(j);
        next.labels_.push_back(y);
        if (finalized_ && y) {
            next.whitened_.conservativeResize(t + 1);
            next.whitened_(t) = (*y - (t > 0 ? l.dot(whitened_) : 0.0)) / pivot;
        } else {
            next.finalized_ = false;
            next.whitened_.resize(0);
        }
        return next;
    }

    /// Supplies labels for every observation, in selection order.
    [[nodiscard]] GpState finalize(std::span<const double> labels) const {
        if (static_cast<Index>(labels.size()) != num_observations())
            throw std::invalid_argument("GpState::finalize: expected " + std::to_string(num_observations()) +
                                        " labels, got " + std::to_string(labels.size()));
        GpState next = *this;
        for (std::size_t a = 0; a < labels.size(); ++a) next.labels_[a] = check_label(labels[a]);
        next.solve_weights();
        return next;
    }

    /// log N(y | 0, K + noise I), through the Cholesky factor.
    [[nodiscard]] double log_marginal_likelihood() const {
        require_finalized("log_marginal_likelihood");
        if (observed_.empty()) throw StateError("log_marginal_likelihood: no observations");
        const double t = static_cast<double>(observed_.size());
        return -0.5 * whitened_.squaredNorm() - chol_.diagonal().array().log().sum() -
               0.5 * t * std::log(2.0 * std::numbers::pi);
    }

    /// I(y_A; f_A) = 1/2 log det(I + K_A / noise) for the observed design A.
    [[nodiscard]] double information_gain() const {
        double gain = 0.0;
        for (Index a = 0; a < chol_.rows(); ++a) gain += std::log(chol_(a, a)) - 0.5 * std::log(noise_);
        return gain;
    }

private:
    static double check_label(double y) {
        if (!std::isfinite(y)) throw std::invalid_argument("GpState: observation must be finite");
        return y;
    }

    void check_index(Index i) const {
        if (i < 0 || i >= grid_size())
            throw std::out_of_range("grid index " + std::to_string(i) + " out of range [0, " +
                                    std::to_string(grid_size()) + ")");
    }

    void require_finalized(const char* what) const {
        if (!finalized_) throw StateError(std::string(what) + ": labels are not finalized");
    }

    void solve_weights() {
        Vector y(num_observations());
        for (Index a = 0; a < y.size(); ++a) y(a) = *labels_[static_cast<std::size_t>(a)];
        whitened_ = y.size() > 0 ? Vector(chol_.triangularView<Eigen::Lower>().solve(y)) : Vector();
        finalized_ = true;
    }

    std::shared_ptr<const PriorModel> prior_;
    double noise_;
    std::vector<Index> observed_;
    std::vector<std::optional<double>> labels_;
    Matrix chol_;
    Matrix cross_;
    Vector raw_var_;
    Vector whitened_;  // L^{-1} y
    bool finalized_ = true;
};

/// Kernel and noise chosen by marginal-likelihood grid search.
struct HyperparameterFit {
    KernelSpec kernel;
    double noise_variance = 0.0;
    double log_marginal_likelihood = 0.0;
};

struct HyperparameterGrid {
    double lengthscale_min = 1e-2;
    double lengthscale_max = 1e1;
    int lengthscale_count = 24;
    double noise_min = 1e-6;
    double noise_max = 1.0;
    int noise_count = 16;
};

inline std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) return {lo};
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int k = 0; k < count; ++k) out.push_back(std::pow(10.0, a + (b - a) * k / (count - 1)));
    return out;
}

/**
 * Exhaustive log-grid search over (lengthscale, noise) maximizing the log marginal likelihood
 * of (inputs, labels). `base` fixes kind, smoothness and output scale. Ties go to the smaller
 * lengthscale, then the smaller noise.
 */
inline HyperparameterFit fit_hyperparameters(const Points& inputs, const Vector& labels, const KernelSpec& base,
                                             const HyperparameterGrid& grid = {}) {
    const Index t = inputs.rows();
    if (t < 2) throw StateError("fit_hyperparameters: need at least 2 observations");
    if (labels.size() != t) throw std::invalid_argument("fit_hyperparameters: label count mismatch");

    const auto lengthscales = log_spaced(grid.lengthscale_min, grid.lengthscale_max, grid.lengthscale_count);
    const auto noises = log_spaced(grid.noise_min, grid.noise_max, grid.noise_count);
    const bool uses_lengthscale = base.kind != KernelKind::Linear;

    HyperparameterFit best{base, noises.front(), -std::numeric_limits<double>::infinity()};
    bool found = false;
    for (double ell : uses_lengthscale ? lengthscales : std::vector<double>{base.lengthscale}) {
        KernelSpec spec = base;
        spec.lengthscale = ell;
        const Matrix k = gram(spec, inputs);
        for (double noise : noises) {
            Matrix system = k;
            system.diagonal().array() += noise;
            Eigen::LLT<Matrix> llt(system);
            if (llt.info() != Eigen::Success) continue;
            const Matrix l = llt.matrixL();
            const Vector w = l.triangularView<Eigen::Lower>().solve(labels);
            const double lml = -0.5 * w.squaredNorm() - l.diagonal().array().log().sum() -
                               0.5 * static_cast<double>(t) * std::log(2.0 * std::numbers::pi);
            if (!std::isfinite(lml)) continue;
            if (!found || lml > best.log_marginal_likelihood) {
                best = {spec, noise, lml};
                found = true;
            }
        }
    }
    if (!found) throw NumericalError("fit_hyperparameters: no grid point produced a finite likelihood");
    return best;
}

/// A draw of f over the whole grid.
struct PriorSample {
    Vector values;
    std::uint64_t seed = 0;
};

/// f = L z with L the Cholesky factor of (gram + jitter I); jitter escalates from 1e-10 to 1e-6.
inline PriorSample sample_prior(const Matrix& prior_gram, std::uint64_t seed) {
    const Index n = prior_gram.rows();
    if (n == 0) throw std::invalid_argument("sample_prior: empty grid");
    for (double jitter = 1e-10; jitter <= 1e-6 * 1.0001; jitter *= 10.0) {
        Matrix system = prior_gram;
        system.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(system);
        if (llt.info() != Eigen::Success) continue;
        Rng rng = make_rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector z(n);
        for (Index i = 0; i < n; ++i) z(i) = normal(rng);
        return PriorSample{llt.matrixL() * z, seed};
    }
    throw NumericalError("sample_prior: Cholesky failed even with jitter 1e-6");
}

inline PriorSample sample_prior(const KernelSpec& kernel, const Points& points, std::uint64_t seed) {
    if (points.rows() == 0) throw std::invalid_argument("sample_prior: empty grid");
    return sample_prior(gram(kernel, points), seed);
}

/// Confidence radius 2 log(|X| / delta) for a finite domain.
inline double beta_confidence(Index grid_size, double delta) {
    if (grid_size < 1) throw std::invalid_argument("beta_confidence: grid size must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta_confidence: delta must lie in (0, 1)");
    return 2.0 * std::log(static_cast<double>(grid_size) / delta);
}

/// Constant linking summed selected variances to information gain: 2 / log(1 + 1/noise).
inline double information_constant(double noise_variance) { return 2.0 / std::log1p(1.0 / noise_variance); }

} // namespace dral
