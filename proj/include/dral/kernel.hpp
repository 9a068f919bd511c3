#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "dral/errors.hpp"

namespace dral {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Finite candidate set: one input per row.
using Points = Eigen::MatrixXd;

enum class KernelKind { Linear, SquaredExponential, Matern };

inline std::string_view to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::SquaredExponential: return "se";
    case KernelKind::Matern: return "matern";
    }
    return "unknown";
}

inline KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") return KernelKind::Linear;
    if (name == "se" || name == "squared_exponential" || name == "rbf") return KernelKind::SquaredExponential;
    if (name == "matern") return KernelKind::Matern;
    throw std::invalid_argument("unknown kernel kind '" + std::string(name) + "'");
}

/**
 * Stationary (SE, Matern) or linear covariance function.
 *
 * SE and Matern kernels satisfy k(x, x) = output_scale <= 1. Matern smoothness is limited
 * to the half-integer values 3/2 and 5/2, evaluated in closed form.
 */
struct KernelSpec {
    KernelKind kind = KernelKind::SquaredExponential;
    double lengthscale = 0.5;
    double nu = 2.5;
    double output_scale = 1.0;

    [[nodiscard]] bool operator==(const KernelSpec&) const = default;
};

/// Checked constructor. Throws std::invalid_argument on a non-positive lengthscale or
/// output scale, or a Matern smoothness outside {3/2, 5/2}; clamps output_scale to 1.
inline KernelSpec make_kernel(KernelKind kind, double lengthscale = 0.5, double nu = 2.5, double output_scale = 1.0) {
    if (kind != KernelKind::Linear && !(lengthscale > 0.0 && std::isfinite(lengthscale)))
        throw std::invalid_argument("kernel lengthscale must be positive and finite");
    if (kind == KernelKind::Matern && nu != 1.5 && nu != 2.5)
        throw std::invalid_argument("matern smoothness must be 1.5 or 2.5");
    if (!(output_scale > 0.0) || !std::isfinite(output_scale))
        throw std::invalid_argument("kernel output_scale must lie in (0, 1]");
    return KernelSpec{kind, lengthscale, nu, std::min(output_scale, 1.0)};
}

namespace detail {

inline double stationary_profile(const KernelSpec& spec, double squared_distance) {
    switch (spec.kind) {
    case KernelKind::SquaredExponential:
        return spec.output_scale * std::exp(-squared_distance / (2.0 * spec.lengthscale * spec.lengthscale));
    case KernelKind::Matern: {
        const double r = std::sqrt(squared_distance) / spec.lengthscale;
        if (spec.nu == 1.5) {
            const double s = std::sqrt(3.0) * r;
            return spec.output_scale * (1.0 + s) * std::exp(-s);
        }
        if (spec.nu == 2.5) {
            const double s = std::sqrt(5.0) * r;
            return spec.output_scale * (1.0 + s + s * s / 3.0) * std::exp(-s);
        }
        throw UnsupportedError("matern smoothness must be 1.5 or 2.5");
    }
    case KernelKind::Linear: break;
    }
    throw std::logic_error("stationary_profile called for a non-stationary kernel");
}

} // namespace detail

template <typename A, typename B>
double eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z) {
    if (x.size() != z.size())
        throw std::invalid_argument("kernel eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(z.size()) + ")");
    if (spec.kind == KernelKind::Linear) return x.dot(z);
    return detail::stationary_profile(spec, (x - z).squaredNorm());
}

/// Gram matrix of the rows of `points`; each unordered pair is evaluated once so the
/// result is exactly symmetric.
inline Matrix gram(const KernelSpec& spec, const Points& points) {
    if (points.rows() == 0) throw std::invalid_argument("gram: empty point set");
    const Eigen::Index n = points.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = eval(spec, points.row(i), points.row(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

/// Kernel between each row of `a` and each row of `b`.
inline Matrix cross_gram(const KernelSpec& spec, const Points& a, const Points& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("cross_gram: dimension mismatch");
    Matrix k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = eval(spec, a.row(i), b.row(j));
    return k;
}

/// L1-Lipschitz constant of the posterior standard deviation for a kernel with k(x, x) <= 1.
inline double sigma_lipschitz_constant(const KernelSpec& spec) {
    switch (spec.kind) {
    case KernelKind::Linear: return 1.0;
    case KernelKind::SquaredExponential: return std::sqrt(2.0) / spec.lengthscale;
    case KernelKind::Matern:
        if (!(spec.nu > 1.0)) throw UnsupportedError("sigma Lipschitz constant requires matern nu > 1");
        return std::sqrt(2.0) / spec.lengthscale * std::sqrt(spec.nu / (spec.nu - 1.0));
    }
    throw std::logic_error("unknown kernel kind");
}

/// True when k(x, x) <= 1 is guaranteed on `points` (always for SE/Matern; linear needs ||x|| <= 1).
inline bool is_normalized_on(const KernelSpec& spec, const Points& points) {
    if (spec.kind != KernelKind::Linear) return spec.output_scale <= 1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if (points.row(i).squaredNorm() > 1.0 + 1e-12) return false;
    return true;
}

} // namespace dral
