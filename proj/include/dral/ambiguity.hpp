#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dral/errors.hpp"
#include "dral/kernel.hpp"
#include "dral/random.hpp"

namespace dral {

/// Probability vector over grid indices.
class DiscreteDistribution {
public:
    static constexpr double kSumTolerance = 1e-10;

    DiscreteDistribution() = default;

    /// Takes weights that must already be a distribution (nonnegative, summing to 1 within 1e-10).
    explicit DiscreteDistribution(Vector weights) : weights_(std::move(weights)) {
        if (weights_.size() == 0) throw std::invalid_argument("distribution: empty support");
        for (Eigen::Index i = 0; i < weights_.size(); ++i)
            if (!(weights_(i) >= 0.0) || !std::isfinite(weights_(i)))
                throw std::invalid_argument("distribution: weight " + std::to_string(i) + " is negative or non-finite");
        if (std::abs(weights_.sum() - 1.0) > kSumTolerance)
            throw std::invalid_argument("distribution: weights do not sum to 1");
    }

    /// Normalizes nonnegative, not-all-zero weights.
    static DiscreteDistribution normalized(Vector weights) {
        const double total = weights.sum();
        if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("distribution: weights sum to zero");
        if ((weights.array() < 0.0).any()) throw std::invalid_argument("distribution: negative weight");
        weights /= total;
        return DiscreteDistribution(std::move(weights));
    }

    static DiscreteDistribution uniform(Eigen::Index n) {
        if (n < 1) throw std::invalid_argument("distribution: empty support");
        return DiscreteDistribution(Vector::Constant(n, 1.0 / static_cast<double>(n)));
    }

    static DiscreteDistribution point_mass(Eigen::Index n, Eigen::Index at) {
        if (at < 0 || at >= n) throw std::out_of_range("distribution: point mass index out of range");
        Vector w = Vector::Zero(n);
        w(at) = 1.0;
        return DiscreteDistribution(std::move(w));
    }

    [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return weights_.size(); }
    [[nodiscard]] double operator[](Eigen::Index i) const { return weights_(i); }

    [[nodiscard]] double expectation(const Vector& values) const {
        if (values.size() != weights_.size()) throw std::invalid_argument("expectation: length mismatch");
        return weights_.dot(values);
    }

    /// Indices with positive weight, ascending.
    [[nodiscard]] std::vector<Eigen::Index> support() const {
        std::vector<Eigen::Index> s;
        for (Eigen::Index i = 0; i < weights_.size(); ++i)
            if (weights_(i) > 0.0) s.push_back(i);
        return s;
    }

private:
    Vector weights_;
};

/// L-infinity ball of radius eta around a reference distribution, intersected with the simplex.
struct AmbiguitySet {
    DiscreteDistribution reference;
    double eta = 0.0;

    AmbiguitySet(DiscreteDistribution ref, double radius) : reference(std::move(ref)), eta(radius) {
        if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("ambiguity: eta must be >= 0");
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return reference.size(); }

    [[nodiscard]] bool contains(const Vector& p, double tol = 1e-10) const {
        if (p.size() != size()) return false;
        if ((p.array() < -tol).any()) return false;
        if (std::abs(p.sum() - 1.0) > tol) return false;
        return (p - reference.weights()).cwiseAbs().maxCoeff() <= eta + tol;
    }
};

struct WorstCase {
    double value = 0.0;
    DiscreteDistribution distribution;
};

/**
 * max_{p in set} E_p[v], solved exactly.
 *
 * Every p_i starts at its lower bound max(p_ref_i - eta, 0); the remaining mass is poured
 * into indices by decreasing v (lower index first on ties), each up to p_ref_i + eta.
 */
inline WorstCase worst_case_expectation(const AmbiguitySet& set, const Vector& values) {
    const Eigen::Index n = set.size();
    if (values.size() != n) throw std::invalid_argument("worst_case_expectation: values/grid length mismatch");
    if (!values.allFinite()) throw std::invalid_argument("worst_case_expectation: non-finite value");

    const Vector& ref = set.reference.weights();
    Vector p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = std::max(ref(i) - set.eta, 0.0);
    double leftover = 1.0 - p.sum();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

    for (Eigen::Index i : order) {
        if (leftover <= 0.0) break;
        const double room = (ref(i) + set.eta) - p(i);
        const double add = std::min(room, leftover);
        if (add > 0.0) {
            p(i) += add;
            leftover -= add;
        }
    }
    // Round-off from the subtraction chain lands on the top-ranked index.
    p(order.front()) += 1.0 - p.sum();
    p = p.cwiseMax(0.0);
    p /= p.sum();

    const double value = p.dot(values);
    return WorstCase{value, DiscreteDistribution(std::move(p))};
}

/// Inverse-CDF draw using a single uniform from `rng`.
inline Eigen::Index sample(const DiscreteDistribution& p, Rng& rng) {
    const Vector& w = p.weights();
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * w.sum();
    double cumulative = 0.0;
    Eigen::Index last_positive = -1;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) <= 0.0) continue;
        cumulative += w(i);
        last_positive = i;
        if (u < cumulative) return i;
    }
    return last_positive;
}

/// Grid discretization of N(0, variance_scale I): weights proportional to the density at each point.
inline DiscreteDistribution gaussian_reference(const Points& points, double variance_scale) {
    if (!(variance_scale > 0.0)) throw std::invalid_argument("gaussian_reference: variance_scale must be positive");
    if (points.rows() == 0) throw std::invalid_argument("gaussian_reference: empty grid");
    Vector log_w(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) log_w(i) = -points.row(i).squaredNorm() / (2.0 * variance_scale);
    // Shift by the max so far-out grids do not underflow to an all-zero vector.
    Vector w = (log_w.array() - log_w.maxCoeff()).exp();
    return DiscreteDistribution::normalized(std::move(w));
}

/// Reads one weight per line (first column of a comma-delimited file; a non-numeric first line is a header).
inline DiscreteDistribution reference_from_file(const std::string& path, Eigen::Index expected_size) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference weights file '" + path + "'");
    std::vector<double> weights;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string cell = line.substr(0, line.find(','));
        try {
            std::size_t used = 0;
            const double w = std::stod(cell, &used);
            weights.push_back(w);
        } catch (const std::exception&) {
            if (row == 1 && weights.empty()) continue;
            throw ParseError("non-numeric weight '" + cell + "'", row, 1);
        }
    }
    if (static_cast<Eigen::Index>(weights.size()) != expected_size)
        throw std::invalid_argument("reference weights file has " + std::to_string(weights.size()) +
                                    " entries, grid has " + std::to_string(expected_size));
    return DiscreteDistribution::normalized(Eigen::Map<const Vector>(weights.data(), expected_size));
}

} // namespace dral
