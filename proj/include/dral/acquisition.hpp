#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dral/ambiguity.hpp"
#include "dral/gp.hpp"
#include "dral/random.hpp"

namespace dral {

enum class StrategyKind {
    US,
    RS,
    VarianceReduction,
    EPIG,
    DRRandom,
    DRVarianceReduction,
    CDRVarianceReduction,
};

inline constexpr std::array<StrategyKind, 7> kAllStrategies = {
    StrategyKind::US,       StrategyKind::RS,           StrategyKind::VarianceReduction,   StrategyKind::EPIG,
    StrategyKind::DRRandom, StrategyKind::DRVarianceReduction, StrategyKind::CDRVarianceReduction,
};

inline std::string_view to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::US: return "us";
    case StrategyKind::RS: return "rs";
    case StrategyKind::VarianceReduction: return "variance_reduction";
    case StrategyKind::EPIG: return "epig";
    case StrategyKind::DRRandom: return "dr_random";
    case StrategyKind::DRVarianceReduction: return "dr_variance_reduction";
    case StrategyKind::CDRVarianceReduction: return "cdr_variance_reduction";
    }
    return "unknown";
}

inline StrategyKind parse_strategy(std::string_view name) {
    for (StrategyKind k : kAllStrategies)
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

/// True for strategies that consume the strategy random stream after the first input.
inline bool is_randomized(StrategyKind kind) { return kind == StrategyKind::RS || kind == StrategyKind::DRRandom; }

enum class RsDistribution { Uniform, Reference };

struct StrategyOptions {
    StrategyKind kind = StrategyKind::CDRVarianceReduction;
    RsDistribution rs_distribution = RsDistribution::Uniform;
    /// Score EPIG with log|rho| instead of the mutual information -1/2 log(1 - rho^2).
    bool epig_literal = false;
};

namespace detail {

inline double tie_tolerance(double best) { return 1e-13 + 1e-11 * std::abs(best); }

} // namespace detail

/// Lowest index whose score is within round-off of the minimum.
inline Index argmin_lowest(const Vector& scores) {
    const double best = scores.minCoeff();
    const double limit = best + detail::tie_tolerance(best);
    for (Index i = 0; i < scores.size(); ++i)
        if (scores(i) <= limit) return i;
    return 0;
}

inline Index argmax_lowest(const Vector& scores) {
    const double best = scores.maxCoeff();
    const double limit = best - detail::tie_tolerance(best);
    for (Index i = 0; i < scores.size(); ++i)
        if (scores(i) >= limit) return i;
    return 0;
}

/// For each candidate j: sum_i p_i * lookahead_var(i, j).
inline Vector expected_lookahead_scores(const GpState& state, const DiscreteDistribution& p) {
    if (p.size() != state.grid_size()) throw std::invalid_argument("target distribution/grid size mismatch");
    const std::vector<Index> support = p.support();
    const Matrix cov = state.cov_rows(support);
    const Vector& raw = state.raw_var_vector();
    const Index n = state.grid_size();
    Vector denom(n);
    for (Index j = 0; j < n; ++j) denom(j) = std::max(0.0, raw(j)) + state.noise_variance();

    Vector scores = Vector::Zero(n);
    for (std::size_t r = 0; r < support.size(); ++r) {
        const Index i = support[r];
        const double w = p[i];
        const double var_i = raw(i);
        for (Index j = 0; j < n; ++j) {
            const double c = cov(static_cast<Index>(r), j);
            scores(j) += w * std::max(0.0, var_i - c * c / denom(j));
        }
    }
    return scores;
}

/// EPIG score of every candidate against target distribution p.
inline Vector epig_scores(const GpState& state, const DiscreteDistribution& p, bool literal = false) {
    if (p.size() != state.grid_size()) throw std::invalid_argument("target distribution/grid size mismatch");
    const std::vector<Index> support = p.support();
    const Matrix cov = state.cov_rows(support);
    const Vector var = state.var_vector();
    const double noise = state.noise_variance();
    const Index n = state.grid_size();
    constexpr double kRhoCap = 1.0 - 1e-12;

    Vector scores = Vector::Zero(n);
    for (std::size_t r = 0; r < support.size(); ++r) {
        const Index target = support[r];
        const double w = p[target];
        const double target_pred = var(target) + noise;
        for (Index j = 0; j < n; ++j) {
            const double c = cov(static_cast<Index>(r), j);
            const double rho_sq = std::min(c * c / ((var(j) + noise) * target_pred), kRhoCap);
            if (literal)
                scores(j) += w * 0.5 * std::log(std::max(rho_sq, std::numeric_limits<double>::min()));
            else
                scores(j) += w * (-0.5 * std::log1p(-rho_sq));
        }
    }
    return scores;
}

/// Worst-case target distribution p_t for the current variance vector.
inline WorstCase worst_case_variance(const GpState& state, const AmbiguitySet& set) {
    return worst_case_expectation(set, state.var_vector());
}

inline Index select_us(const GpState& state) { return argmax_lowest(state.var_vector()); }

inline Index select_rs(Index grid_size, Rng& rng) {
    if (grid_size < 1) throw std::invalid_argument("select_rs: empty grid");
    return std::uniform_int_distribution<Index>(0, grid_size - 1)(rng);
}

inline Index select_variance_reduction(const GpState& state) {
    return argmin_lowest(expected_lookahead_scores(state, DiscreteDistribution::uniform(state.grid_size())));
}

inline Index select_epig(const GpState& state, const DiscreteDistribution& target, bool literal = false) {
    return argmax_lowest(epig_scores(state, target, literal));
}

inline Index select_dr_random(const GpState& state, const AmbiguitySet& set, Rng& rng) {
    return sample(worst_case_variance(state, set).distribution, rng);
}

inline Index select_dr_variance_reduction(const GpState& state, const AmbiguitySet& set) {
    return argmin_lowest(expected_lookahead_scores(state, worst_case_variance(state, set).distribution));
}

/// Candidates whose current variance reaches the worst-case expected variance.
struct FeasibleSet {
    std::vector<Index> members;
    double threshold = 0.0;
};

inline FeasibleSet cdr_feasible_set(const GpState& state, const WorstCase& worst) {
    const Vector var = state.var_vector();
    FeasibleSet fs{{}, worst.value};
    // Relative slack absorbs the round-off in the weighted sum when all variances tie.
    const double limit = worst.value - 1e-12 * std::abs(worst.value);
    for (Index j = 0; j < var.size(); ++j)
        if (var(j) >= limit) fs.members.push_back(j);
    return fs;
}

inline Index select_cdr_variance_reduction(const GpState& state, const AmbiguitySet& set) {
    const WorstCase worst = worst_case_variance(state, set);
    const FeasibleSet feasible = cdr_feasible_set(state, worst);
    if (feasible.members.empty()) throw std::logic_error("constrained selection: feasible set is empty");
    const Vector scores = expected_lookahead_scores(state, worst.distribution);

    Vector restricted(static_cast<Index>(feasible.members.size()));
    for (std::size_t k = 0; k < feasible.members.size(); ++k) restricted(static_cast<Index>(k)) = scores(feasible.members[k]);
    return feasible.members[static_cast<std::size_t>(argmin_lowest(restricted))];
}

/// Dispatches one selection step. `rng` is only consumed by randomized strategies.
inline Index select(const StrategyOptions& options, const GpState& state, const AmbiguitySet& set, Rng& rng) {
    switch (options.kind) {
    case StrategyKind::US: return select_us(state);
    case StrategyKind::RS:
        if (options.rs_distribution == RsDistribution::Reference) return sample(set.reference, rng);
        return select_rs(state.grid_size(), rng);
    case StrategyKind::VarianceReduction: return select_variance_reduction(state);
    case StrategyKind::EPIG: return select_epig(state, set.reference, options.epig_literal);
    case StrategyKind::DRRandom: return select_dr_random(state, set, rng);
    case StrategyKind::DRVarianceReduction: return select_dr_variance_reduction(state, set);
    case StrategyKind::CDRVarianceReduction: return select_cdr_variance_reduction(state, set);
    }
    throw std::logic_error("unknown strategy kind");
}

} // namespace dral
