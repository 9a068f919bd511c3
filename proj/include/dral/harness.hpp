#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dral/acquisition.hpp"
#include "dral/ambiguity.hpp"
#include "dral/config.hpp"
#include "dral/dataset.hpp"
#include "dral/gp.hpp"

namespace dral {

/// Everything about a run that does not depend on the trial seed.
struct Problem {
    std::shared_ptr<const PriorModel> prior;
    AmbiguitySet ambiguity;
    /// Dataset targets (the ground truth on real data); empty for synthetic runs.
    std::optional<Vector> targets;
};

inline DiscreteDistribution make_reference(const ReferenceSpec& spec, const Points& points) {
    switch (spec.kind) {
    case ReferenceKind::Gaussian: return gaussian_reference(points, spec.variance_scale);
    case ReferenceKind::Uniform: return DiscreteDistribution::uniform(points.rows());
    case ReferenceKind::File: return reference_from_file(spec.path, points.rows());
    }
    throw std::logic_error("unknown reference kind");
}

inline Problem make_problem(const ExperimentConfig& config) {
    Points points;
    std::optional<Vector> targets;
    if (config.grid_type == GridType::Synthetic) {
        points = make_lattice(config.lattice);
    } else {
        Dataset data = load_dataset(config.dataset);
        points = std::move(data.inputs);
        targets = std::move(data.targets);
    }
    DiscreteDistribution reference = make_reference(config.reference, points);
    auto prior = make_prior(std::move(points), config.kernel);
    return Problem{std::move(prior), AmbiguitySet(std::move(reference), config.eta), std::move(targets)};
}

/// One logged iteration of a trial.
struct TrialRow {
    int t = 0;
    Index chosen = 0;
    double error = 0.0;             // E_t, worst-case expected squared error
    double worst_var = 0.0;         // worst-case expected posterior variance
    double sum_sigma2 = 0.0;        // sum over s <= t of sigma^2_{s-1}(x_s)
    double info_gain = 0.0;         // 1/2 log det(I + K_t / noise)
    double bound_slack_thm2 = 0.0;  // min of the two gaps in worst_var <= sum/t <= C1 gain / t

    // Per-row diagnostics.
    double sigma2_selected = 0.0;     // sigma^2_{t-1}(x_t)
    double feasibility_slack = 0.0;   // sigma^2_{t-1}(x_t) - worst-case expected sigma^2_{t-1}
    double abs_error_worst = 0.0;     // worst-case expected |f - mu_t|
    double abs_error_bound = 0.0;     // sqrt(E_t)
    double entropy_worst = 0.0;       // worst-case expected posterior entropy
    double entropy_bound = 0.0;       // 1/2 log(2 pi e worst_var)
    double confidence_bound = 0.0;    // beta_delta * worst_var
    double us_bound_slack = 0.0;      // C1 gain / t - max_x sigma_t^2(x)
    double thm1_bound_slack = 0.0;    // (2 C1 gain + 4 log(1/delta) + 8 log 4 + 1) / t - worst_var
    bool covered = false;             // |f - mu_t| <= sqrt(beta sigma_t^2) on the whole grid
    double noise_variance = 0.0;
    double lengthscale = 0.0;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    std::vector<TrialRow> rows;
    KernelSpec final_kernel;
    double final_noise = 0.0;
};

/// Failure inside a trial, tagged with the seed and iteration.
class TrialError : public std::runtime_error {
public:
    TrialError(std::uint64_t seed, int t, const std::string& what)
        : std::runtime_error("trial seed " + std::to_string(seed) + ", t=" + std::to_string(t) + ": " + what),
          seed_(seed), t_(t) {}
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] int iteration() const noexcept { return t_; }

private:
    std::uint64_t seed_;
    int t_;
};

/// E_T: worst-case expectation of (f - mu_T)^2.
inline double compute_error(const GpState& state, const Vector& truth, const AmbiguitySet& set) {
    if (truth.size() != state.grid_size()) throw std::invalid_argument("compute_error: truth does not cover the grid");
    const Vector residual = truth - state.mean_vector();
    return worst_case_expectation(set, residual.cwiseAbs2()).value;
}

struct Diagnostics {
    double error = 0.0;
    double worst_var = 0.0;
    double entropy_bound = 0.0;
    double abs_error_bound = 0.0;
    double confidence_bound = 0.0;
    double abs_error_worst = 0.0;
    double entropy_worst = 0.0;
    double max_var = 0.0;
    bool covered = false;
};

/// Reported error-bound quantities for a finalized state.
inline Diagnostics compute_diagnostics(const GpState& state, const Vector& truth, const AmbiguitySet& set, double delta) {
    if (truth.size() != state.grid_size()) throw std::invalid_argument("compute_diagnostics: truth does not cover the grid");
    Diagnostics d;
    const Vector var = state.var_vector();
    const Vector residual = truth - state.mean_vector();
    d.error = worst_case_expectation(set, residual.cwiseAbs2()).value;
    d.worst_var = worst_case_expectation(set, var).value;
    d.entropy_bound = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * d.worst_var);
    d.abs_error_bound = std::sqrt(d.error);
    const double beta = beta_confidence(state.grid_size(), delta);
    d.confidence_bound = beta * d.worst_var;
    d.abs_error_worst = worst_case_expectation(set, residual.cwiseAbs()).value;
    const Vector entropy = (2.0 * std::numbers::pi * std::numbers::e * var.cwiseMax(std::numeric_limits<double>::min()))
                               .array()
                               .log() *
                           0.5;
    d.entropy_worst = worst_case_expectation(set, entropy).value;
    d.max_var = var.maxCoeff();
    d.covered = true;
    for (Index i = 0; i < residual.size(); ++i)
        if (std::abs(residual(i)) > std::sqrt(beta * var(i))) {
            d.covered = false;
            break;
        }
    return d;
}

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) { return make_rng(seed, stream)(); }

} // namespace detail

/// Ground-truth values on the grid for one trial: a prior draw (synthetic) or the dataset targets.
inline Vector trial_truth(const Problem& problem, std::uint64_t seed) {
    if (problem.targets) return *problem.targets;
    return sample_prior(problem.prior->gram, detail::derive_seed(seed, Stream::Truth)).values;
}

/**
 * Runs the selection loop for one seed. The first input is uniform; later inputs come from the
 * configured strategy. Labels are revealed as points are chosen (selection never reads them).
 */
inline TrialRecord run_trial(const ExperimentConfig& config, const Problem& problem, std::uint64_t seed) {
    TrialRecord record;
    record.seed = seed;
    int t = 0;
    try {
        const Vector truth = trial_truth(problem, seed);
        const bool synthetic = !problem.targets.has_value();
        Rng noise_rng = make_rng(seed, Stream::Noise);
        Rng initial_rng = make_rng(seed, Stream::Initial);
        Rng strategy_rng = make_rng(seed, Stream::Strategy);
        std::normal_distribution<double> normal(0.0, 1.0);

        std::shared_ptr<const PriorModel> prior = problem.prior;
        double noise = config.noise_variance;
        GpState state(prior, noise);
        std::vector<double> labels;
        double sum_sigma2 = 0.0;
        const double beta = beta_confidence(state.grid_size(), config.delta);

        for (t = 1; t <= config.T; ++t) {
            const Index chosen = t == 1 ? select_rs(state.grid_size(), initial_rng)
                                        : select(config.strategy, state, problem.ambiguity, strategy_rng);
            const double sigma2_selected = state.posterior_var(chosen);
            const double prev_worst = worst_case_variance(state, problem.ambiguity).value;
            const double y = synthetic ? truth(chosen) + std::sqrt(config.noise_variance) * normal(noise_rng) : truth(chosen);
            labels.push_back(y);
            state = state.extend(chosen, y);
            sum_sigma2 += sigma2_selected;

            if (config.refit_every > 0 && t >= 2 && t % config.refit_every == 0) {
                const auto& idx = state.observed_indices();
                Points inputs(static_cast<Index>(idx.size()), prior->points.cols());
                for (std::size_t a = 0; a < idx.size(); ++a) inputs.row(static_cast<Index>(a)) = prior->points.row(idx[a]);
                const Vector y_vec = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
                const HyperparameterFit fit = fit_hyperparameters(inputs, y_vec, prior->kernel);
                prior = make_prior(prior->points, fit.kernel);
                noise = fit.noise_variance;
                state = GpState::build(prior, noise, idx, std::span<const double>(labels));
            }

            if (t == 1 || t == config.T || t % config.metric_every == 0) {
                const Diagnostics d = compute_diagnostics(state, truth, problem.ambiguity, config.delta);
                const double c1 = information_constant(noise);
                const double gain = state.information_gain();
                const double td = static_cast<double>(t);
                TrialRow row;
                row.t = t;
                row.chosen = chosen;
                row.error = d.error;
                row.worst_var = d.worst_var;
                row.sum_sigma2 = sum_sigma2;
                row.info_gain = gain;
                row.bound_slack_thm2 = std::min(sum_sigma2 / td - d.worst_var, c1 * gain / td - sum_sigma2 / td);
                row.sigma2_selected = sigma2_selected;
                row.feasibility_slack = sigma2_selected - prev_worst;
                row.abs_error_worst = d.abs_error_worst;
                row.abs_error_bound = d.abs_error_bound;
                row.entropy_worst = d.entropy_worst;
                row.entropy_bound = d.entropy_bound;
                row.confidence_bound = beta * d.worst_var;
                row.us_bound_slack = c1 * gain / td - d.max_var;
                row.thm1_bound_slack =
                    (2.0 * c1 * gain + 4.0 * std::log(1.0 / config.delta) + 8.0 * std::log(4.0) + 1.0) / td - d.worst_var;
                row.covered = d.covered;
                row.noise_variance = noise;
                row.lengthscale = prior->kernel.lengthscale;
                record.rows.push_back(row);
            }
        }
        record.final_kernel = prior->kernel;
        record.final_noise = noise;
    } catch (const TrialError&) {
        throw;
    } catch (const std::exception& e) {
        throw TrialError(seed, t, e.what());
    }
    return record;
}

/// Runs every seed on up to `jobs` threads; results keep seed order. The first failure (in seed order) is rethrown.
inline std::vector<TrialRecord> run_trials(const ExperimentConfig& config, const Problem& problem,
                                           const std::vector<std::uint64_t>& seeds, unsigned jobs = 0) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, seeds.size())));
    std::vector<TrialRecord> records(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < seeds.size(); k = next++) {
            try {
                records[k] = run_trial(config, problem, seeds[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return records;
}

struct SummaryRow {
    int t = 0;
    double mean_error = 0.0;
    double stderr_error = 0.0;
    double mean_worst_var = 0.0;
    double stderr_worst_var = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

} // namespace detail

/// Per-iteration mean and standard error (sample std / sqrt(n)) across trials.
inline std::vector<SummaryRow> aggregate(const std::vector<TrialRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    const std::size_t len = records.front().rows.size();
    for (const auto& r : records)
        if (r.rows.size() != len) throw std::invalid_argument("aggregate: trials have different lengths");
    std::vector<SummaryRow> out;
    for (std::size_t k = 0; k < len; ++k) {
        std::vector<double> errs, vars;
        const int t = records.front().rows[k].t;
        for (const auto& r : records) {
            if (r.rows[k].t != t) throw std::invalid_argument("aggregate: trials log different iterations");
            errs.push_back(r.rows[k].error);
            vars.push_back(r.rows[k].worst_var);
        }
        const auto [me, se] = detail::mean_stderr(errs);
        const auto [mv, sv] = detail::mean_stderr(vars);
        out.push_back(SummaryRow{t, me, se, mv, sv});
    }
    return out;
}

} // namespace dral
