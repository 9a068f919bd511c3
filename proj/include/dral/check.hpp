#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dral/config.hpp"
#include "dral/harness.hpp"
#include "dral/report.hpp"

namespace dral {

struct CheckResult {
    std::string name;
    bool passed = true;
    bool informational = false;
    std::string detail;
};

/// Tolerances for the replayed inequalities.
struct CheckTolerances {
    double chain = 1e-10;
    double feasibility = 1e-12;
    double absolute_error = 1e-10;
    double entropy = 1e-8;
    double coverage_rate = 0.90;
};

namespace detail {

inline std::string where(std::uint64_t seed, int t, double slack) {
    std::ostringstream os;
    os << "trial " << seed << ", t=" << t << ", slack " << format_double(slack);
    return os.str();
}

/// Walks every row; the first row with predicate slack below -tol fails the check.
template <typename Slack>
CheckResult row_check(const std::string& name, const std::vector<TrialRecord>& records, double tol, Slack slack_of,
                      bool informational = false) {
    CheckResult res{name, true, informational, ""};
    std::size_t rows = 0;
    for (const auto& r : records)
        for (const auto& row : r.rows) {
            ++rows;
            const double slack = slack_of(row);
            if (!(slack >= -tol)) {
                res.passed = false;
                res.detail = "violated at " + where(r.seed, row.t, slack);
                return res;
            }
        }
    res.detail = std::to_string(rows) + " rows";
    return res;
}

} // namespace detail

/**
 * Inequality suite over trial records produced with `config`:
 * the telescoping chain and selection feasibility for constrained variance reduction,
 * the uncertainty-sampling bound, the absolute-error and entropy relations on every row,
 * and confidence-band coverage on synthetic runs. Checks whose premises do not hold for the
 * configuration are reported as informational.
 */
inline std::vector<CheckResult> run_checks(const ExperimentConfig& config, const std::vector<TrialRecord>& records,
                                           const CheckTolerances& tol = {}) {
    std::vector<CheckResult> out;
    const bool fixed_hyper = config.refit_every == 0;
    const bool synthetic = config.grid_type == GridType::Synthetic;
    const StrategyKind kind = config.strategy.kind;

    out.push_back(detail::row_check("metrics nonnegative", records, 0.0, [](const TrialRow& r) {
        return std::min(r.error, r.worst_var);
    }));

    {
        CheckResult res{"information gain nondecreasing", true, false, ""};
        for (const auto& r : records) {
            for (std::size_t k = 1; k < r.rows.size() && res.passed; ++k)
                if (fixed_hyper && r.rows[k].info_gain < r.rows[k - 1].info_gain - 1e-12) {
                    res.passed = false;
                    res.detail = "decreased at " + detail::where(r.seed, r.rows[k].t, r.rows[k].info_gain - r.rows[k - 1].info_gain);
                }
        }
        res.informational = !fixed_hyper;
        out.push_back(res);
    }

    const bool cdr = kind == StrategyKind::CDRVarianceReduction;
    out.push_back(detail::row_check("telescoping chain worst_var <= sum/T <= C1*gain/T", records, tol.chain,
                                    [](const TrialRow& r) { return r.bound_slack_thm2; }, !(cdr && fixed_hyper)));
    out.push_back(detail::row_check("summed variance <= C1*gain", records, tol.chain,
                                    [](const TrialRow& r) {
                                        const double c1 = information_constant(r.noise_variance);
                                        return (c1 * r.info_gain - r.sum_sigma2) / r.t;
                                    },
                                    !fixed_hyper));
    out.push_back(detail::row_check("constrained selection feasibility", records, tol.feasibility,
                                    [](const TrialRow& r) { return r.t == 1 ? 0.0 : r.feasibility_slack; }, !cdr));
    out.push_back(detail::row_check("uncertainty sampling bound max var <= C1*gain/T", records, tol.chain,
                                    [](const TrialRow& r) { return r.us_bound_slack; },
                                    !(kind == StrategyKind::US && fixed_hyper)));
    out.push_back(detail::row_check("random-selection bound (2*C1*gain + const)/T", records, 0.0,
                                    [](const TrialRow& r) { return r.thm1_bound_slack; }, true));
    out.push_back(detail::row_check("absolute error <= sqrt(E_T)", records, tol.absolute_error,
                                    [](const TrialRow& r) { return r.abs_error_bound - r.abs_error_worst; }));
    out.push_back(detail::row_check("entropy <= 1/2 log(2 pi e worst_var)", records, tol.entropy,
                                    [](const TrialRow& r) { return r.entropy_bound - r.entropy_worst; }));

    {
        CheckResult res{"confidence coverage at final T", true, !synthetic, ""};
        std::size_t covered = 0;
        for (const auto& r : records)
            if (!r.rows.empty() && r.rows.back().covered) ++covered;
        const double rate = records.empty() ? 1.0 : static_cast<double>(covered) / static_cast<double>(records.size());
        res.passed = rate >= tol.coverage_rate;
        res.detail = std::to_string(covered) + "/" + std::to_string(records.size()) + " trials covered";
        out.push_back(res);
    }
    {
        // E_T <= beta * worst_var follows from coverage; reported per covered row.
        CheckResult res{"E_T <= beta*worst_var on covered rows", true, !synthetic, ""};
        for (const auto& r : records)
            for (const auto& row : r.rows)
                if (res.passed && row.covered && row.error > row.confidence_bound * (1.0 + 1e-12)) {
                    res.passed = false;
                    res.detail = "violated at " + detail::where(r.seed, row.t, row.confidence_bound - row.error);
                }
        out.push_back(res);
    }
    return out;
}

/// True when every non-informational check passed.
inline bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.informational && !r.passed) return false;
    return true;
}

} // namespace dral
