#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dral/acquisition.hpp"
#include "dral/errors.hpp"
#include "dral/kernel.hpp"

namespace dral {

using Json = nlohmann::json;

enum class GridType { Synthetic, Dataset };

/// Regular lattice {min, min + step, ..., max}^dim.
struct LatticeSpec {
    int dim = 2;
    double min = -1.0;
    double max = 1.0;
    int levels = 11;
};

struct DatasetSpec {
    std::string path;
    std::string target;
    std::vector<std::string> features;  // empty: every column except the target
    std::int64_t subsample = 0;         // 0: all rows
    std::uint64_t seed = 0;
    char delimiter = ',';
};

enum class ReferenceKind { Gaussian, Uniform, File };

struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::Gaussian;
    double variance_scale = 0.2;
    std::string path;
};

struct SweepSpec {
    std::vector<double> eta;
    std::vector<StrategyKind> strategy;
    std::vector<KernelSpec> kernel;
};

struct ExperimentConfig {
    std::string name = "experiment";
    GridType grid_type = GridType::Synthetic;
    LatticeSpec lattice;
    DatasetSpec dataset;
    KernelSpec kernel;
    double noise_variance = 1e-4;
    StrategyOptions strategy;
    double eta = 0.0;
    ReferenceSpec reference;
    int T = 100;
    int trials = 10;
    std::uint64_t first_seed = 0;
    std::vector<std::uint64_t> seeds;  // explicit list overrides first_seed/trials
    int refit_every = 0;
    int metric_every = 1;
    double delta = 0.05;
    SweepSpec sweep;

    /// Trial seeds in run order.
    [[nodiscard]] std::vector<std::uint64_t> trial_seeds() const {
        if (!seeds.empty()) return seeds;
        std::vector<std::uint64_t> out;
        for (int k = 0; k < trials; ++k) out.push_back(first_seed + static_cast<std::uint64_t>(k));
        return out;
    }
};

namespace detail {

inline const Json* find(const Json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline std::string join(const std::string& prefix, const char* key) {
    return prefix.empty() ? std::string(key) : prefix + "." + key;
}

template <typename T>
T read(const Json& obj, const char* key, const std::string& prefix, T fallback) {
    const Json* node = find(obj, key);
    if (!node) return fallback;
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!node->is_boolean()) throw std::invalid_argument("expected a boolean");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!node->is_number()) throw std::invalid_argument("expected a number");
        } else if constexpr (std::is_integral_v<T>) {
            if (!node->is_number_integer() && !node->is_number_unsigned()) throw std::invalid_argument("expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (node->is_number_integer() && node->get<std::int64_t>() < 0) throw std::invalid_argument("must be >= 0");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!node->is_string()) throw std::invalid_argument("expected a string");
        }
        return node->get<T>();
    } catch (const std::exception& e) {
        throw ConfigError(join(prefix, key), e.what());
    }
}

inline KernelSpec parse_kernel(const Json& node, const std::string& field) {
    if (!node.is_object()) throw ConfigError(field, "expected an object");
    KernelSpec k;
    try {
        k.kind = parse_kernel_kind(read<std::string>(node, "kind", field, "se"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(field + ".kind", e.what());
    }
    k.lengthscale = read<double>(node, "lengthscale", field, 0.5);
    k.nu = read<double>(node, "nu", field, 2.5);
    k.output_scale = read<double>(node, "output_scale", field, 1.0);
    if (k.kind != KernelKind::Linear && !(k.lengthscale > 0.0)) throw ConfigError(field + ".lengthscale", "must be positive");
    if (k.kind == KernelKind::Matern && k.nu != 1.5 && k.nu != 2.5) throw ConfigError(field + ".nu", "must be 1.5 or 2.5");
    if (!(k.output_scale > 0.0)) throw ConfigError(field + ".output_scale", "must lie in (0, 1]");
    k.output_scale = std::min(k.output_scale, 1.0);
    return k;
}

inline Json kernel_to_json(const KernelSpec& k) {
    return Json{{"kind", std::string(to_string(k.kind))},
                {"lengthscale", k.lengthscale},
                {"nu", k.nu},
                {"output_scale", k.output_scale}};
}

inline StrategyKind parse_strategy_field(const Json& node, const std::string& field) {
    if (!node.is_string()) throw ConfigError(field, "expected a strategy name");
    try {
        return parse_strategy(node.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(field, e.what());
    }
}

} // namespace detail

/**
 * Builds a validated config from its JSON document. Missing fields take defaults; every
 * rejected value raises ConfigError naming the dotted field path.
 */
inline ExperimentConfig config_from_json(const Json& doc) {
    using detail::find;
    using detail::read;
    if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");

    ExperimentConfig c;
    c.name = read<std::string>(doc, "name", "", c.name);

    if (const Json* grid = find(doc, "grid")) {
        const std::string type = read<std::string>(*grid, "type", "grid", "synthetic");
        if (type == "synthetic") {
            c.grid_type = GridType::Synthetic;
            c.lattice.dim = read<int>(*grid, "dim", "grid", c.lattice.dim);
            c.lattice.min = read<double>(*grid, "min", "grid", c.lattice.min);
            c.lattice.max = read<double>(*grid, "max", "grid", c.lattice.max);
            c.lattice.levels = read<int>(*grid, "levels", "grid", c.lattice.levels);
            if (c.lattice.dim < 1) throw ConfigError("grid.dim", "must be >= 1");
            if (c.lattice.levels < 1) throw ConfigError("grid.levels", "must be >= 1");
            if (c.lattice.levels > 1 && !(c.lattice.max > c.lattice.min)) throw ConfigError("grid.max", "must exceed grid.min");
        } else if (type == "dataset") {
            c.grid_type = GridType::Dataset;
            c.dataset.path = read<std::string>(*grid, "path", "grid", "");
            c.dataset.target = read<std::string>(*grid, "target", "grid", "");
            if (c.dataset.path.empty()) throw ConfigError("grid.path", "dataset path is required");
            if (c.dataset.target.empty()) throw ConfigError("grid.target", "target column is required");
            if (const Json* feats = find(*grid, "features")) {
                if (!feats->is_array()) throw ConfigError("grid.features", "expected an array of column names");
                for (const auto& f : *feats) {
                    if (!f.is_string()) throw ConfigError("grid.features", "expected an array of column names");
                    c.dataset.features.push_back(f.get<std::string>());
                }
            }
            c.dataset.subsample = read<std::int64_t>(*grid, "subsample", "grid", 0);
            if (c.dataset.subsample < 0) throw ConfigError("grid.subsample", "must be >= 0");
            c.dataset.seed = read<std::uint64_t>(*grid, "seed", "grid", 0);
            const std::string delim = read<std::string>(*grid, "delimiter", "grid", ",");
            if (delim.size() != 1) throw ConfigError("grid.delimiter", "must be a single character");
            c.dataset.delimiter = delim[0];
        } else {
            throw ConfigError("grid.type", "must be 'synthetic' or 'dataset'");
        }
    }

    if (const Json* kernel = find(doc, "kernel")) c.kernel = detail::parse_kernel(*kernel, "kernel");
    c.noise_variance = read<double>(doc, "noise_variance", "", c.noise_variance);
    if (!(c.noise_variance > 0.0)) throw ConfigError("noise_variance", "must be positive");

    if (const Json* strategy = find(doc, "strategy")) {
        if (strategy->is_string()) {
            c.strategy.kind = detail::parse_strategy_field(*strategy, "strategy");
        } else if (strategy->is_object()) {
            const Json* kind = find(*strategy, "kind");
            if (!kind) throw ConfigError("strategy.kind", "missing");
            c.strategy.kind = detail::parse_strategy_field(*kind, "strategy.kind");
            const std::string rs = read<std::string>(*strategy, "rs_distribution", "strategy", "uniform");
            if (rs == "uniform") c.strategy.rs_distribution = RsDistribution::Uniform;
            else if (rs == "reference") c.strategy.rs_distribution = RsDistribution::Reference;
            else throw ConfigError("strategy.rs_distribution", "must be 'uniform' or 'reference'");
        } else {
            throw ConfigError("strategy", "expected a strategy name or object");
        }
    }
    if (const Json* epig = find(doc, "epig")) c.strategy.epig_literal = read<bool>(*epig, "literal_formula", "epig", false);

    if (const Json* amb = find(doc, "ambiguity")) {
        c.eta = read<double>(*amb, "eta", "ambiguity", c.eta);
        if (const Json* ref = find(*amb, "p_ref")) {
            if (ref->is_string() && ref->get<std::string>() == "uniform") {
                c.reference.kind = ReferenceKind::Uniform;
            } else if (const Json* g = find(*ref, "gaussian")) {
                c.reference.kind = ReferenceKind::Gaussian;
                c.reference.variance_scale = read<double>(*g, "variance_scale", "ambiguity.p_ref.gaussian", 0.2);
                if (!(c.reference.variance_scale > 0.0))
                    throw ConfigError("ambiguity.p_ref.gaussian.variance_scale", "must be positive");
            } else if (find(*ref, "uniform")) {
                c.reference.kind = ReferenceKind::Uniform;
            } else if (const Json* f = find(*ref, "file")) {
                if (!f->is_string()) throw ConfigError("ambiguity.p_ref.file", "expected a path");
                c.reference.kind = ReferenceKind::File;
                c.reference.path = f->get<std::string>();
            } else {
                throw ConfigError("ambiguity.p_ref", "expected {gaussian: {...}}, \"uniform\" or {file: path}");
            }
        }
    }
    if (!(c.eta >= 0.0)) throw ConfigError("ambiguity.eta", "must be >= 0");

    c.T = read<int>(doc, "T", "", c.T);
    if (c.T < 1) throw ConfigError("T", "must be >= 1");
    c.trials = read<int>(doc, "trials", "", c.trials);
    if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
    c.first_seed = read<std::uint64_t>(doc, "first_seed", "", c.first_seed);
    if (const Json* seeds = find(doc, "seeds")) {
        if (!seeds->is_array()) throw ConfigError("seeds", "expected an array of integers");
        for (const auto& s : *seeds) {
            if (!s.is_number_unsigned() && !s.is_number_integer()) throw ConfigError("seeds", "expected an array of integers");
            c.seeds.push_back(s.get<std::uint64_t>());
        }
        if (!c.seeds.empty()) c.trials = static_cast<int>(c.seeds.size());
    }
    c.refit_every = read<int>(doc, "refit_every", "", c.refit_every);
    if (c.refit_every < 0) throw ConfigError("refit_every", "must be >= 0");
    c.metric_every = read<int>(doc, "metric_every", "", c.grid_type == GridType::Dataset ? 5 : 1);
    if (c.metric_every < 1) throw ConfigError("metric_every", "must be >= 1");
    c.delta = read<double>(doc, "delta", "", c.delta);
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");

    if (const Json* sweep = find(doc, "sweep")) {
        if (const Json* etas = find(*sweep, "eta")) {
            if (!etas->is_array()) throw ConfigError("sweep.eta", "expected an array");
            for (const auto& e : *etas) {
                if (!e.is_number() || !(e.get<double>() >= 0.0)) throw ConfigError("sweep.eta", "entries must be numbers >= 0");
                c.sweep.eta.push_back(e.get<double>());
            }
        }
        if (const Json* strategies = find(*sweep, "strategy")) {
            if (!strategies->is_array()) throw ConfigError("sweep.strategy", "expected an array");
            for (const auto& s : *strategies) c.sweep.strategy.push_back(detail::parse_strategy_field(s, "sweep.strategy"));
        }
        if (const Json* kernels = find(*sweep, "kernel")) {
            if (!kernels->is_array()) throw ConfigError("sweep.kernel", "expected an array");
            for (const auto& k : *kernels) c.sweep.kernel.push_back(detail::parse_kernel(k, "sweep.kernel"));
        }
    }
    return c;
}

/// Resolved config as JSON; `config_from_json(config_to_json(c))` reproduces c.
inline Json config_to_json(const ExperimentConfig& c) {
    Json doc;
    doc["name"] = c.name;
    if (c.grid_type == GridType::Synthetic) {
        doc["grid"] = Json{{"type", "synthetic"},
                           {"dim", c.lattice.dim},
                           {"min", c.lattice.min},
                           {"max", c.lattice.max},
                           {"levels", c.lattice.levels}};
    } else {
        doc["grid"] = Json{{"type", "dataset"},
                           {"path", c.dataset.path},
                           {"target", c.dataset.target},
                           {"features", c.dataset.features},
                           {"subsample", c.dataset.subsample},
                           {"seed", c.dataset.seed},
                           {"delimiter", std::string(1, c.dataset.delimiter)}};
    }
    doc["kernel"] = detail::kernel_to_json(c.kernel);
    doc["noise_variance"] = c.noise_variance;
    doc["strategy"] = Json{{"kind", std::string(to_string(c.strategy.kind))},
                           {"rs_distribution", c.strategy.rs_distribution == RsDistribution::Uniform ? "uniform" : "reference"}};
    doc["epig"] = Json{{"literal_formula", c.strategy.epig_literal}};
    Json ref;
    switch (c.reference.kind) {
    case ReferenceKind::Gaussian: ref = Json{{"gaussian", {{"variance_scale", c.reference.variance_scale}}}}; break;
    case ReferenceKind::Uniform: ref = "uniform"; break;
    case ReferenceKind::File: ref = Json{{"file", c.reference.path}}; break;
    }
    doc["ambiguity"] = Json{{"eta", c.eta}, {"p_ref", ref}};
    doc["T"] = c.T;
    doc["trials"] = c.trials;
    doc["first_seed"] = c.first_seed;
    doc["seeds"] = c.seeds;
    doc["refit_every"] = c.refit_every;
    doc["metric_every"] = c.metric_every;
    doc["delta"] = c.delta;
    Json sweep = Json::object();
    if (!c.sweep.eta.empty()) sweep["eta"] = c.sweep.eta;
    if (!c.sweep.strategy.empty()) {
        Json names = Json::array();
        for (auto s : c.sweep.strategy) names.push_back(std::string(to_string(s)));
        sweep["strategy"] = names;
    }
    if (!c.sweep.kernel.empty()) {
        Json ks = Json::array();
        for (const auto& k : c.sweep.kernel) ks.push_back(detail::kernel_to_json(k));
        sweep["kernel"] = ks;
    }
    doc["sweep"] = sweep;
    return doc;
}

inline Json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot open config '" + path + "'");
    try {
        return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const Json::parse_error& e) {
        throw ConfigError("<file>", std::string("JSON parse error: ") + e.what());
    }
}

/**
 * Applies one `key=value` override to a raw config document. The key is a dotted path
 * ("ambiguity.eta"); the value is parsed as JSON when possible and taken as a string otherwise.
 */
inline void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component");
        if (dot == std::string::npos) {
            // `--set strategy.rs_distribution=...` on a string-valued strategy.
            if (!node->is_object()) *node = Json::object();
            (*node)[part] = value;
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) {
            if (part == "strategy" && node->contains(part) && (*node)[part].is_string())
                (*node)[part] = Json{{"kind", (*node)[part]}};
            else
                (*node)[part] = Json::object();
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

/// FNV-1a of the canonical (key-sorted) JSON dump; insensitive to field order in the source file.
inline std::uint64_t config_hash(const Json& doc) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : doc.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex_hash(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace dral
