#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cmcprobe/metric_models.hpp"

namespace cmcprobe {

struct MetricConfig {
    std::string kind = "schwarzschild";
    double mass = 1.0;
    double cutoff = 2.0;
    std::map<int, PerturbationTerm> terms;      // metric.term.N
    std::map<int, ConformalTerm> conformal_terms;  // metric.conformal.N
};

struct GridConfig {
    int L = 24;
    int n_theta = 32;
    int n_phi = 64;
};

struct SolverConfig {
    double tolerance = 1e-9;
    int max_iterations = 60;
};

struct VerifyConfig {
    int corpus_size = 100;
    double max_norm = 0.1;
};

struct FoliateConfig {
    double H_start = 0.2;
    double H_end = 0.01;
    int leaves = 16;
};

struct ScanConfig {
    std::vector<double> lambdas{4.0, 8.0, 16.0, 32.0};
    std::vector<double> xi_norms{2.0};
    Vec3 xi_direction = Vec3::UnitX();
    bool solve = false;
    double tau = 2.5;
    double delta = 0.1;
};

struct ExpandConfig {
    std::vector<std::pair<int, int>> modes{{2, 0}, {3, 0}, {4, 2}};
    std::vector<double> epsilons{1e-3, 1.778279410038923e-3, 3.1622776601683794e-3, 5.623413251903491e-3, 1e-2,
                                 1.778279410038923e-2, 3.1622776601683794e-2, 5.623413251903491e-2, 1e-1};
};

struct ExperimentConfig {
    MetricConfig metric;
    GridConfig grid;
    SolverConfig solver;
    VerifyConfig verify;
    FoliateConfig foliate;
    ScanConfig scan;
    ExpandConfig expand;
    int workers = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "cmcprobe-out";
};

// Applies one `key = value` assignment; keys are case-insensitive dotted paths.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
// Parses a flat key-value file (blank lines and `#` comments ignored) on top of `config`.
void parse_config_text(ExperimentConfig& config, const std::string& text);
ExperimentConfig load_config(const std::string& path);
// CMCPROBE_SECTION__KEY=value overrides; a double underscore separates path components.
void apply_environment(ExperimentConfig& config, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_environment();

// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);
MetricModel build_model(const ExperimentConfig& config);

// Exit statuses of the harness commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitAnomaly = 1;
inline constexpr int kExitUsage = 2;

int cmd_verify(const ExperimentConfig& config);
int cmd_foliate(const ExperimentConfig& config);
int cmd_scan(const ExperimentConfig& config);
int cmd_expand(const ExperimentConfig& config);

// Runs fn(i) for i in [0, n) on `workers` threads; results are returned in index order.
template <class R>
std::vector<R> run_indexed(int n, int workers, const std::function<R(int)>& fn) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto loop = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int k = std::max(1, std::min(workers, n));
    std::vector<std::thread> pool;
    for (int t = 1; t < k; ++t) pool.emplace_back(loop);
    loop();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace cmcprobe
