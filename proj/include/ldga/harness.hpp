// Experiment driver: multi-seed trials, feature caching, kappa sweeps, the
// label-propagation baseline, and machine-readable reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ldga/embed.hpp"
#include "ldga/graph.hpp"
#include "ldga/metrics.hpp"
#include "ldga/objective.hpp"
#include "ldga/synth.hpp"

#include "json.hpp"

namespace ldga {

constexpr int kReportSchemaVersion = 1;

struct ExperimentConfig {
    // Graph source: a generator config, or edge-list files.
    std::optional<GeneratorConfig> generator;
    std::filesystem::path graph_path;
    EdgeListFormat graph_format = EdgeListFormat::PerLayerFiles;
    std::filesystem::path truth_path;     // optional ground-truth labels
    std::filesystem::path features_path;  // optional precomputed features

    WalkConfig walk;
    TrainConfig train;
    MetricConfig metric;

    std::uint32_t trials = 10;
    std::uint64_t master_seed = 1;
    std::uint32_t workers = 0;  // 0 = hardware concurrency
    std::filesystem::path output_dir;  // empty: keep everything in memory
    std::string name = "experiment";
};

struct TrialOutcome {
    std::uint32_t trial = 0;
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::string error;
    LossBreakdown final_loss;
    std::optional<double> nmi, ari, purity;
    double qm = 0.0;
    std::size_t nonempty_communities = 0;
    double wall_time_sec = 0.0;
    Labels labels;  // not serialized; kept so the best trial can be written
};

struct MetricAggregate {
    double best = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct TrialReport {
    std::string method = "ldga";
    nlohmann::json config_echo;
    std::vector<TrialOutcome> trials;
    std::map<std::string, MetricAggregate> aggregates;
    std::optional<std::uint32_t> best_trial;  // by multilayer modularity

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// Graph + truth + features resolved from the config, with feature tensors
// cached in <output_dir>/cache keyed by (graph content, walk config).
struct ExperimentData {
    MultilayerGraph graph;
    std::optional<GroundTruth> truth;
    FeatureTensor features;
};

ExperimentData prepare_data(const ExperimentConfig& config);

// Per trial: seed = mix(master_seed, trial); train, allocate, evaluate.
// Failures are recorded per trial and do not stop the experiment.
TrialReport run_experiment(const ExperimentConfig& config);

// Same trial/report machinery over the label-propagation baseline.
TrialReport run_baseline(const ExperimentConfig& config);

struct SweepCell {
    std::uint32_t kappa = 0;
    TrialReport report;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::string csv;  // kappa, best/mean/std Q_m, mean real kappa
};

// Runs run_experiment once per kappa value; each value must lie in [2, 64].
SweepResult sweep_kappa(const ExperimentConfig& config,
                        const std::vector<std::uint32_t>& kappas);

// Removes the wall-time fields, the only report content that may differ
// between reruns with the same master seed.
nlohmann::json strip_wall_times(nlohmann::json report);

// Recomputes best/mean/std from the per-trial rows; true when they match the
// stored aggregates within 1e-9.
bool aggregates_consistent(const TrialReport& report);

// desk: dim 64, ffn 128, 300 epochs; paper: dim 512, ffn 1024, 300 epochs.
void apply_profile(ExperimentConfig& config, const std::string& profile);

}  // namespace ldga
