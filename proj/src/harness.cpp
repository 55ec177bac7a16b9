#include "ldga/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ldga/rng.hpp"
#include "ldga/serialize.hpp"

namespace ldga {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t feature_cache_key(const MultilayerGraph& graph, const WalkConfig& walk) {
    std::uint64_t h = graph_content_hash(graph);
    h = fnv1a64(&walk.window, sizeof(walk.window), h);
    h = fnv1a64(&walk.walks_per_node, sizeof(walk.walks_per_node), h);
    h = fnv1a64(&walk.walk_length, sizeof(walk.walk_length), h);
    h = fnv1a64(&walk.dim, sizeof(walk.dim), h);
    h = fnv1a64(&walk.negatives, sizeof(walk.negatives), h);
    h = fnv1a64(&walk.epochs, sizeof(walk.epochs), h);
    h = fnv1a64(&walk.learning_rate, sizeof(walk.learning_rate), h);
    h = fnv1a64(&walk.seed, sizeof(walk.seed), h);
    return h;
}

std::string hex64(std::uint64_t value) {
    std::ostringstream oss;
    oss << std::hex << std::setfill('0') << std::setw(16) << value;
    return oss.str();
}

nlohmann::json walk_json(const WalkConfig& w) {
    return {{"window", w.window},       {"walks_per_node", w.walks_per_node},
            {"walk_length", w.walk_length}, {"dim", w.dim},
            {"negatives", w.negatives}, {"epochs", w.epochs},
            {"learning_rate", w.learning_rate}, {"seed", w.seed}};
}

nlohmann::json train_json(const TrainConfig& t) {
    return {{"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"epsilon", t.epsilon},
            {"seed", t.seed},
            {"kappa", t.kappa},
            {"alpha", t.alpha},
            {"gamma", t.gamma},
            {"mode", t.mode == LossMode::PerLayer ? "per-layer" : "pooled"},
            {"ffn_dim", t.ffn_dim}};
}

nlohmann::json config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["trials"] = c.trials;
    j["master_seed"] = c.master_seed;
    if (c.generator) {
        const auto& g = *c.generator;
        j["generator"] = {{"num_nodes", g.num_nodes},
                          {"num_layers", g.num_layers},
                          {"mu", g.mu},
                          {"avg_degree", g.avg_degree},
                          {"max_degree", g.max_degree},
                          {"degree_exponent", g.degree_exponent},
                          {"community_exponent", g.community_exponent},
                          {"num_communities", g.num_communities},
                          {"community_size_ratio", g.community_size_ratio},
                          {"seed", g.seed}};
    } else {
        j["graph_path"] = c.graph_path.string();
        j["graph_format"] =
            c.graph_format == EdgeListFormat::SingleFile ? "single-file" : "per-layer-files";
        if (!c.truth_path.empty()) j["truth_path"] = c.truth_path.string();
    }
    if (!c.features_path.empty()) j["features_path"] = c.features_path.string();
    j["walk"] = walk_json(c.walk);
    j["train"] = train_json(c.train);
    j["metric"] = {{"resolution", c.metric.resolution}, {"coupling", c.metric.coupling}};
    return j;
}

nlohmann::json loss_json(const LossBreakdown& l) {
    return {{"modularity_term", l.modularity_term},
            {"balance_term", l.balance_term},
            {"total", l.total},
            {"theta", l.theta}};
}

void append_metric(std::map<std::string, MetricAggregate>& out, const std::string& key,
                   const std::vector<double>& values) {
    if (values.empty()) return;
    MetricAggregate agg;
    agg.best = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    agg.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - agg.mean) * (v - agg.mean);
    agg.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    out[key] = agg;
}

void finalize_report(TrialReport& report) {
    std::vector<double> nmis, aris, purities, qms, kappas;
    std::optional<std::uint32_t> best;
    double best_qm = -std::numeric_limits<double>::infinity();
    for (const auto& t : report.trials) {
        if (t.status != "ok") continue;
        if (t.nmi) nmis.push_back(*t.nmi);
        if (t.ari) aris.push_back(*t.ari);
        if (t.purity) purities.push_back(*t.purity);
        qms.push_back(t.qm);
        kappas.push_back(static_cast<double>(t.nonempty_communities));
        if (t.qm > best_qm) {
            best_qm = t.qm;
            best = t.trial;
        }
    }
    append_metric(report.aggregates, "nmi", nmis);
    append_metric(report.aggregates, "ari", aris);
    append_metric(report.aggregates, "purity", purities);
    append_metric(report.aggregates, "qm", qms);
    append_metric(report.aggregates, "real_kappa", kappas);
    report.best_trial = best;
}

void write_report_files(const TrialReport& report, const ExperimentConfig& config,
                        const std::string& stem) {
    if (config.output_dir.empty()) return;
    std::filesystem::create_directories(config.output_dir);
    write_json(config.output_dir / (stem + "_report.json"), report.to_json());
    std::ofstream csv(config.output_dir / (stem + "_trials.csv"));
    csv << report.to_csv();
    if (report.best_trial) {
        for (const auto& t : report.trials) {
            if (t.trial == *report.best_trial) {
                write_labels(config.output_dir / (stem + "_labels_best.txt"), t.labels);
                break;
            }
        }
    }
}

// Runs fn(trial_index) for every trial on a small worker pool; outcomes land
// in preassigned slots so scheduling cannot affect the report.
template <typename Fn>
void for_each_trial(std::uint32_t trials, std::uint32_t workers, Fn&& fn) {
    const std::uint32_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::uint32_t count = std::min(trials, workers == 0 ? hw : workers);
    if (count <= 1) {
        for (std::uint32_t t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::atomic<std::uint32_t> next{0};
    std::vector<std::thread> pool;
    for (std::uint32_t w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::uint32_t t = next.fetch_add(1);
                if (t >= trials) break;
                fn(t);
            }
        });
    }
    for (auto& th : pool) th.join();
}

void evaluate_partition(TrialOutcome& outcome, const ExperimentData& data,
                        const ExperimentConfig& config, const ConsensusPartition& partition,
                        std::uint32_t kappa) {
    outcome.qm = multilayer_modularity(data.graph, partition.labels, config.metric);
    outcome.nonempty_communities = count_nonempty(partition, kappa);
    outcome.labels = partition.labels;
    if (data.truth) {
        outcome.nmi = nmi(partition.labels, data.truth->labels);
        outcome.ari = ari(partition.labels, data.truth->labels);
        outcome.purity = purity(partition.labels, data.truth->labels);
    }
}

}  // namespace

nlohmann::json TrialReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["method"] = method;
    j["config"] = config_echo;
    j["trials"] = nlohmann::json::array();
    for (const auto& t : trials) {
        nlohmann::json tj;
        tj["trial"] = t.trial;
        tj["seed"] = t.seed;
        tj["status"] = t.status;
        if (!t.error.empty()) tj["error"] = t.error;
        if (t.status == "ok") {
            tj["loss"] = loss_json(t.final_loss);
            tj["qm"] = t.qm;
            tj["qm_percent"] = 100.0 * t.qm;
            if (t.nmi) tj["nmi"] = *t.nmi;
            if (t.ari) tj["ari"] = *t.ari;
            if (t.purity) tj["purity"] = *t.purity;
            if (t.nmi) tj["nmi_percent"] = 100.0 * *t.nmi;
            if (t.ari) tj["ari_percent"] = 100.0 * *t.ari;
            if (t.purity) tj["purity_percent"] = 100.0 * *t.purity;
            tj["nonempty_communities"] = t.nonempty_communities;
        }
        tj["wall_time_sec"] = t.wall_time_sec;
        j["trials"].push_back(tj);
    }
    j["aggregate"] = nlohmann::json::object();
    for (const auto& [key, agg] : aggregates) {
        j["aggregate"][key] = {{"best", agg.best}, {"mean", agg.mean}, {"std", agg.stddev}};
    }
    if (best_trial) j["best_trial"] = *best_trial;
    return j;
}

std::string TrialReport::to_csv() const {
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "trial,seed,status,nmi,ari,purity,qm,qm_percent,real_kappa,"
           "loss_total,loss_modularity,loss_balance,wall_time_sec\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) csv << *v;
        csv << ",";
    };
    for (const auto& t : trials) {
        csv << t.trial << "," << t.seed << "," << t.status << ",";
        if (t.status == "ok") {
            cell(t.nmi);
            cell(t.ari);
            cell(t.purity);
            csv << t.qm << "," << 100.0 * t.qm << "," << t.nonempty_communities << ","
                << t.final_loss.total << "," << t.final_loss.modularity_term << ","
                << t.final_loss.balance_term << ",";
        } else {
            csv << ",,,,,,,,,";
        }
        csv << t.wall_time_sec << "\n";
    }
    return csv.str();
}

ExperimentData prepare_data(const ExperimentConfig& config) {
    ExperimentData data;
    if (config.generator) {
        auto [graph, truth] = generate(*config.generator);
        data.graph = std::move(graph);
        data.truth = std::move(truth);
    } else {
        if (config.graph_path.empty())
            throw std::invalid_argument("experiment: no graph source configured");
        data.graph = load_multilayer_edgelist(config.graph_path, config.graph_format);
        if (!config.truth_path.empty()) {
            GroundTruth truth;
            truth.labels = read_labels(config.truth_path, data.graph);
            truth.num_communities =
                truth.labels.empty()
                    ? 0
                    : *std::max_element(truth.labels.begin(), truth.labels.end()) + 1;
            data.truth = std::move(truth);
        }
    }

    if (!config.features_path.empty()) {
        data.features = load_feature_tensor(config.features_path);
    } else {
        std::filesystem::path cache_file;
        if (!config.output_dir.empty()) {
            const auto key = feature_cache_key(data.graph, config.walk);
            cache_file = config.output_dir / "cache" / ("features_" + hex64(key) + ".bin");
            if (std::filesystem::exists(cache_file)) {
                data.features = load_feature_tensor(cache_file);
            }
        }
        if (data.features.layers.empty()) {
            data.features = init_features(data.graph, config.walk);
            if (!cache_file.empty()) {
                std::filesystem::create_directories(cache_file.parent_path());
                save_feature_tensor(cache_file, data.features, {{"walk", walk_json(config.walk)}});
            }
        }
    }
    if (data.features.num_layers() != data.graph.num_layers() ||
        data.features.num_nodes() != data.graph.num_nodes)
        throw std::runtime_error("experiment: feature tensor does not match the graph");
    return data;
}

TrialReport run_experiment(const ExperimentConfig& config) {
    if (config.trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
    const ExperimentData data = prepare_data(config);

    TrialReport report;
    report.method = "ldga";
    report.config_echo = config_json(config);
    report.trials.resize(config.trials);

    for_each_trial(config.trials, config.workers, [&](std::uint32_t t) {
        TrialOutcome& outcome = report.trials[t];
        outcome.trial = t;
        outcome.seed = mix64(config.master_seed, t);
        const auto start = Clock::now();
        try {
            TrainConfig tc = config.train;
            tc.seed = outcome.seed;
            const TrainResult trained = train(data.graph, data.features, tc);
            if (trained.aborted_on_nan)
                throw std::runtime_error("training aborted on non-finite loss");
            outcome.final_loss =
                loss_soft(trained.assignments, data.graph, loss_config_of(tc));
            evaluate_partition(outcome, data, config, global_allocate(trained.assignments),
                               tc.kappa);
        } catch (const std::exception& e) {
            outcome.status = "error";
            outcome.error = e.what();
        }
        outcome.wall_time_sec = seconds_since(start);
    });

    finalize_report(report);
    write_report_files(report, config, config.name);
    return report;
}

TrialReport run_baseline(const ExperimentConfig& config) {
    if (config.trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
    ExperimentConfig cfg = config;
    cfg.features_path.clear();  // the baseline never needs features
    ExperimentData data;
    if (cfg.generator) {
        auto [graph, truth] = generate(*cfg.generator);
        data.graph = std::move(graph);
        data.truth = std::move(truth);
    } else {
        data.graph = load_multilayer_edgelist(cfg.graph_path, cfg.graph_format);
        if (!cfg.truth_path.empty()) {
            GroundTruth truth;
            truth.labels = read_labels(cfg.truth_path, data.graph);
            truth.num_communities =
                *std::max_element(truth.labels.begin(), truth.labels.end()) + 1;
            data.truth = std::move(truth);
        }
    }

    TrialReport report;
    report.method = "label_propagation";
    report.config_echo = config_json(config);
    report.trials.resize(config.trials);

    for_each_trial(config.trials, config.workers, [&](std::uint32_t t) {
        TrialOutcome& outcome = report.trials[t];
        outcome.trial = t;
        outcome.seed = mix64(config.master_seed, t);
        const auto start = Clock::now();
        try {
            const ConsensusPartition partition =
                label_propagation_baseline(data.graph, outcome.seed);
            const auto kappa = static_cast<std::uint32_t>(
                *std::max_element(partition.labels.begin(), partition.labels.end()) + 1);
            evaluate_partition(outcome, data, config, partition, kappa);
        } catch (const std::exception& e) {
            outcome.status = "error";
            outcome.error = e.what();
        }
        outcome.wall_time_sec = seconds_since(start);
    });

    finalize_report(report);
    write_report_files(report, config, config.name + "_baseline");
    return report;
}

SweepResult sweep_kappa(const ExperimentConfig& config,
                        const std::vector<std::uint32_t>& kappas) {
    if (kappas.empty()) throw std::invalid_argument("sweep_kappa: empty range");
    for (std::uint32_t k : kappas)
        if (k < 2 || k > 64)
            throw std::invalid_argument("sweep_kappa: kappa must lie in [2, 64]");

    SweepResult result;
    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "kappa,qm_best,qm_mean,qm_std,real_kappa_mean\n";
    for (std::uint32_t k : kappas) {
        ExperimentConfig cell_config = config;
        cell_config.train.kappa = k;
        cell_config.name = config.name + "_kappa" + std::to_string(k);
        SweepCell cell;
        cell.kappa = k;
        cell.report = run_experiment(cell_config);
        const auto qm = cell.report.aggregates.find("qm");
        const auto rk = cell.report.aggregates.find("real_kappa");
        csv << k << ",";
        if (qm != cell.report.aggregates.end())
            csv << qm->second.best << "," << qm->second.mean << "," << qm->second.stddev;
        else
            csv << ",,";
        csv << ",";
        if (rk != cell.report.aggregates.end()) csv << rk->second.mean;
        csv << "\n";
        result.cells.push_back(std::move(cell));
    }
    result.csv = csv.str();
    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        std::ofstream out(config.output_dir / (config.name + "_sweep.csv"));
        out << result.csv;
    }
    return result;
}

nlohmann::json strip_wall_times(nlohmann::json report) {
    if (report.contains("trials")) {
        for (auto& t : report["trials"]) t.erase("wall_time_sec");
    }
    report.erase("wall_time_total_sec");
    return report;
}

bool aggregates_consistent(const TrialReport& report) {
    TrialReport recomputed;
    recomputed.trials = report.trials;
    finalize_report(recomputed);
    if (recomputed.aggregates.size() != report.aggregates.size()) return false;
    for (const auto& [key, agg] : report.aggregates) {
        const auto it = recomputed.aggregates.find(key);
        if (it == recomputed.aggregates.end()) return false;
        if (std::abs(it->second.best - agg.best) > 1e-9 ||
            std::abs(it->second.mean - agg.mean) > 1e-9 ||
            std::abs(it->second.stddev - agg.stddev) > 1e-9)
            return false;
    }
    return true;
}

void apply_profile(ExperimentConfig& config, const std::string& profile) {
    if (profile == "desk") {
        config.walk.dim = 64;
        config.train.ffn_dim = 128;
        config.train.epochs = 300;
    } else if (profile == "paper") {
        config.walk.dim = 512;
        config.train.ffn_dim = 1024;
        config.train.epochs = 300;
    } else {
        throw std::invalid_argument("unknown profile '" + profile + "' (use desk or paper)");
    }
}

}  // namespace ldga
