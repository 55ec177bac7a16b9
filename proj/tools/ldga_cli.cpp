// Command-line driver: generate / embed / train / eval / sweep-kappa /
// baseline / report subcommands over the ldga library.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldga/embed.hpp"
#include "ldga/graph.hpp"
#include "ldga/harness.hpp"
#include "ldga/metrics.hpp"
#include "ldga/serialize.hpp"
#include "ldga/synth.hpp"

namespace {

using namespace ldga;

struct GraphFlags {
    std::string path;
    std::string format = "dir";
    bool synth = false;
    GeneratorConfig gen;

    void add_to(CLI::App* cmd, bool with_generator) {
        cmd->add_option("--graph", path, "edge-list file or directory of *.edges files");
        cmd->add_option("--format", format, "graph format: single or dir")
            ->check(CLI::IsMember({"single", "dir"}));
        if (with_generator) {
            cmd->add_flag("--synth", synth, "generate the graph instead of loading one");
            add_generator_options(cmd, gen);
        }
    }

    static void add_generator_options(CLI::App* cmd, GeneratorConfig& g) {
        cmd->add_option("--nodes", g.num_nodes, "generator: number of nodes");
        cmd->add_option("--layers", g.num_layers, "generator: number of layers");
        cmd->add_option("--mu", g.mu, "generator: mixing parameter");
        cmd->add_option("--avg-degree", g.avg_degree, "generator: average degree");
        cmd->add_option("--max-degree", g.max_degree, "generator: maximum degree");
        cmd->add_option("--degree-exponent", g.degree_exponent, "generator: degree power law");
        cmd->add_option("--community-exponent", g.community_exponent,
                        "generator: community-size power law");
        cmd->add_option("--communities", g.num_communities,
                        "generator: community count (0 = auto)");
        cmd->add_option("--size-ratio", g.community_size_ratio,
                        "generator: max/min community size ratio");
        cmd->add_option("--gen-seed", g.seed, "generator: seed");
    }

    EdgeListFormat edge_format() const {
        return format == "single" ? EdgeListFormat::SingleFile : EdgeListFormat::PerLayerFiles;
    }

    MultilayerGraph load(LoadSummary* summary = nullptr) const {
        if (path.empty()) throw CLI::ValidationError("--graph is required here");
        return load_multilayer_edgelist(path, edge_format(), summary);
    }
};

void add_walk_options(CLI::App* cmd, WalkConfig& walk) {
    cmd->add_option("--dim", walk.dim, "feature dimension");
    cmd->add_option("--window", walk.window, "skip-gram window");
    cmd->add_option("--walks", walk.walks_per_node, "walks per node");
    cmd->add_option("--walk-length", walk.walk_length, "walk length");
    cmd->add_option("--negatives", walk.negatives, "negative samples");
    cmd->add_option("--sgns-epochs", walk.epochs, "skip-gram epochs");
    cmd->add_option("--sgns-lr", walk.learning_rate, "skip-gram learning rate");
    cmd->add_option("--embed-seed", walk.seed, "embedding seed");
}

LossMode parse_mode(const std::string& mode) {
    if (mode == "per-layer") return LossMode::PerLayer;
    if (mode == "pooled") return LossMode::Pooled;
    throw CLI::ValidationError("--mode must be per-layer or pooled");
}

// Experiment flags shared by train / sweep-kappa / baseline.
struct ExperimentFlags {
    GraphFlags graph;
    std::string truth, features, out = "ldga_out", name = "experiment";
    std::string profile = "desk";
    std::string mode = "per-layer";
    ExperimentConfig config;
    CLI::Option* dim_opt = nullptr;
    CLI::Option* ffn_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;

    void add_to(CLI::App* cmd) {
        graph.add_to(cmd, true);
        cmd->add_option("--truth", truth, "ground-truth labels file");
        cmd->add_option("--features", features, "precomputed feature tensor (.bin)");
        add_walk_options(cmd, config.walk);
        dim_opt = cmd->get_option("--dim");
        cmd->add_option("--profile", profile, "desk or paper preset")
            ->check(CLI::IsMember({"desk", "paper"}));
        epochs_opt = cmd->add_option("--epochs", config.train.epochs, "training epochs");
        cmd->add_option("--lr", config.train.learning_rate, "AdamW learning rate");
        cmd->add_option("--weight-decay", config.train.weight_decay, "AdamW weight decay");
        cmd->add_option("--kappa", config.train.kappa, "maximum number of communities");
        cmd->add_option("--alpha", config.train.alpha, "balance regularizer weight");
        cmd->add_option("--gamma", config.train.gamma, "modularity resolution");
        cmd->add_option("--mode", mode, "loss mode: per-layer or pooled")
            ->check(CLI::IsMember({"per-layer", "pooled"}));
        ffn_opt = cmd->add_option("--ffn-dim", config.train.ffn_dim, "scorer hidden width");
        cmd->add_option("--trials", config.trials, "number of trials");
        cmd->add_option("--seed", config.master_seed, "master seed");
        cmd->add_option("--workers", config.workers, "concurrent trials (0 = auto)");
        cmd->add_option("--resolution", config.metric.resolution, "Q_m resolution");
        cmd->add_option("--coupling", config.metric.coupling, "Q_m coupling");
        cmd->add_option("-o,--out", out, "output directory");
        cmd->add_option("--tag", name, "report name stem");
    }

    ExperimentConfig resolve() {
        // The profile sets dim/ffn/epochs; explicit flags win.
        const auto dim = config.walk.dim;
        const auto ffn = config.train.ffn_dim;
        const auto epochs = config.train.epochs;
        apply_profile(config, profile);
        if (dim_opt && dim_opt->count() > 0) config.walk.dim = dim;
        if (ffn_opt && ffn_opt->count() > 0) config.train.ffn_dim = ffn;
        if (epochs_opt && epochs_opt->count() > 0) config.train.epochs = epochs;

        config.train.mode = parse_mode(mode);
        if (graph.synth)
            config.generator = graph.gen;
        else {
            config.graph_path = graph.path;
            config.graph_format = graph.edge_format();
            if (!truth.empty()) config.truth_path = truth;
        }
        if (!features.empty()) config.features_path = features;
        config.output_dir = out;
        config.name = name;
        return config;
    }
};

void print_aggregates(const TrialReport& report) {
    std::cout << "method: " << report.method << "\n";
    for (const auto& [key, agg] : report.aggregates) {
        std::cout << "  " << key << ": best " << agg.best << "  mean " << agg.mean << "  std "
                  << agg.stddev << "\n";
    }
}

int cmd_generate(const GeneratorConfig& gen, const std::string& out_dir) {
    const auto [graph, truth] = generate(gen);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    for (std::size_t s = 0; s < graph.num_layers(); ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "layer_%02zu.edges", s);
        std::ofstream out(dir / name);
        for (auto [u, v] : graph.layers[s].edges) out << u << " " << v << "\n";
    }
    write_labels(dir / "labels.txt", truth.labels);

    const auto mixing = mixing_fraction(graph, truth);
    nlohmann::json manifest;
    manifest["num_nodes"] = graph.num_nodes;
    manifest["num_layers"] = graph.num_layers();
    manifest["num_communities"] = truth.num_communities;
    manifest["seed"] = gen.seed;
    manifest["mu"] = gen.mu;
    std::vector<std::size_t> edges;
    double degree_sum = 0.0;
    for (const auto& layer : graph.layers) {
        edges.push_back(layer.edge_count);
        degree_sum += 2.0 * static_cast<double>(layer.edge_count);
    }
    manifest["layer_edges"] = edges;
    manifest["mean_degree"] =
        degree_sum / static_cast<double>(graph.num_nodes * graph.num_layers());
    manifest["mixing_fraction"] = mixing;
    std::vector<std::size_t> sizes(truth.num_communities, 0);
    for (auto l : truth.labels) ++sizes[l];
    manifest["community_sizes"] = sizes;
    write_json(dir / "manifest.json", manifest);
    std::cout << manifest.dump(2) << "\n";
    return 0;
}

int cmd_embed(const GraphFlags& graph_flags, const WalkConfig& walk, const std::string& out) {
    const MultilayerGraph graph = graph_flags.load();
    const FeatureTensor features = init_features(graph, walk);
    nlohmann::json sidecar;
    sidecar["graph_hash"] = graph_content_hash(graph);
    sidecar["seed"] = walk.seed;
    save_feature_tensor(out, features, sidecar);
    std::cout << "wrote " << out << " (" << features.num_layers() << " x "
              << features.num_nodes() << " x " << features.dim() << ")\n";
    return 0;
}

int cmd_eval(const GraphFlags& graph_flags, const std::string& labels_path,
             const std::string& truth_path, const MetricConfig& metric) {
    LoadSummary summary;
    const MultilayerGraph graph = graph_flags.load(&summary);
    const Labels labels = read_labels(labels_path, graph);
    nlohmann::json record;
    if (!truth_path.empty()) {
        const Labels truth = read_labels(truth_path, graph);
        record["nmi"] = nmi(labels, truth);
        record["ari"] = ari(labels, truth);
        record["purity"] = purity(labels, truth);
    }
    const double qm = multilayer_modularity(graph, labels, metric);
    record["qm"] = qm;
    record["qm_percent"] = 100.0 * qm;
    std::uint32_t max_label = 0;
    for (auto l : labels) max_label = std::max(max_label, l);
    ConsensusPartition partition;
    partition.labels = labels;
    record["nonempty_communities"] = count_nonempty(partition, max_label + 1);
    record["graph"] = {{"num_nodes", summary.num_nodes},
                       {"num_layers", summary.num_layers},
                       {"layer_edges", summary.layer_edge_counts},
                       {"self_loops_dropped", summary.self_loops_dropped},
                       {"duplicate_edges_removed", summary.duplicate_edges_removed}};
    std::cout << record.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::string& input) {
    const nlohmann::json report = read_json(input);
    std::cout << "method: " << report.value("method", "?") << "\n";
    std::cout << "trials:\n";
    std::cout << "  trial seed status qm nmi ari purity real_kappa\n";
    for (const auto& t : report.at("trials")) {
        std::cout << "  " << t.value("trial", 0) << " " << t.value("seed", 0ull) << " "
                  << t.value("status", "?");
        if (t.value("status", "") == "ok") {
            std::cout << " " << t.value("qm", 0.0) << " "
                      << (t.contains("nmi") ? std::to_string(t["nmi"].get<double>()) : "-")
                      << " "
                      << (t.contains("ari") ? std::to_string(t["ari"].get<double>()) : "-")
                      << " "
                      << (t.contains("purity") ? std::to_string(t["purity"].get<double>()) : "-")
                      << " " << t.value("nonempty_communities", 0);
        }
        std::cout << "\n";
    }
    std::cout << "aggregates:\n";
    for (const auto& [key, agg] : report.at("aggregate").items()) {
        std::cout << "  " << key << ": best " << agg.value("best", 0.0) << "  mean "
                  << agg.value("mean", 0.0) << "  std " << agg.value("std", 0.0) << "\n";
    }

    // Self-check: recompute the aggregates from the per-trial rows.
    TrialReport check;
    for (const auto& t : report.at("trials")) {
        TrialOutcome o;
        o.trial = t.value("trial", 0u);
        o.status = t.value("status", "ok");
        if (o.status == "ok") {
            o.qm = t.value("qm", 0.0);
            if (t.contains("nmi")) o.nmi = t["nmi"].get<double>();
            if (t.contains("ari")) o.ari = t["ari"].get<double>();
            if (t.contains("purity")) o.purity = t["purity"].get<double>();
            o.nonempty_communities = t.value("nonempty_communities", 0u);
        }
        check.trials.push_back(std::move(o));
    }
    for (const auto& [key, agg] : report.at("aggregate").items())
        check.aggregates[key] = {agg.value("best", 0.0), agg.value("mean", 0.0),
                                 agg.value("std", 0.0)};
    if (!aggregates_consistent(check)) {
        std::cerr << "error: stored aggregates do not match the per-trial rows\n";
        return 1;
    }
    std::cout << "aggregates consistent with per-trial rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LDGA: community detection in multilayer networks"};
    app.set_config("--config", "", "key=value config file; flags override it");
    app.require_subcommand(1);

    // generate
    auto* generate_cmd = app.add_subcommand("generate", "write a synthetic benchmark");
    GeneratorConfig gen;
    std::string gen_out = "synth_out";
    GraphFlags::add_generator_options(generate_cmd, gen);
    generate_cmd->add_option("--seed", gen.seed, "generator seed");
    generate_cmd->add_option("-o,--out", gen_out, "output directory")->required();

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "compute per-layer features");
    GraphFlags embed_graph;
    embed_graph.add_to(embed_cmd, false);
    WalkConfig embed_walk;
    add_walk_options(embed_cmd, embed_walk);
    embed_cmd->add_option("--seed", embed_walk.seed, "embedding seed");
    std::string embed_out = "features.bin";
    embed_cmd->add_option("-o,--out", embed_out, "output feature file");

    // train
    auto* train_cmd = app.add_subcommand("train", "run multi-trial training + evaluation");
    ExperimentFlags train_flags;
    train_flags.add_to(train_cmd);

    // sweep-kappa
    auto* sweep_cmd = app.add_subcommand("sweep-kappa", "run experiments over a kappa range");
    ExperimentFlags sweep_flags;
    sweep_flags.add_to(sweep_cmd);
    std::uint32_t kappa_min = 2, kappa_max = 10, kappa_step = 1;
    sweep_cmd->add_option("--kappa-min", kappa_min, "first kappa");
    sweep_cmd->add_option("--kappa-max", kappa_max, "last kappa");
    sweep_cmd->add_option("--kappa-step", kappa_step, "kappa increment");

    // baseline
    auto* baseline_cmd = app.add_subcommand("baseline", "flatten + label propagation");
    ExperimentFlags baseline_flags;
    baseline_flags.add_to(baseline_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a labels file against a graph");
    GraphFlags eval_graph;
    eval_graph.add_to(eval_cmd, false);
    std::string eval_labels, eval_truth;
    MetricConfig eval_metric;
    eval_cmd->add_option("--labels", eval_labels, "labels file to evaluate")->required();
    eval_cmd->add_option("--truth", eval_truth, "ground-truth labels file");
    eval_cmd->add_option("--resolution", eval_metric.resolution, "Q_m resolution");
    eval_cmd->add_option("--coupling", eval_metric.coupling, "Q_m coupling");

    // report
    auto* report_cmd = app.add_subcommand("report", "render and self-check a report JSON");
    std::string report_input;
    report_cmd->add_option("-i,--input", report_input, "report JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate_cmd->parsed()) return cmd_generate(gen, gen_out);
        if (embed_cmd->parsed()) return cmd_embed(embed_graph, embed_walk, embed_out);
        if (train_cmd->parsed()) {
            const TrialReport report = run_experiment(train_flags.resolve());
            print_aggregates(report);
            return 0;
        }
        if (sweep_cmd->parsed()) {
            if (kappa_step == 0 || kappa_max < kappa_min)
                throw std::invalid_argument("invalid kappa range");
            std::vector<std::uint32_t> kappas;
            for (std::uint32_t k = kappa_min; k <= kappa_max; k += kappa_step)
                kappas.push_back(k);
            const SweepResult sweep = sweep_kappa(sweep_flags.resolve(), kappas);
            std::cout << sweep.csv;
            return 0;
        }
        if (baseline_cmd->parsed()) {
            const TrialReport report = run_baseline(baseline_flags.resolve());
            print_aggregates(report);
            return 0;
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_graph, eval_labels, eval_truth, eval_metric);
        if (report_cmd->parsed()) return cmd_report(report_input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
