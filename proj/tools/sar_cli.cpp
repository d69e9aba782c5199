// Experiment front-end: generate datasets, run single trainings, sweep
// seed x mode comparisons and inspect anchor geometry. All outputs are
// deterministic functions of the configuration.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sar/anchors.hpp"
#include "sar/errors.hpp"
#include "sar/experiment.hpp"
#include "sar/serialize.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets; // key=value overrides
    std::map<std::string, std::string> flags; // --<key> <value> overrides
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--set", opts.sets, "override a config key, e.g. --set lambda2=0.05")
        ->take_all();
    // every config key doubles as a flag: --lambda2 0.05
    for (const auto& key : sar::ExperimentConfig::keys())
        cmd->add_option_function<std::string>(
            "--" + key, [&opts, key](const std::string& v) { opts.flags[key] = v; });
}

sar::ExperimentConfig resolve_config(const CommonOpts& opts) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& [key, value] : opts.flags) overrides.emplace_back(key, value);
    for (const auto& kv : opts.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw sar::InputError("--set expects key=value, got '" + kv + "'");
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return sar::load_config(opts.config_path, overrides);
}

int cmd_gen_data(const CommonOpts& opts, const std::string& out_dir) {
    auto cfg = resolve_config(opts);
    fs::create_directories(out_dir);

    auto counts = sar::class_counts(cfg.classes, cfg.n_max, cfg.beta);
    auto [train, test] = sar::make_train_test(cfg.gmm_spec(), cfg.test_per_class);
    sar::save_csv(train, (fs::path(out_dir) / "train.csv").string());
    sar::save_csv(test, (fs::path(out_dir) / "test.csv").string());
    sar::write_text_file((fs::path(out_dir) / "config_echo.txt").string(), cfg.echo());

    std::cout << "class_counts:";
    for (long c : counts) std::cout << ' ' << c;
    std::cout << "\ntrain: " << train.size() << " samples, test: " << test.size()
              << " samples\nwrote " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& opts) {
    auto cfg = resolve_config(opts);
    const sar::Mode mode = sar::mode_from_string(cfg.mode);
    fs::create_directories(cfg.output_dir);

    auto [train_ds, test_ds] = cfg.load_or_generate_data();

    const fs::path out(cfg.output_dir);
    std::ofstream log(out / "trainlog.jsonl");
    sar::RunArtifacts art;
    try {
        art = sar::run_training(cfg, mode, cfg.seed, train_ds, test_ds,
                                [&log](const sar::StepRecord& rec) {
                                    log << sar::step_record_to_json(rec).dump() << "\n";
                                    log.flush();
                                });
    } catch (const sar::NumericError&) {
        log.close(); // keep the partial log for post-mortem
        throw;
    }
    log.close();
    sar::write_run_dir(cfg.output_dir, cfg, mode, cfg.seed, art);

    std::cout << "mode=" << cfg.mode << " seed=" << cfg.seed
              << " test_acc=" << art.metrics.overall_acc << "\nmetrics: "
              << (out / "metrics.json").string() << "\n";
    return kExitOk;
}

int cmd_compare(const CommonOpts& opts) {
    auto cfg = resolve_config(opts);
    auto summary = sar::run_compare(cfg);

    std::printf("%-6s %-6s %9s %9s %9s %9s %12s %12s\n", "mode", "seed", "overall", "head",
                "body", "tail", "compactness", "separability");
    for (const auto& row : summary.rows)
        std::printf("%-6s %-6llu %9.4f %9.4f %9.4f %9.4f %12.4f %12.4f\n", row.mode.c_str(),
                    static_cast<unsigned long long>(row.seed), row.metrics.overall_acc,
                    row.metrics.head_acc, row.metrics.body_acc, row.metrics.tail_acc,
                    row.metrics.compactness, row.metrics.separability);
    for (const auto& [mode_name, score] : summary.consistency)
        std::printf("consistency %-6s %.4f over %zu pairs\n", mode_name.c_str(), score.mean,
                    score.per_pair.size());
    std::cout << "wrote " << cfg.output_dir << "\n";
    return kExitOk;
}

int cmd_anchors(const std::string& source, std::size_t classes, std::size_t dim,
                std::uint64_t seed, const std::string& out_dir) {
    auto set = sar::generate_anchors(sar::anchor_source_from_string(source), classes, dim, seed);
    fs::create_directories(out_dir);
    sar::write_anchor_csv((fs::path(out_dir) / "anchors.csv").string(), set.A);
    auto cosine = sar::pairwise_cosine(set);
    sar::write_square_matrix_csv((fs::path(out_dir) / "cosine.csv").string(), cosine);

    double lo = 1.0, hi = -1.0, sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            if (i == j) continue;
            lo = std::min(lo, cosine.at(i, j));
            hi = std::max(hi, cosine.at(i, j));
            sum += cosine.at(i, j);
            ++n;
        }
    std::printf("source=%s C=%zu D=%zu seed=%llu\n", source.c_str(), classes, dim,
                static_cast<unsigned long long>(seed));
    std::printf("off-diagonal cosine: min=%.9f max=%.9f mean=%.9f\n", lo, hi,
                sum / static_cast<double>(n));
    std::cout << "wrote " << out_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic-anchor regularization experiments"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    std::string gen_out = "data";
    auto* gen = app.add_subcommand("gen-data", "generate a long-tailed dataset as CSV");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "output directory");

    CommonOpts train_opts;
    auto* train = app.add_subcommand("train", "run one training and emit metrics");
    add_common(train, train_opts);

    CommonOpts compare_opts;
    auto* compare = app.add_subcommand("compare", "seed-swept mode comparison");
    add_common(compare, compare_opts);

    std::string anchor_source = "mes", anchor_out = "anchors";
    std::size_t anchor_classes = 10, anchor_dim = 16;
    std::uint64_t anchor_seed = 1;
    auto* anchors = app.add_subcommand("anchors", "generate and inspect anchor geometry");
    anchors->add_option("--source", anchor_source, "nd, om or mes");
    anchors->add_option("--classes", anchor_classes, "number of classes");
    anchors->add_option("--dim", anchor_dim, "anchor dimension");
    anchors->add_option("--seed", anchor_seed, "generation seed");
    anchors->add_option("--out", anchor_out, "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_data(gen_opts, gen_out);
        if (train->parsed()) return cmd_train(train_opts);
        if (compare->parsed()) return cmd_compare(compare_opts);
        if (anchors->parsed())
            return cmd_anchors(anchor_source, anchor_classes, anchor_dim, anchor_seed,
                               anchor_out);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitConfig;
    } catch (const sar::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const sar::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
