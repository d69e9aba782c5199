#include "sar/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "sar/anchors.hpp"
#include "sar/errors.hpp"
#include "sar/rng.hpp"
#include "sar/serialize.hpp"

namespace fs = std::filesystem;

namespace sar {

namespace {

constexpr std::uint64_t kAnchorStream = 20;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& v, Fn fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt(v[i]);
    }
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        return std::stoul(value);
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': bad count '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': bad integer '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InputError("config key '" + key + "': bad number '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InputError("config key '" + key + "': bad flag '" + value + "'");
}

std::string csv_cell(double v) { return std::isnan(v) ? "" : format_full(v); }

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
};

Stats mean_sd(const std::vector<double>& v) {
    Stats s;
    std::size_t n = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            s.mean += x;
            ++n;
        }
    if (n == 0) return {std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()};
    s.mean /= static_cast<double>(n);
    if (n >= 2) {
        double acc = 0.0;
        for (double x : v)
            if (!std::isnan(x)) acc += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(acc / static_cast<double>(n - 1));
    }
    return s;
}

} // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key == "classes") classes = parse_size(key, value);
    else if (key == "input_dim") input_dim = parse_size(key, value);
    else if (key == "n_max") n_max = parse_size(key, value);
    else if (key == "beta") beta = parse_real(key, value);
    else if (key == "class_separation") class_separation = parse_real(key, value);
    else if (key == "noise_sigma") noise_sigma = parse_real(key, value);
    else if (key == "data_seed") data_seed = parse_u64(key, value);
    else if (key == "test_per_class") test_per_class = parse_size(key, value);
    else if (key == "data_dir") data_dir = value;
    else if (key == "feature_dim") feature_dim = parse_size(key, value);
    else if (key == "hidden") {
        hidden.clear();
        for (const auto& item : split_list(value)) hidden.push_back(parse_size(key, item));
        if (hidden.empty()) throw InputError("config key 'hidden': empty list");
    } else if (key == "head_hidden") head_hidden = parse_size(key, value);
    else if (key == "mode") mode = to_string(mode_from_string(value));
    else if (key == "epochs") epochs = parse_size(key, value);
    else if (key == "batch_size") batch_size = parse_size(key, value);
    else if (key == "seed") seed = parse_u64(key, value);
    else if (key == "eval_every") eval_every = parse_size(key, value);
    else if (key == "lr") lr = parse_real(key, value);
    else if (key == "momentum") momentum = parse_real(key, value);
    else if (key == "weight_decay") weight_decay = parse_real(key, value);
    else if (key == "poly_power") poly_power = parse_real(key, value);
    else if (key == "lambda1") lambda1 = parse_real(key, value);
    else if (key == "lambda2") lambda2 = parse_real(key, value);
    else if (key == "tau") tau = parse_real(key, value);
    else if (key == "delta") delta = parse_real(key, value);
    else if (key == "ema_alpha") ema_alpha = parse_real(key, value);
    else if (key == "anchor_source") anchor_source = to_string(anchor_source_from_string(value));
    else if (key == "anchor_seed") {
        try {
            anchor_seed = std::stoll(value);
        } catch (const std::exception&) {
            throw InputError("config key 'anchor_seed': bad integer '" + value + "'");
        }
    } else if (key == "proto_lambda") proto_lambda = parse_real(key, value);
    else if (key == "bank_momentum") bank_momentum = parse_real(key, value);
    else if (key == "seeds") {
        seeds.clear();
        for (const auto& item : split_list(value)) seeds.push_back(parse_u64(key, item));
        if (seeds.empty()) throw InputError("config key 'seeds': empty list");
    } else if (key == "modes") {
        modes.clear();
        for (const auto& item : split_list(value)) modes.push_back(to_string(mode_from_string(item)));
        if (modes.empty()) throw InputError("config key 'modes': empty list");
    } else if (key == "output_dir") output_dir = value;
    else if (key == "log_anchors") log_anchors = parse_bool(key, value);
    else throw InputError("unknown config key '" + key + "'");
}

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> list{
        "classes", "input_dim", "n_max", "beta", "class_separation", "noise_sigma",
        "data_seed", "test_per_class", "data_dir", "feature_dim", "hidden", "head_hidden",
        "mode", "epochs", "batch_size", "seed", "eval_every", "lr", "momentum",
        "weight_decay", "poly_power", "lambda1", "lambda2", "tau", "delta", "ema_alpha",
        "anchor_source", "anchor_seed", "proto_lambda", "bank_momentum", "seeds", "modes",
        "output_dir", "log_anchors"};
    return list;
}

std::string ExperimentConfig::echo() const {
    std::ostringstream out;
    out << "classes=" << classes << "\n"
        << "input_dim=" << input_dim << "\n"
        << "n_max=" << n_max << "\n"
        << "beta=" << format_full(beta) << "\n"
        << "class_separation=" << format_full(class_separation) << "\n"
        << "noise_sigma=" << format_full(noise_sigma) << "\n"
        << "data_seed=" << data_seed << "\n"
        << "test_per_class=" << test_per_class << "\n"
        << "data_dir=" << data_dir << "\n"
        << "feature_dim=" << feature_dim << "\n"
        << "hidden=" << join(hidden, [](std::size_t v) { return std::to_string(v); }) << "\n"
        << "head_hidden=" << head_hidden << "\n"
        << "mode=" << mode << "\n"
        << "epochs=" << epochs << "\n"
        << "batch_size=" << batch_size << "\n"
        << "seed=" << seed << "\n"
        << "eval_every=" << eval_every << "\n"
        << "lr=" << format_full(lr) << "\n"
        << "momentum=" << format_full(momentum) << "\n"
        << "weight_decay=" << format_full(weight_decay) << "\n"
        << "poly_power=" << format_full(poly_power) << "\n"
        << "lambda1=" << format_full(lambda1) << "\n"
        << "lambda2=" << format_full(lambda2) << "\n"
        << "tau=" << format_full(tau) << "\n"
        << "delta=" << format_full(delta) << "\n"
        << "ema_alpha=" << format_full(ema_alpha) << "\n"
        << "anchor_source=" << anchor_source << "\n"
        << "anchor_seed=" << anchor_seed << "\n"
        << "proto_lambda=" << format_full(proto_lambda) << "\n"
        << "bank_momentum=" << format_full(bank_momentum) << "\n"
        << "seeds=" << join(seeds, [](std::uint64_t v) { return std::to_string(v); }) << "\n"
        << "modes=" << join(modes, [](const std::string& v) { return v; }) << "\n"
        << "output_dir=" << output_dir << "\n"
        << "log_anchors=" << (log_anchors ? "true" : "false") << "\n";
    return out.str();
}

GmmSpec ExperimentConfig::gmm_spec() const {
    GmmSpec spec;
    spec.classes = classes;
    spec.input_dim = input_dim;
    spec.n_max = n_max;
    spec.beta = beta;
    spec.class_separation = class_separation;
    spec.noise_sigma = noise_sigma;
    spec.seed = data_seed;
    return spec;
}

std::uint64_t ExperimentConfig::resolved_anchor_seed() const {
    if (anchor_seed >= 0) return static_cast<std::uint64_t>(anchor_seed);
    // shared across run seeds: the anchors are a fixed input of the
    // experiment, not part of a run's randomness
    return derive_seed(data_seed, kAnchorStream);
}

TrainConfig ExperimentConfig::train_config(Mode m, std::uint64_t run_seed) const {
    TrainConfig cfg;
    cfg.mode = m;
    cfg.sar.lambda1 = lambda1;
    cfg.sar.lambda2 = lambda2;
    cfg.sar.tau = tau;
    cfg.sar.delta = delta;
    cfg.sar.alpha = ema_alpha;
    cfg.proto_lambda = resolved_proto_lambda();
    cfg.bank_momentum = bank_momentum;
    cfg.lr = lr;
    cfg.momentum = momentum;
    cfg.weight_decay = weight_decay;
    cfg.poly_power = poly_power;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.hidden = hidden;
    cfg.feature_dim = feature_dim;
    cfg.head_hidden = head_hidden;
    cfg.seed = run_seed;
    cfg.eval_every = eval_every;
    cfg.log_anchor_matrices = log_anchors;
    if (m == Mode::Cr || m == Mode::Sar)
        cfg.anchors = generate_anchors(anchor_source_from_string(anchor_source), classes,
                                       feature_dim, resolved_anchor_seed());
    return cfg;
}

std::pair<LongTailDataset, LongTailDataset> ExperimentConfig::load_or_generate_data() const {
    if (!data_dir.empty()) {
        return {load_csv((fs::path(data_dir) / "train.csv").string()),
                load_csv((fs::path(data_dir) / "test.csv").string())};
    }
    return make_train_test(gmm_spec(), test_per_class);
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
    ExperimentConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config file " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw InputError("config line " + std::to_string(line_no) +
                                 ": expected key=value, got '" + line + "'");
            cfg.set(line.substr(0, eq), line.substr(eq + 1));
        }
    }
    for (const auto& [key, value] : overrides) cfg.set(key, value);
    return cfg;
}

RunArtifacts run_training(const ExperimentConfig& cfg, Mode m, std::uint64_t run_seed,
                          const LongTailDataset& train, const LongTailDataset& test,
                          const std::function<void(const StepRecord&)>& on_step) {
    TrainConfig tc = cfg.train_config(m, run_seed);
    tc.on_step = on_step;

    RunArtifacts art;
    art.result = sar::train(tc, train, test);
    art.metrics = compute_metrics(art.result.final_eval.predictions, test.y, train.class_counts,
                                  art.result.final_eval.features);
    switch (m) {
    case Mode::Sar: art.representation = art.result.anchor_state.a_hat; break;
    case Mode::Proto: art.representation = art.result.bank.P; break;
    default: {
        // feature centroids of the test set
        const std::size_t classes = train.class_counts.size();
        const Tensor2D& f = art.result.final_eval.features;
        Tensor2D centroids(classes, f.cols(), false);
        std::vector<long> counts(classes, 0);
        for (std::size_t r = 0; r < test.y.size(); ++r) {
            const std::size_t lab = static_cast<std::size_t>(test.y[r]);
            ++counts[lab];
            for (std::size_t k = 0; k < f.cols(); ++k) centroids.at(lab, k) += f.at(r, k);
        }
        for (std::size_t i = 0; i < classes; ++i)
            if (counts[i] > 0)
                for (std::size_t k = 0; k < f.cols(); ++k)
                    centroids.at(i, k) /= static_cast<double>(counts[i]);
        art.representation = centroids;
        break;
    }
    }
    art.rep_dependency = dependency_matrix(art.representation);
    return art;
}

void write_run_dir(const std::string& dir, const ExperimentConfig& cfg, Mode m,
                   std::uint64_t run_seed, const RunArtifacts& art) {
    fs::create_directories(dir);
    const fs::path base(dir);

    std::ostringstream echo;
    echo << cfg.echo() << "resolved_mode=" << to_string(m) << "\n"
         << "resolved_seed=" << run_seed << "\n";
    if (m == Mode::Cr || m == Mode::Sar)
        echo << "resolved_anchor_seed=" << cfg.resolved_anchor_seed() << "\n";
    write_text_file((base / "run_config.txt").string(), echo.str());

    write_text_file((base / "metrics.json").string(), metrics_to_json(art.metrics).dump(2) + "\n");
    write_square_matrix_csv((base / "centroid_dependency.csv").string(), art.metrics.dependency);

    // test-set features at the final step
    {
        const auto& eval = art.result.final_eval;
        std::ostringstream csv;
        csv << "label,pred";
        for (std::size_t k = 0; k < eval.features.cols(); ++k) csv << ",f_" << k;
        csv << "\n";
        for (std::size_t r = 0; r < eval.features.rows(); ++r) {
            csv << eval.labels[r] << ',' << eval.predictions[r];
            for (std::size_t k = 0; k < eval.features.cols(); ++k)
                csv << ',' << format_full(eval.features.at(r, k));
            csv << "\n";
        }
        write_text_file((base / "test_features.csv").string(), csv.str());
    }

    // the raw anchors make the run exactly replayable
    if (m == Mode::Cr || m == Mode::Sar) {
        auto anchors = generate_anchors(anchor_source_from_string(cfg.anchor_source),
                                        cfg.classes, cfg.feature_dim,
                                        cfg.resolved_anchor_seed());
        write_anchor_csv((base / "anchors.csv").string(), anchors.A);
    }
    if (m == Mode::Sar) {
        write_anchor_csv((base / "semantic_anchors.csv").string(),
                         art.result.anchor_state.a_hat);
        write_square_matrix_csv((base / "anchor_dependency.csv").string(), art.rep_dependency);
    } else if (m == Mode::Proto) {
        write_anchor_csv((base / "prototypes.csv").string(), art.result.bank.P);
        write_square_matrix_csv((base / "prototype_dependency.csv").string(),
                                art.rep_dependency);
    }
}

CompareSummary run_compare(const ExperimentConfig& cfg) {
    if (cfg.seeds.size() < 2)
        throw InputError("compare needs at least 2 seeds for the consistency report");

    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    write_text_file((out / "config_echo.txt").string(), cfg.echo());

    auto [train_ds, test_ds] = cfg.load_or_generate_data();

    CompareSummary summary;
    std::map<std::string, std::vector<Tensor2D>> deps;
    for (const auto& mode_name : cfg.modes) {
        const Mode m = mode_from_string(mode_name);
        for (std::uint64_t run_seed : cfg.seeds) {
            const fs::path run_dir = out / mode_name / ("seed_" + std::to_string(run_seed));
            fs::create_directories(run_dir);
            std::ofstream log(run_dir / "trainlog.jsonl");
            auto art = run_training(cfg, m, run_seed, train_ds, test_ds,
                                    [&log](const StepRecord& rec) {
                                        log << step_record_to_json(rec).dump() << "\n";
                                    });
            log.close();
            write_run_dir(run_dir.string(), cfg, m, run_seed, art);
            deps[mode_name].push_back(art.rep_dependency);
            summary.rows.push_back({mode_name, run_seed, std::move(art.metrics)});
        }
    }

    // per-run rows
    {
        std::ostringstream csv;
        csv << "mode,seed,overall,head,body,tail,compactness,separability\n";
        for (const auto& row : summary.rows)
            csv << row.mode << ',' << row.seed << ',' << csv_cell(row.metrics.overall_acc) << ','
                << csv_cell(row.metrics.head_acc) << ',' << csv_cell(row.metrics.body_acc) << ','
                << csv_cell(row.metrics.tail_acc) << ',' << csv_cell(row.metrics.compactness)
                << ',' << csv_cell(row.metrics.separability) << "\n";
        write_text_file((out / "runs.csv").string(), csv.str());
    }

    // one row per mode: mean and sd over seeds
    {
        std::ostringstream csv;
        csv << "mode,seeds,overall_mean,overall_sd,head_mean,head_sd,body_mean,body_sd,"
               "tail_mean,tail_sd,compactness_mean,compactness_sd,separability_mean,"
               "separability_sd\n";
        for (const auto& mode_name : cfg.modes) {
            std::vector<double> overall, head, body, tail, compact, sep;
            for (const auto& row : summary.rows) {
                if (row.mode != mode_name) continue;
                overall.push_back(row.metrics.overall_acc);
                head.push_back(row.metrics.head_acc);
                body.push_back(row.metrics.body_acc);
                tail.push_back(row.metrics.tail_acc);
                compact.push_back(row.metrics.compactness);
                sep.push_back(row.metrics.separability);
            }
            const Stats so = mean_sd(overall), sh = mean_sd(head), sb = mean_sd(body),
                        st = mean_sd(tail), sc = mean_sd(compact), ss = mean_sd(sep);
            csv << mode_name << ',' << cfg.seeds.size() << ',' << csv_cell(so.mean) << ','
                << csv_cell(so.sd) << ',' << csv_cell(sh.mean) << ',' << csv_cell(sh.sd) << ','
                << csv_cell(sb.mean) << ',' << csv_cell(sb.sd) << ',' << csv_cell(st.mean) << ','
                << csv_cell(st.sd) << ',' << csv_cell(sc.mean) << ',' << csv_cell(sc.sd) << ','
                << csv_cell(ss.mean) << ',' << csv_cell(ss.sd) << "\n";
        }
        write_text_file((out / "summary.csv").string(), csv.str());
    }

    // cross-seed consistency of each mode's representation dependencies
    {
        std::ostringstream csv;
        csv << "mode,pairs,mean_consistency\n";
        for (const auto& mode_name : cfg.modes) {
            auto score = cross_seed_consistency(deps[mode_name]);
            summary.consistency[mode_name] = score;
            csv << mode_name << ',' << score.per_pair.size() << ',' << csv_cell(score.mean)
                << "\n";
        }
        write_text_file((out / "consistency.csv").string(), csv.str());
    }

    // paired per-seed deltas (sar - ce) when both arms were run
    {
        auto find_row = [&](const std::string& mode_name, std::uint64_t s) -> const RunRow* {
            for (const auto& row : summary.rows)
                if (row.mode == mode_name && row.seed == s) return &row;
            return nullptr;
        };
        bool have_both = true;
        for (std::uint64_t s : cfg.seeds)
            have_both = have_both && find_row("sar", s) && find_row("ce", s);
        if (have_both) {
            std::ostringstream csv;
            csv << "seed,d_overall,d_head,d_body,d_tail,d_compactness,d_separability\n";
            for (std::uint64_t s : cfg.seeds) {
                const RunRow* a = find_row("sar", s);
                const RunRow* b = find_row("ce", s);
                csv << s << ',' << csv_cell(a->metrics.overall_acc - b->metrics.overall_acc)
                    << ',' << csv_cell(a->metrics.head_acc - b->metrics.head_acc) << ','
                    << csv_cell(a->metrics.body_acc - b->metrics.body_acc) << ','
                    << csv_cell(a->metrics.tail_acc - b->metrics.tail_acc) << ','
                    << csv_cell(a->metrics.compactness - b->metrics.compactness) << ','
                    << csv_cell(a->metrics.separability - b->metrics.separability) << "\n";
            }
            write_text_file((out / "paired_deltas.csv").string(), csv.str());
        }
    }

    return summary;
}

} // namespace sar
