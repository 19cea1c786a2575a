#include "gtdl/cli.hpp"

#include <chrono>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "gtdl/extract.hpp"
#include "gtdl/generate.hpp"
#include "gtdl/harness.hpp"
#include "gtdl/io.hpp"
#include "gtdl/metrics.hpp"
#include "gtdl/rng.hpp"
#include "gtdl/splits.hpp"
#include "gtdl/train.hpp"

namespace gtdl {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version_string() {
    return "gtdl 0.1.0 (format 1; rng " + std::string(SeededRng::algorithm) + ")";
}

namespace {

void log(const std::string& cmd, const std::string& fields) {
    std::cerr << "level=info cmd=" << cmd << " " << fields << '\n';
}

template <class T>
void override_if(const CLI::Option* opt, T& target, const T& value) {
    if (opt->count() > 0) target = value;
}

json load_config(const std::string& path) { return path.empty() ? json::object() : io::read_json(path); }

// ---------------------------------------------------------------------- gen

struct GenArgs {
    std::string config, type, out;
    std::uint64_t seed = 0;
    std::size_t n = 10000, p = 10, n_root = 3, n_layers = 3;
    double p_edge = 0, min_weight = 0, max_weight = 0, delta = 0, noise_sd = 0, clip = 0;
};

int run_gen(CLI::App& cmd, const GenArgs& a) {
    const json j = load_config(a.config);
    const std::string type_name = cmd.get_option("--type")->count() ? a.type : j.value("type", std::string());
    if (type_name.empty()) throw UsageError("gen needs --type (mvn|scm)");
    const auto type = parse_generator(type_name);
    const std::uint64_t seed = cmd.get_option("--seed")->count() ? a.seed : j.value("seed", std::uint64_t{0});
    DatasetSpec s = type == GeneratorType::Mvn ? DatasetSpec::mvn_defaults(seed) : DatasetSpec::scm_defaults(seed);
    try {
        s.n = j.value("n", s.n);
        s.p = j.value("p", s.p);
        s.p_edge = j.value("p_edge", s.p_edge);
        s.min_weight = j.value("min_weight", s.min_weight);
        s.max_weight = j.value("max_weight", s.max_weight);
        s.delta = j.value("delta", s.delta);
        s.n_root = j.value("n_root", s.n_root);
        s.n_layers = j.value("n_layers", s.n_layers);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.clip = j.value("clip", s.clip);
    } catch (const json::exception& e) {
        throw UsageError(std::string("invalid gen config: ") + e.what());
    }
    override_if(cmd.get_option("--n"), s.n, a.n);
    override_if(cmd.get_option("--p"), s.p, a.p);
    override_if(cmd.get_option("--p-edge"), s.p_edge, a.p_edge);
    override_if(cmd.get_option("--min-weight"), s.min_weight, a.min_weight);
    override_if(cmd.get_option("--max-weight"), s.max_weight, a.max_weight);
    override_if(cmd.get_option("--delta"), s.delta, a.delta);
    override_if(cmd.get_option("--n-root"), s.n_root, a.n_root);
    override_if(cmd.get_option("--n-layers"), s.n_layers, a.n_layers);
    override_if(cmd.get_option("--noise-sd"), s.noise_sd, a.noise_sd);
    override_if(cmd.get_option("--clip"), s.clip, a.clip);

    const auto ds = make_dataset(s);
    io::write_dataset(ds, a.out);
    log("gen", "event=done type=" + to_string(type) + " seed=" + std::to_string(seed) + " n=" +
                   std::to_string(ds.n()) + " p=" + std::to_string(ds.p()) + " target=" +
                   std::to_string(ds.target_index) + " edges=" + std::to_string(ds.truth.edge_count()) +
                   " out=" + a.out);
    return 0;
}

// -------------------------------------------------------------------- train

struct TrainArgs {
    std::string config, data, out, readout, mask;
    std::size_t layers = 3, dim = 32, heads = 4, n_train = 1000, fold = 0, batch = 256, patience = 10, epochs = 400;
    double lr = 1e-3;
    std::uint64_t seed = 0, split_seed = 0;
};

int run_train(CLI::App& cmd, const TrainArgs& a) {
    const json j = load_config(a.config);
    ModelConfig cfg = io::config_from_json(j.value("model", json::object()));
    if (auto r = cmd.get_option("--readout"); r->count()) cfg.readout = parse_readout(a.readout);
    if (auto m = cmd.get_option("--mask"); m->count()) cfg.mask_mode = parse_mask_mode(a.mask);
    override_if(cmd.get_option("--layers"), cfg.layers, a.layers);
    override_if(cmd.get_option("--dim"), cfg.dim, a.dim);
    override_if(cmd.get_option("--heads"), cfg.heads, a.heads);
    override_if(cmd.get_option("--lr"), cfg.learning_rate, a.lr);
    override_if(cmd.get_option("--seed"), cfg.seed, a.seed);
    cfg.validate();

    TrainOptions opts;
    std::size_t n_train = 1000, fold = 0;
    std::uint64_t split_seed = cfg.seed;
    try {
        opts.batch_size = j.value("batch_size", opts.batch_size);
        opts.patience = j.value("patience", opts.patience);
        opts.max_epochs = j.value("max_epochs", opts.max_epochs);
        n_train = j.value("n_train", n_train);
        fold = j.value("fold", fold);
        split_seed = j.value("split_seed", split_seed);
    } catch (const json::exception& e) {
        throw UsageError(std::string("invalid train config: ") + e.what());
    }
    override_if(cmd.get_option("--batch-size"), opts.batch_size, a.batch);
    override_if(cmd.get_option("--patience"), opts.patience, a.patience);
    override_if(cmd.get_option("--max-epochs"), opts.max_epochs, a.epochs);
    override_if(cmd.get_option("--n-train"), n_train, a.n_train);
    override_if(cmd.get_option("--fold"), fold, a.fold);
    override_if(cmd.get_option("--split-seed"), split_seed, a.split_seed);
    if (opts.batch_size == 0 || opts.max_epochs == 0) throw UsageError("batch size and epoch cap must be positive");
    // Single-threaded outside `experiment`.
    opts.exec = Exec::Serial;

    const auto ds = io::read_dataset(a.data);
    const std::size_t folds = fold_count(n_train);
    if (fold >= folds) throw UsageError("fold must be below " + std::to_string(folds) + " for this n_train");
    SeededRng rng(split_seed);
    const auto plan = make_splits(ds.n(), n_train, folds, rng)[fold];

    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = train(ds, plan, cfg, opts);
    const auto& tm = fit.trained;
    const Vector pred = tm.predict(ds, plan.test);
    std::vector<double> truth(plan.test.size());
    for (std::size_t i = 0; i < plan.test.size(); ++i)
        truth[i] = ds.values(static_cast<Eigen::Index>(plan.test[i]), static_cast<Eigen::Index>(ds.target_index));
    const double test_r2 = r2(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), truth);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out = a.out;
    fs::create_directories(out);
    io::write_parameters(tm.model, out);
    io::write_log(fit.log, out / "log.csv");
    io::write_attention(tm.model.record_attention(tm.inputs(ds, plan.test), Exec::Serial), out);
    const json run{{"data", fs::absolute(a.data).string()},
                   {"dataset_seed", ds.meta.seed},
                   {"generator", ds.meta.generator},
                   {"p", ds.p()},
                   {"target_index", ds.target_index},
                   {"token_columns", token_columns(ds.p(), ds.target_index, cfg.readout)},
                   {"config", io::config_to_json(cfg)},
                   {"batch_size", opts.batch_size},
                   {"patience", opts.patience},
                   {"max_epochs", opts.max_epochs},
                   {"n_train", n_train},
                   {"fold", fold},
                   {"split_seed", split_seed},
                   {"attention_rows", "test"},
                   {"epochs_run", fit.epochs_run},
                   {"best_epoch", fit.best_epoch},
                   {"best_val_mse", fit.best_val_mse},
                   {"test_r2", test_r2},
                   {"wall_time", secs}};
    io::write_text(out / "run.json", run.dump(2) + "\n");
    log("train", "event=done epochs=" + std::to_string(fit.epochs_run) + " best_epoch=" +
                     std::to_string(fit.best_epoch) + " test_r2=" + io::format_double(test_r2) + " out=" + a.out);
    return 0;
}

// ------------------------------------------------------------------ extract

int run_extract(const std::string& run_dir, const std::string& data, double ridge, const std::string& out) {
    if (run_dir.empty() == data.empty()) throw UsageError("extract needs exactly one of --run or --data");
    if (!data.empty()) {
        const auto ds = io::read_dataset(data);
        const auto adj = partial_correlation_adjacency(ds, ridge);
        io::write_adjacency(adj, json{{"method", "partial-correlation"}, {"data", data}, {"ridge", ridge}}, out);
        log("extract", "event=done method=partial-correlation out=" + out);
        return 0;
    }
    const json run = io::read_json(fs::path(run_dir) / "run.json");
    WeightedAdjacency adj;
    try {
        const auto readout = parse_readout(run.at("config").at("readout").get<std::string>());
        const Matrix avg = average_attention(io::read_attention(run_dir), Exec::Serial);
        adj = attention_adjacency(avg, run.at("p").get<std::size_t>(), run.at("target_index").get<std::size_t>(),
                                  readout);
    } catch (const json::exception& e) {
        throw DataError("invalid run.json: " + std::string(e.what()));
    }
    io::write_adjacency(adj, json{{"method", "attention"}, {"run", run_dir}}, out);
    log("extract", "event=done method=attention out=" + out);
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Synthetic feature-interaction benchmarks for attention-based tabular regressors", "gtdl"};
    app.set_version_flag("--version", version_string());
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a dataset with its ground-truth graph");
    g->add_option("--config", gen.config, "JSON file with generator fields (flags override)");
    g->add_option("--type", gen.type, "mvn or scm")->check(CLI::IsMember({"mvn", "scm"}));
    g->add_option("--seed", gen.seed, "Generator seed");
    g->add_option("--out", gen.out, "Output directory (data.csv, meta.json)")->required();
    g->add_option("--n", gen.n, "Rows");
    g->add_option("--p", gen.p, "Columns (MVN) or non-root nodes (SCM)");
    g->add_option("--p-edge", gen.p_edge, "Edge probability");
    g->add_option("--min-weight", gen.min_weight, "MVN off-diagonal magnitude lower bound");
    g->add_option("--max-weight", gen.max_weight, "MVN off-diagonal magnitude upper bound");
    g->add_option("--delta", gen.delta, "MVN diagonal margin");
    g->add_option("--n-root", gen.n_root, "SCM root nodes");
    g->add_option("--n-layers", gen.n_layers, "SCM child layers");
    g->add_option("--noise-sd", gen.noise_sd, "SCM noise standard deviation");
    g->add_option("--clip", gen.clip, "SCM clipping bound");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train the attention regressor on one split");
    t->add_option("--config", tr.config, "JSON file: {\"model\":{...}, \"n_train\", \"fold\", ...} (flags override)");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--out", tr.out, "Run directory")->required();
    t->add_option("--readout", tr.readout, "node or graph")->check(CLI::IsMember({"node", "graph"}));
    t->add_option("--mask", tr.mask, "full or pruned")->check(CLI::IsMember({"full", "pruned"}));
    t->add_option("--layers", tr.layers, "Encoder layers");
    t->add_option("--dim", tr.dim, "Embedding size");
    t->add_option("--heads", tr.heads, "Attention heads");
    t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--seed", tr.seed, "Initialization and shuffling seed");
    t->add_option("--n-train", tr.n_train, "Training rows: 1000, 2000, 3000 or 4000");
    t->add_option("--fold", tr.fold, "Fold index");
    t->add_option("--split-seed", tr.split_seed, "Seed of the split plan (default: --seed)");
    t->add_option("--batch-size", tr.batch, "Minibatch size");
    t->add_option("--patience", tr.patience, "Early-stopping patience in epochs");
    t->add_option("--max-epochs", tr.epochs, "Epoch cap");

    std::string ex_run, ex_data, ex_out;
    double ex_ridge = 1e-3;
    auto* e = app.add_subcommand("extract", "Turn a run's attention (or a dataset's partial correlations) into an adjacency");
    e->add_option("--run", ex_run, "Run directory written by train");
    e->add_option("--data", ex_data, "Dataset directory: use the partial-correlation baseline instead");
    e->add_option("--ridge", ex_ridge, "Ridge added to the correlation matrix (baseline only)");
    e->add_option("--out", ex_out, "Adjacency JSON to write")->required();

    std::string sc_adj, sc_truth;
    bool sc_directed = false;
    auto* s = app.add_subcommand("score", "Print the structure ROC-AUC of an adjacency against the truth");
    s->add_option("--adjacency", sc_adj, "Learned adjacency JSON")->required();
    s->add_option("--truth", sc_truth, "Dataset meta.json or binary adjacency JSON")->required();
    s->add_flag("--directed", sc_directed, "Score against the directed truth");

    std::string xp_config, xp_out;
    std::size_t xp_workers = 1;
    bool xp_quiet = false;
    auto* x = app.add_subcommand("experiment", "Run or resume a full experiment");
    x->add_option("--config", xp_config, "Experiment JSON")->required();
    x->add_option("--workers", xp_workers, "Concurrent jobs")->check(CLI::PositiveNumber);
    x->add_option("--out", xp_out, "Output directory (overrides output_dir)");
    x->add_flag("--quiet", xp_quiet, "Suppress per-run log lines");

    std::string rp_results, rp_out;
    auto* r = app.add_subcommand("report", "Aggregate a results file into CSV and SVG summaries");
    r->add_option("--results", rp_results, "results.csv written by experiment")->required();
    r->add_option("--out", rp_out, "Report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*g) return run_gen(*g, gen);
        if (*t) return run_train(*t, tr);
        if (*e) return run_extract(ex_run, ex_data, ex_ridge, ex_out);
        if (*s) {
            const double auc = roc_auc(io::read_weighted_adjacency(sc_adj), io::read_truth(sc_truth), sc_directed);
            std::cout << io::format_double(auc) << '\n';
            return 0;
        }
        if (*x) {
            auto cfg = ExperimentConfig::from_json(io::read_json(xp_config));
            if (!xp_out.empty()) cfg.output_dir = xp_out;
            const auto rows = run_experiment(cfg, {xp_workers, xp_quiet});
            log("experiment", "event=done rows=" + std::to_string(rows.size()) + " out=" + cfg.output_dir.string());
            return 0;
        }
        if (*r) {
            const auto agg = aggregate_and_report(read_results(rp_results), rp_out);
            log("report", "event=done groups=" + std::to_string(agg.size()) + " out=" + rp_out);
            return 0;
        }
    } catch (const Error& err) {
        std::cerr << "level=error msg=\"" << err.what() << "\"\n";
        switch (err.kind()) {
            case ErrorKind::Usage: return 1;
            case ErrorKind::Data: return 2;
            case ErrorKind::Numeric: return 3;
        }
    } catch (const fs::filesystem_error& err) {
        std::cerr << "level=error msg=\"" << err.what() << "\"\n";
        return 2;
    }
    return 1;
}

}  // namespace gtdl
