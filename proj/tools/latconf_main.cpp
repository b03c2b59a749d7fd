// latconf: train a VAE regressor on tabular observations and score each
// prediction by its latent-space distance to reliable training points.
//
// Subcommands: synth, train, score, eval, export-latent.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "latconf/confidence.hpp"
#include "latconf/dataset.hpp"
#include "latconf/evaluation.hpp"
#include "latconf/synthgen.hpp"
#include "latconf/vae.hpp"

namespace {

using namespace latconf;

bool g_verbose = false;

void note_precedence() {
    if (g_verbose) {
        std::cout << "[latconf] option precedence: command line > config file > defaults\n";
    }
}

// Fail fast on unwritable outputs before any heavy work. Append mode
// so an existing file is left untouched until the real write.
void ensure_writable(const std::string& path) {
    std::ofstream probe(path, std::ios::binary | std::ios::app);
    if (!probe) {
        throw std::runtime_error("cannot open '" + path + "' for writing: " +
                                 std::strerror(errno));
    }
}

std::string default_meta_path(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension();
    return p.string() + ".meta.csv";
}

struct TrainFlags {
    std::string data;
    std::string model_out;
    std::string history_out;
    std::string cutoff = "2020-12-31";
    bool no_standardize = false;
    VaeConfig cfg;  // input_dim filled from the data
};

void run_train(const TrainFlags& f) {
    note_precedence();
    ensure_writable(f.model_out);
    if (!f.history_out.empty()) ensure_writable(f.history_out);

    const Dataset data = load_csv(f.data);
    const Date cutoff = Date::parse(f.cutoff);

    // Only the train side matters here; an empty test side is fine.
    Dataset train;
    train.feature_names = data.feature_names;
    for (const Observation& o : data.observations) {
        if (o.date <= cutoff) train.observations.push_back(o);
    }
    if (train.observations.empty()) {
        throw std::runtime_error("no training rows on or before " + cutoff.to_string());
    }

    VaeConfig cfg = f.cfg;
    cfg.input_dim = train.arity();
    cfg.validate();
    if (g_verbose) {
        std::cout << "[latconf] train: rows=" << train.size() << " input_dim=" << cfg.input_dim
                  << " latent_dim=" << cfg.latent_dim << " epochs=" << cfg.epochs
                  << " seed=" << cfg.seed << (f.no_standardize ? " (standardization off)" : "")
                  << '\n';
    }

    VaeModel model = init_model(cfg);
    if (!f.no_standardize) model.scaler = fit_scaler(train);
    const Dataset scaled = apply_scaler(model.scaler, train);

    if (cfg.epochs == 0) {
        std::cout << "warning: --epochs 0, writing the untrained model\n";
    }
    const TrainHistory history = fit(model, scaled);
    save_model(model, f.model_out);

    if (!f.history_out.empty()) {
        std::ofstream out(f.history_out, std::ios::binary | std::ios::trunc);
        out << "epoch,total,regression,kl\n";
        for (std::size_t e = 0; e < history.epochs(); ++e) {
            out << e + 1 << ',' << format_double(history.total[e]) << ','
                << format_double(history.regression[e]) << ',' << format_double(history.kl[e])
                << '\n';
        }
        if (!out) throw std::runtime_error("write error on '" + f.history_out + "'");
    }

    std::cout << "model written to " << f.model_out << '\n';
    if (history.epochs() > 0) {
        const std::size_t last = history.epochs() - 1;
        std::cout << "final losses: total=" << format_double(history.total[last])
                  << " regression=" << format_double(history.regression[last])
                  << " kl=" << format_double(history.kl[last]) << '\n';
    }
}

struct ScoreFlags {
    std::string model;
    std::string data;
    std::string out;
    std::string cutoff = "2020-12-31";
    std::string space = "latent";
    std::size_t m = 3;
    bool all_train = false;
    unsigned threads = 1;
};

void run_score(const ScoreFlags& f) {
    note_precedence();
    ensure_writable(f.out);

    const VaeModel model = load_model(f.model);
    const Dataset data = load_csv(f.data);
    const SplitResult split = split_by_date(data, Date::parse(f.cutoff));

    const Dataset train = apply_scaler(model.scaler, split.train);
    const Dataset test = apply_scaler(model.scaler, split.test);
    const LatentSet train_ls = project(model, train);
    const LatentSet test_ls = project(model, test);

    const ReliablePartition part = partition_reliable(train_ls);
    const ConfidenceReport report = score(space_from_string(f.space), train, train_ls, test,
                                          test_ls, part, f.m, f.all_train, f.threads);
    write_scores_csv(report, f.out);

    std::cout << "space=" << to_string(report.space) << " T=" << format_double(report.threshold)
              << " reliable=" << report.reliable_count << "/" << train.size()
              << " M=" << report.m << '\n';
    if (report.degenerate()) {
        std::cout << "warning: only " << report.k_used << " reference points available for M="
                  << report.m << '\n';
    }
    std::cout << "scores written to " << f.out << '\n';
}

struct EvalFlags {
    std::string scores;
    std::string model;
    std::string data;
    std::string cutoff = "2020-12-31";
    double fraction = 0.2;
    std::string out;
    std::string csv_out;
};

void run_eval(const EvalFlags& f) {
    note_precedence();
    if (!f.out.empty()) ensure_writable(f.out);
    if (!f.csv_out.empty()) ensure_writable(f.csv_out);

    const ConfidenceReport scores = read_scores_csv(f.scores);
    const VaeModel model = load_model(f.model);
    const Dataset data = load_csv(f.data);
    const SplitResult split = split_by_date(data, Date::parse(f.cutoff));
    const Dataset test = apply_scaler(model.scaler, split.test);
    if (!test.labeled()) throw std::runtime_error("eval needs a labeled test set");
    const LatentSet test_ls = project(model, test);

    // Join score rows with test rows by id.
    std::unordered_map<std::string, std::size_t> row_of;
    row_of.reserve(test_ls.size());
    for (std::size_t i = 0; i < test_ls.size(); ++i) row_of.emplace(test_ls.ids[i], i);
    if (scores.ids.size() != test_ls.size()) {
        throw std::runtime_error("eval: " + std::to_string(scores.ids.size()) +
                                 " scored rows but " + std::to_string(test_ls.size()) +
                                 " test rows");
    }
    LatentSet joined;
    joined.errors.emplace();
    for (const std::string& id : scores.ids) {
        auto it = row_of.find(id);
        if (it == row_of.end()) {
            throw std::runtime_error("eval: scored id '" + id + "' not found in the test set");
        }
        joined.ids.push_back(id);
        joined.points.push_back(test_ls.points[it->second]);
        joined.predictions.push_back(test_ls.predictions[it->second]);
        joined.errors->push_back((*test_ls.errors)[it->second]);
    }

    const EvalReport report = build_report(scores, joined, f.fraction);
    const std::string text = format_report(report);
    if (f.out.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(f.out, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw std::runtime_error("write error on '" + f.out + "'");
        std::cout << "report written to " << f.out << '\n';
    }
    if (!f.csv_out.empty()) {
        const bool fresh = !std::filesystem::exists(f.csv_out) ||
                           std::filesystem::file_size(f.csv_out) == 0;
        std::ofstream out(f.csv_out, std::ios::binary | std::ios::app);
        if (fresh) out << report_csv_header() << '\n';
        out << report_csv_row(report) << '\n';
        if (!out) throw std::runtime_error("write error on '" + f.csv_out + "'");
    }
}

struct ExportFlags {
    std::string model;
    std::string data;
    std::string out;
    std::string cutoff;
    std::string side = "test";
};

void run_export_latent(const ExportFlags& f) {
    note_precedence();
    ensure_writable(f.out);

    const VaeModel model = load_model(f.model);
    Dataset data = load_csv(f.data, /*require_target=*/false);
    if (!f.cutoff.empty()) {
        SplitResult split = split_by_date(data, Date::parse(f.cutoff));
        data = f.side == "train" ? std::move(split.train) : std::move(split.test);
    }
    const Dataset scaled = apply_scaler(model.scaler, data);
    const LatentSet ls = project(model, scaled);

    if (scaled.labeled()) {
        const std::vector<double> targets = scaled.targets();
        write_latent_csv(ls, &targets, f.out);
    } else {
        write_latent_csv(ls, nullptr, f.out);
    }
    std::cout << "latent coordinates written to " << f.out << '\n';
}

struct SynthFlags {
    std::string out;
    std::string meta;
    SynthConfig cfg;
};

void run_synth(const SynthFlags& f) {
    note_precedence();
    const std::string meta_path = f.meta.empty() ? default_meta_path(f.out) : f.meta;
    ensure_writable(f.out);
    ensure_writable(meta_path);

    const SynthResult result = generate(f.cfg);

    Dataset all;
    all.feature_names = result.train.feature_names;
    all.observations = result.train.observations;
    all.observations.insert(all.observations.end(), result.test.observations.begin(),
                            result.test.observations.end());
    write_csv(all, f.out);
    write_meta_csv(result.meta, meta_path);

    std::cout << "wrote " << result.train.size() << " train + " << result.test.size()
              << " test rows to " << f.out << " (meta: " << meta_path << ")\n";
}

const CLI::Validator DateValidator(
    [](std::string& s) -> std::string {
        try {
            Date::parse(s);
            return {};
        } catch (const std::exception& e) {
            return e.what();
        }
    },
    "DATE");

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-space prediction confidence for tabular regression"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags take precedence");
    app.allow_config_extras(false);
    app.add_flag("--verbose", g_verbose, "print effective options and precedence");

    SynthFlags synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    synth_cmd->add_option("--out", synth.out, "output dataset CSV")->required();
    synth_cmd->add_option("--meta", synth.meta, "meta sidecar CSV (default <out>.meta.csv)");
    synth_cmd->add_option("--n-train", synth.cfg.n_train, "training rows")->required();
    synth_cmd->add_option("--n-test", synth.cfg.n_test, "test rows")->required();
    synth_cmd->add_option("--n-features", synth.cfg.n_features, "feature columns")
        ->capture_default_str();
    synth_cmd->add_option("--n-clusters", synth.cfg.n_clusters, "training clusters")
        ->capture_default_str();
    synth_cmd
        ->add_option("--shifted-fraction", synth.cfg.shifted_cluster_fraction,
                     "fraction of test rows from clusters absent in train")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    synth_cmd->add_option("--noise-low", synth.cfg.noise_low, "target noise std, training regime")
        ->capture_default_str();
    synth_cmd->add_option("--noise-high", synth.cfg.noise_high, "target noise std, shifted regime")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.cfg.seed, "generator seed")->capture_default_str();
    synth_cmd->callback([&synth]() { run_synth(synth); });

    TrainFlags train;
    CLI::App* train_cmd = app.add_subcommand("train", "train the VAE regressor");
    train_cmd->add_option("--data", train.data, "dataset CSV")->required();
    train_cmd->add_option("--model-out", train.model_out, "output model file")->required();
    train_cmd->add_option("--history-out", train.history_out, "per-epoch loss CSV");
    train_cmd->add_option("--cutoff", train.cutoff, "train on rows dated <= cutoff")
        ->check(DateValidator)
        ->capture_default_str();
    train_cmd->add_option("--encoder-hidden", train.cfg.encoder_hidden, "encoder widths")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_option("--latent-dim", train.cfg.latent_dim, "latent dimension")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--decoder-hidden", train.cfg.decoder_hidden, "decoder widths")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd
        ->add_option_function<std::string>(
            "--activation",
            [&train](const std::string& s) { train.cfg.activation = activation_from_string(s); },
            "hidden activation")
        ->check(CLI::IsMember({"tanh", "softplus"}))
        ->default_str("tanh");
    train_cmd->add_option("--kl-weight", train.cfg.kl_weight, "KL regularization weight")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train_cmd->add_option("--lr", train.cfg.learning_rate, "Adam learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--epochs", train.cfg.epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", train.cfg.batch_size, "mini-batch size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--seed", train.cfg.seed, "training seed")->capture_default_str();
    train_cmd->add_flag("--no-standardize", train.no_standardize,
                        "skip feature standardization (identity scaler)");
    train_cmd->callback([&train]() { run_train(train); });

    ScoreFlags score;
    CLI::App* score_cmd = app.add_subcommand("score", "confidence-score a test set");
    score_cmd->add_option("--model", score.model, "trained model file")->required();
    score_cmd->add_option("--data", score.data, "dataset CSV")->required();
    score_cmd->add_option("--out", score.out, "output score CSV")->required();
    score_cmd->add_option("--cutoff", score.cutoff, "train/test split date")
        ->check(DateValidator)
        ->capture_default_str();
    score_cmd->add_option("--space", score.space, "distance space")
        ->check(CLI::IsMember({"latent", "feature", "geo", "ls", "fs", "gs"}))
        ->capture_default_str();
    score_cmd->add_option("--m", score.m, "number of nearest reliable representations")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    score_cmd->add_flag("--all-train", score.all_train,
                        "measure against every train row, not just the reliable subset");
    score_cmd->add_option("--threads", score.threads, "worker threads for scoring")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    score_cmd->callback([&score]() { run_score(score); });

    EvalFlags eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "correlate scores with absolute error");
    eval_cmd->add_option("--scores", eval.scores, "score CSV from `score`")->required();
    eval_cmd->add_option("--model", eval.model, "trained model file")->required();
    eval_cmd->add_option("--data", eval.data, "labeled dataset CSV")->required();
    eval_cmd->add_option("--cutoff", eval.cutoff, "train/test split date")
        ->check(DateValidator)
        ->capture_default_str();
    eval_cmd->add_option("--fraction", eval.fraction, "tail fraction")
        ->check(CLI::Range(1e-9, 0.5))
        ->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "report file (default stdout)");
    eval_cmd->add_option("--csv-out", eval.csv_out, "append a CSV report row");
    eval_cmd->callback([&eval]() { run_eval(eval); });

    ExportFlags exp;
    CLI::App* export_cmd =
        app.add_subcommand("export-latent", "dump latent coordinates for external plotting");
    export_cmd->add_option("--model", exp.model, "trained model file")->required();
    export_cmd->add_option("--data", exp.data, "dataset CSV")->required();
    export_cmd->add_option("--out", exp.out, "output latent CSV")->required();
    export_cmd->add_option("--cutoff", exp.cutoff, "optionally split first")->check(DateValidator);
    export_cmd->add_option("--side", exp.side, "which side of the split to export")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    export_cmd->callback([&exp]() { run_export_latent(exp); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
