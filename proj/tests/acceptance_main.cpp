// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Criteria 3/4/6 run the full pipeline, so this
// binary takes a few minutes on one core.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "latconf/confidence.hpp"
#include "latconf/dataset.hpp"
#include "latconf/evaluation.hpp"
#include "latconf/synthgen.hpp"
#include "latconf/vae.hpp"

using namespace latconf;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << number << ": " << name;
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(4);
    ss << v;
    return ss.str();
}

bool approx(double got, double want, double tol = 1e-9) { return std::abs(got - want) <= tol; }

// --------------------------------------------------------------- 1
void criterion_gradients() {
    const auto start = Clock::now();

    VaeConfig cfg;
    cfg.input_dim = 12;
    cfg.seed = 2024;
    VaeModel m = init_model(cfg);

    std::mt19937_64 rng(555);
    std::normal_distribution<double> unit(0.0, 1.0);
    Batch batch;
    batch.x.assign(16, std::vector<double>(cfg.input_dim));
    batch.y.assign(16, 0.0);
    std::vector<std::vector<double>> noise(16, std::vector<double>(cfg.latent_dim));
    for (auto& row : batch.x)
        for (auto& v : row) v = unit(rng);
    for (auto& y : batch.y) y = 3.0 * unit(rng);
    for (auto& row : noise)
        for (auto& v : row) v = unit(rng);

    const double err = grad_check(m, batch, noise, 120, 99);
    const double elapsed = seconds_since(start);
    report(1, "analytic gradients match finite differences", err < 1e-4 && elapsed < 10.0,
           "max_rel_err=" + fmt(err) + ", " + fmt(elapsed) + "s");
}

// --------------------------------------------------------------- 2
void criterion_knn_oracle() {
    const auto start = Clock::now();

    std::mt19937_64 rng(777);
    std::normal_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    std::size_t query_sets = 0;

    for (std::size_t dim : {2u, 8u, 32u}) {
        for (std::size_t m : {1u, 3u, 10u}) {
            for (int set = 0; set < 12; ++set) {
                std::vector<std::vector<double>> points(1000, std::vector<double>(dim));
                for (auto& p : points)
                    for (auto& v : p) v = unit(rng);
                ++query_sets;
                for (int q = 0; q < 10; ++q) {
                    std::vector<double> query(dim);
                    for (auto& v : query) v = unit(rng);
                    const double fast = mean_knn_distance(query, points, m);
                    const double slow = knn_oracle(query, points, m);
                    worst = std::max(worst, std::abs(fast - slow));
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    report(2, "production kNN equals the brute-force oracle",
           worst <= 1e-12 && query_sets >= 100 && elapsed < 30.0,
           "max_diff=" + fmt(worst) + " over " + std::to_string(query_sets) + " query sets, " +
               fmt(elapsed) + "s");
}

// ------------------------------------------------------------- 3+4
struct BenchmarkOutcome {
    EvalReport latent;
    EvalReport geographic;
    double seconds = 0.0;
};

BenchmarkOutcome run_default_benchmark() {
    const auto start = Clock::now();

    SynthConfig synth;
    synth.n_train = 2000;
    synth.n_test = 500;
    synth.seed = 42;
    const SynthResult data = generate(synth);

    VaeConfig cfg;
    cfg.input_dim = data.train.arity();
    VaeModel model = init_model(cfg);
    model.scaler = fit_scaler(data.train);
    const Dataset train = apply_scaler(model.scaler, data.train);
    const Dataset test = apply_scaler(model.scaler, data.test);
    fit(model, train);

    const LatentSet train_ls = project(model, train);
    const LatentSet test_ls = project(model, test);
    const ReliablePartition part = partition_reliable(train_ls);

    BenchmarkOutcome out;
    const ConfidenceReport latent =
        score(Space::Latent, train, train_ls, test, test_ls, part, 3);
    out.latent = build_report(latent, test_ls, 0.2);
    const ConfidenceReport geo =
        score(Space::Geographic, train, train_ls, test, test_ls, part, 3);
    out.geographic = build_report(geo, test_ls, 0.2);
    out.seconds = seconds_since(start);
    return out;
}

void criterion_directional(const BenchmarkOutcome& bench) {
    const EvalReport& r = bench.latent;
    const bool corr_ok = r.correlation.has_value() && *r.correlation >= 0.25;
    const bool order_ok =
        r.mae_most_reliable < r.overall_mae && r.overall_mae < r.mae_most_unreliable;
    const bool time_ok = bench.seconds < 300.0;
    report(3, "latent confidence tracks the error on the synthetic benchmark",
           corr_ok && order_ok && time_ok,
           "r=" + (r.correlation ? fmt(*r.correlation) : std::string("undefined")) +
               ", mae " + fmt(r.mae_most_reliable) + " < " + fmt(r.overall_mae) + " < " +
               fmt(r.mae_most_unreliable) + ", " + fmt(bench.seconds) + "s");
}

void criterion_baseline(const BenchmarkOutcome& bench) {
    const bool latent_defined = bench.latent.correlation.has_value();
    const bool geo_defined = bench.geographic.correlation.has_value();
    const double geo_r = geo_defined ? *bench.geographic.correlation : 0.0;
    const double latent_r = latent_defined ? *bench.latent.correlation : 0.0;
    report(4, "geographic distance stays near-null and below latent",
           geo_defined && latent_defined && std::abs(geo_r) < 0.15 && geo_r < latent_r,
           "geo r=" + fmt(geo_r) + " vs latent r=" + fmt(latent_r));
}

// --------------------------------------------------------------- 5
void criterion_unit_fidelity() {
    bool ok = true;
    std::string detail;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    };

    expect(kl_divergence({0.0, 0.0}, {0.0, 0.0}) == 0.0, "kl zero");
    expect(approx(kl_divergence({1.0}, {0.0}), 0.5), "kl half");
    expect(approx(kl_divergence({0.0}, {std::log(2.0)}), 0.5 * (2.0 - 1.0 - std::log(2.0))),
           "kl log2");

    expect(approx(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0),
           "pearson +1");
    expect(approx(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{6, 4, 2}), -1.0),
           "pearson -1");
    expect(approx(*pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 5}),
                  5.5 / std::sqrt(5.0 * 8.75)),
           "pearson hand sums");

    expect(mean_knn_distance({0.0, 0.0}, {{0.0, 0.0}}, 1) == 0.0, "knn coincident");
    expect(approx(mean_knn_distance({0.0, 0.0},
                                    {{0.0, 1.0}, {3.0, 4.0}, {6.0, 8.0}, {5.0, 12.0}}, 3),
                  (1.0 + 5.0 + 10.0) / 3.0),
           "knn 16/3");
    expect(approx(mean_knn_distance({0.0, 0.0}, {{0.0, 3.0}, {4.0, 0.0}}, 5), 3.5),
           "knn fallback");

    {
        LatentSet train;
        train.ids = {"a", "b", "c"};
        train.points = {{0.0}, {0.0}, {0.0}};
        train.predictions = {0.0, 0.0, 0.0};
        train.errors = std::vector<double>{2.0, 4.0, 6.0};
        const ReliablePartition part = partition_reliable(train);
        expect(approx(part.threshold, 4.0), "partition threshold");
        expect(part.plus_indices == std::vector<std::size_t>{0, 1}, "partition plus");
        expect(part.minus_indices == std::vector<std::size_t>{2}, "partition minus");

        train.errors = std::vector<double>{3.0, 3.0, 3.0};
        const ReliablePartition equal = partition_reliable(train);
        expect(equal.plus_indices.size() == 3 && equal.minus_indices.empty(),
               "partition all-equal boundary");
    }

    expect(approx(tail_mae(std::vector<double>{1, 9}, std::vector<double>{0.1, 7}, 0.5,
                           Tail::Lowest),
                  0.1),
           "tail lowest");
    expect(approx(tail_mae(std::vector<double>{1, 9}, std::vector<double>{0.1, 7}, 0.5,
                           Tail::Highest),
                  7.0),
           "tail highest");
    {
        std::vector<double> scores(10), errors(10);
        for (std::size_t i = 0; i < 10; ++i) {
            scores[i] = static_cast<double>(i);
            errors[i] = static_cast<double>(10 * i);
        }
        expect(approx(tail_mae(scores, errors, 0.2, Tail::Lowest), 5.0), "tail floor rule low");
        expect(approx(tail_mae(scores, errors, 0.2, Tail::Highest), 85.0), "tail floor rule high");
        expect(approx(tail_mae(std::vector<double>{5, 5, 5, 5}, std::vector<double>{1, 2, 3, 4},
                               0.5, Tail::Lowest),
                      1.5),
               "tail stable ties");
    }

    report(5, "tagged unit examples hold to 1e-9", ok, ok ? "" : detail);
}

// --------------------------------------------------------------- 6
int run_cli(const std::string& args) {
    const std::string cmd = std::string(LATCONF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism() {
    const auto start = Clock::now();
    const std::filesystem::path base =
        std::filesystem::temp_directory_path() / ("latconf_accept_" + std::to_string(::getpid()));
    std::filesystem::remove_all(base);

    bool ran_ok = true;
    for (const char* run : {"a", "b"}) {
        const std::filesystem::path dir = base / run;
        std::filesystem::create_directories(dir);
        const std::string data = (dir / "d.csv").string();
        const std::string model = (dir / "m.bin").string();
        ran_ok = ran_ok &&
                 run_cli("synth --out " + data + " --seed 42 --n-train 400 --n-test 120") == 0;
        ran_ok = ran_ok && run_cli("train --data " + data + " --model-out " + model +
                                   " --epochs 25 --seed 7 --history-out " +
                                   (dir / "h.csv").string()) == 0;
        ran_ok = ran_ok && run_cli("score --model " + model + " --data " + data + " --out " +
                                   (dir / "s.csv").string() + " --space latent") == 0;
        ran_ok = ran_ok && run_cli("eval --scores " + (dir / "s.csv").string() + " --model " +
                                   model + " --data " + data + " --out " +
                                   (dir / "r.txt").string()) == 0;
    }

    bool identical = ran_ok;
    std::string first_diff;
    if (ran_ok) {
        for (const char* name : {"d.csv", "d.meta.csv", "m.bin", "h.csv", "s.csv", "r.txt"}) {
            if (slurp(base / "a" / name) != slurp(base / "b" / name)) {
                identical = false;
                first_diff = name;
                break;
            }
        }
    }
    std::filesystem::remove_all(base);
    report(6, "repeated pipeline runs are byte-identical",
           ran_ok && identical,
           ran_ok ? (identical ? fmt(seconds_since(start)) + "s"
                               : "first differing file: " + first_diff)
                  : "pipeline run failed");
}

// --------------------------------------------------------------- 7
void criterion_persistence() {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() /
        ("latconf_model_" + std::to_string(::getpid()) + ".bin");

    VaeConfig cfg;
    cfg.input_dim = 12;
    cfg.encoder_hidden = {24, 16};
    cfg.latent_dim = 6;
    cfg.decoder_hidden = {16, 24};
    cfg.seed = 31;
    VaeModel m = init_model(cfg);
    m.scaler.means.assign(12, 0.25);
    m.scaler.stds.assign(12, 1.5);

    std::vector<double> before, after;
    std::mt19937_64 rng(131);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> inputs(100, std::vector<double>(12));
    for (auto& x : inputs)
        for (auto& v : x) v = unit(rng);

    for (const auto& x : inputs) before.push_back(predict(m, x));
    save_model(m, path.string());
    const VaeModel loaded = load_model(path.string());
    for (const auto& x : inputs) after.push_back(predict(loaded, x));
    std::filesystem::remove(path);

    bool identical = true;
    for (std::size_t i = 0; i < before.size(); ++i) identical = identical && before[i] == after[i];
    report(7, "save/load round-trip predicts bit-identically", identical,
           identical ? "100 inputs" : "prediction drift detected");
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_knn_oracle();
    const BenchmarkOutcome bench = run_default_benchmark();
    criterion_directional(bench);
    criterion_baseline(bench);
    criterion_unit_fidelity();
    criterion_determinism();
    criterion_persistence();

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed" << std::endl;
        return 1;
    }
    std::cout << "all acceptance criteria passed" << std::endl;
    return 0;
}
