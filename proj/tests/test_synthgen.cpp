#include <doctest.h>

#include <cmath>
#include <set>

#include "latconf/synthgen.hpp"
#include "test_util.hpp"

using namespace latconf;
using testutil::TempDir;

namespace {

SynthConfig quick_config(std::uint64_t seed = 1) {
    SynthConfig cfg;
    cfg.n_train = 300;
    cfg.n_test = 100;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("generate is deterministic per seed") {
    const SynthResult a = generate(quick_config(42));
    const SynthResult b = generate(quick_config(42));
    const SynthResult c = generate(quick_config(43));

    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train.observations[i].id == b.train.observations[i].id);
        CHECK(a.train.observations[i].features == b.train.observations[i].features);
        CHECK(*a.train.observations[i].target == *b.train.observations[i].target);
        CHECK(a.train.observations[i].lat == b.train.observations[i].lat);
    }
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test.observations[i].features == b.test.observations[i].features);
    }
    CHECK(a.true_values == b.true_values);

    bool any_differs = false;
    for (std::size_t i = 0; i < a.train.size() && !any_differs; ++i) {
        any_differs = a.train.observations[i].features != c.train.observations[i].features;
    }
    CHECK(any_differs);
}

TEST_CASE("emitted rows pass dataset validation and dates split cleanly") {
    const SynthResult r = generate(quick_config(7));
    CHECK_NOTHROW(validate(r.train));
    CHECK_NOTHROW(validate(r.test));
    CHECK(r.train.size() == 300);
    CHECK(r.test.size() == 100);
    CHECK(r.meta.size() == 400);
    CHECK(r.true_values.size() == 400);

    Dataset all;
    all.feature_names = r.train.feature_names;
    all.observations = r.train.observations;
    all.observations.insert(all.observations.end(), r.test.observations.begin(),
                            r.test.observations.end());
    const SplitResult split = split_by_date(all, Date{2020, 12, 31});
    CHECK(split.train.size() == r.train.size());
    CHECK(split.test.size() == r.test.size());
}

TEST_CASE("zero shift fraction keeps train and test mixtures identical") {
    SynthConfig cfg = quick_config(9);
    cfg.shifted_cluster_fraction = 0.0;
    const SynthResult r = generate(cfg);

    std::set<std::size_t> train_clusters, test_clusters;
    for (std::size_t i = 0; i < r.train.size(); ++i) train_clusters.insert(r.meta[i].cluster);
    for (std::size_t i = r.train.size(); i < r.meta.size(); ++i) {
        test_clusters.insert(r.meta[i].cluster);
        CHECK_FALSE(r.meta[i].shifted);
    }
    for (std::size_t c : test_clusters) CHECK(train_clusters.count(c) == 1);
}

TEST_CASE("train rows never come from shifted clusters") {
    const SynthResult r = generate(quick_config(11));
    for (std::size_t i = 0; i < r.train.size(); ++i) {
        CHECK_FALSE(r.meta[i].shifted);
        CHECK(r.meta[i].noise_std == 5.0);
    }
    std::size_t shifted_rows = 0;
    for (std::size_t i = r.train.size(); i < r.meta.size(); ++i) {
        if (r.meta[i].shifted) {
            ++shifted_rows;
            CHECK(r.meta[i].noise_std == 80.0);
        }
    }
    CHECK(shifted_rows == 30);  // round(0.3 * 100)
}

TEST_CASE("shifted rows carry much larger target noise") {
    SynthConfig cfg;
    cfg.n_train = 50;
    cfg.n_test = 2000;
    cfg.seed = 42;
    const SynthResult r = generate(cfg);

    double sq_shifted = 0.0, sq_plain = 0.0, abs_shifted = 0.0, abs_plain = 0.0;
    std::size_t n_shifted = 0, n_plain = 0;
    for (std::size_t j = 0; j < r.test.size(); ++j) {
        const std::size_t row = r.train.size() + j;
        const double residual = *r.test.observations[j].target - r.true_values[row];
        if (r.meta[row].shifted) {
            sq_shifted += residual * residual;
            abs_shifted += std::abs(residual);
            ++n_shifted;
        } else {
            sq_plain += residual * residual;
            abs_plain += std::abs(residual);
            ++n_plain;
        }
    }
    REQUIRE(n_shifted >= 100);
    REQUIRE(n_plain >= 100);
    const double std_shifted = std::sqrt(sq_shifted / static_cast<double>(n_shifted));
    const double std_plain = std::sqrt(sq_plain / static_cast<double>(n_plain));
    CHECK(std_shifted >= 3.0 * std_plain);
    CHECK(abs_shifted / static_cast<double>(n_shifted) >
          abs_plain / static_cast<double>(n_plain));
}

TEST_CASE("meta sidecar CSV has the documented schema") {
    TempDir tmp("meta");
    const SynthResult r = generate(quick_config(3));
    write_meta_csv(r.meta, tmp.file("d.meta.csv"));
    const std::string text = testutil::read_file(tmp.file("d.meta.csv"));
    CHECK(text.rfind("id,cluster,shifted,noise_std\n", 0) == 0);
    CHECK(text.find("obs_000001,") != std::string::npos);
}

TEST_CASE("generate rejects invalid configs") {
    SynthConfig cfg = quick_config();
    cfg.noise_low = 10.0;
    cfg.noise_high = 1.0;
    CHECK_THROWS_AS(generate(cfg), std::runtime_error);

    SynthConfig empty;
    empty.n_train = 0;
    empty.n_test = 10;
    CHECK_THROWS_AS(generate(empty), std::runtime_error);

    SynthConfig frac = quick_config();
    frac.shifted_cluster_fraction = 1.5;
    CHECK_THROWS_AS(generate(frac), std::runtime_error);
}
