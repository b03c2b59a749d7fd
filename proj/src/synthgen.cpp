#include "latconf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace latconf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// One sinusoid-plus-linear contribution to the target surface.
struct SurfaceTerm {
    double amplitude = 0.0;
    std::vector<double> frequency;
    double phase = 0.0;
    std::vector<double> slope;
};

double surface_value(const std::vector<SurfaceTerm>& terms, const std::vector<double>& x,
                     double offset) {
    double g = offset;
    for (const SurfaceTerm& t : terms) {
        double dot_f = 0.0, dot_s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot_f += t.frequency[i] * x[i];
            dot_s += t.slope[i] * x[i];
        }
        g += t.amplitude * std::sin(dot_f + t.phase) + dot_s;
    }
    return g;
}

// EO-flavored column names for the usual arity, generic beyond.
std::string feature_name(std::size_t i) {
    static const char* names[12] = {"lst_day", "lst_night", "ndvi",  "ndwi",
                                    "ndbi",    "precip",    "elev",  "slope",
                                    "aspect",  "dist_water", "builtup", "humidity"};
    if (i < 12) return names[i];
    return "feat_" + std::to_string(i);
}

}  // namespace

void SynthConfig::validate() const {
    if (n_train < 1 || n_test < 1) throw std::runtime_error("synth: n_train and n_test must be >= 1");
    if (n_features < 1) throw std::runtime_error("synth: n_features must be >= 1");
    if (n_clusters < 1) throw std::runtime_error("synth: n_clusters must be >= 1");
    if (shifted_cluster_fraction < 0.0 || shifted_cluster_fraction > 1.0) {
        throw std::runtime_error("synth: shifted_cluster_fraction must be in [0, 1]");
    }
    if (noise_low < 0.0 || noise_high < 0.0 || noise_low > noise_high) {
        throw std::runtime_error("synth: need 0 <= noise_low <= noise_high");
    }
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();

    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    const std::size_t n_base = cfg.n_clusters;
    const std::size_t n_shifted =
        cfg.shifted_cluster_fraction > 0.0 ? std::max<std::size_t>(1, n_base / 2) : 0;
    const std::size_t n_all = n_base + n_shifted;

    // Cluster centers. Shifted clusters sit wider so they are genuinely
    // off the training manifold.
    std::vector<std::vector<double>> centers(n_all, std::vector<double>(cfg.n_features));
    for (std::size_t c = 0; c < n_all; ++c) {
        const double spread = c < n_base ? 2.0 : 4.0;
        for (double& v : centers[c]) v = spread * unit(rng);
    }

    // Target surface: one sinusoid-plus-linear term per cluster, all
    // evaluated at every x, so g is a fixed smooth function of the
    // features alone.
    std::vector<SurfaceTerm> terms(n_all);
    const double slope_scale = 2.0 / std::sqrt(static_cast<double>(cfg.n_features));
    for (SurfaceTerm& t : terms) {
        t.amplitude = 10.0 + 20.0 * uni01(rng);
        t.frequency.resize(cfg.n_features);
        double norm = 0.0;
        for (double& v : t.frequency) {
            v = unit(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : t.frequency) v = norm > 0.0 ? 0.4 * v / norm : 0.0;
        t.phase = 2.0 * std::numbers::pi * uni01(rng);
        t.slope.resize(cfg.n_features);
        for (double& v : t.slope) v = slope_scale * (2.0 * uni01(rng) - 1.0);
    }
    const double offset = 80.0;

    // Planar grid of trap-site cells; the cluster -> cell map is drawn
    // without regard to shifted status, so geography carries no signal
    // about the noise regime.
    const std::size_t side =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_base))));
    std::vector<std::size_t> cell_of(n_all);
    for (std::size_t c = 0; c < n_base; ++c) cell_of[c] = c;
    std::shuffle(cell_of.begin(), cell_of.begin() + static_cast<std::ptrdiff_t>(n_base), rng);
    std::uniform_int_distribution<std::size_t> any_cell(0, n_base - 1);
    for (std::size_t c = n_base; c < n_all; ++c) cell_of[c] = any_cell(rng);

    const double lat0 = 45.0, lon0 = 11.0, spacing = 0.5;

    SynthResult result;
    result.train.feature_names.resize(cfg.n_features);
    for (std::size_t i = 0; i < cfg.n_features; ++i) {
        result.train.feature_names[i] = feature_name(i);
    }
    result.test.feature_names = result.train.feature_names;

    std::uniform_int_distribution<std::size_t> base_pick(0, n_base - 1);
    std::uniform_int_distribution<std::size_t> shifted_pick(n_base, n_all == n_base ? n_base : n_all - 1);

    std::size_t serial = 0;
    auto emit_row = [&](Dataset& out, std::size_t cluster, const Date& date) {
        Observation o;
        char idbuf[24];
        std::snprintf(idbuf, sizeof(idbuf), "obs_%06zu", ++serial);
        o.id = idbuf;

        o.features.resize(cfg.n_features);
        for (std::size_t i = 0; i < cfg.n_features; ++i) {
            o.features[i] = centers[cluster][i] + unit(rng);
        }
        const double g = surface_value(terms, o.features, offset);

        const bool shifted = cluster >= n_base;
        const double noise_std = shifted ? cfg.noise_high : cfg.noise_low;
        o.target = std::max(0.0, g + noise_std * unit(rng));

        const std::size_t cell = cell_of[cluster];
        o.lat = lat0 + static_cast<double>(cell / side) * spacing + 0.05 * unit(rng);
        o.lon = lon0 + static_cast<double>(cell % side) * spacing + 0.05 * unit(rng);
        o.date = date;

        out.observations.push_back(std::move(o));
        result.meta.push_back({out.observations.back().id, cluster, shifted, noise_std});
        result.true_values.push_back(g);
    };

    for (std::size_t i = 0; i < cfg.n_train; ++i) {
        Date d{2010 + static_cast<int>(i % 11), 1 + static_cast<int>((i / 11) % 12),
               1 + static_cast<int>((i / 132) % 28)};
        emit_row(result.train, base_pick(rng), d);
    }

    // Exact shifted-row count, positions shuffled.
    const std::size_t n_shift_rows =
        n_shifted == 0
            ? 0
            : static_cast<std::size_t>(std::lround(cfg.shifted_cluster_fraction *
                                                   static_cast<double>(cfg.n_test)));
    std::vector<char> shifted_row(cfg.n_test, 0);
    std::fill(shifted_row.begin(), shifted_row.begin() + static_cast<std::ptrdiff_t>(n_shift_rows),
              1);
    std::shuffle(shifted_row.begin(), shifted_row.end(), rng);

    for (std::size_t j = 0; j < cfg.n_test; ++j) {
        Date d{2021, 1 + static_cast<int>(j % 12), 1 + static_cast<int>((j / 12) % 28)};
        const std::size_t cluster = shifted_row[j] ? shifted_pick(rng) : base_pick(rng);
        emit_row(result.test, cluster, d);
    }

    validate(result.train);
    validate(result.test);
    return result;
}

void write_meta_csv(const std::vector<SynthMetaRow>& meta, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "id,cluster,shifted,noise_std\n";
    for (const SynthMetaRow& row : meta) {
        out << row.id << ',' << row.cluster << ',' << (row.shifted ? 1 : 0) << ','
            << format_double(row.noise_std) << '\n';
    }
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

}  // namespace latconf
