#include "latconf/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace latconf {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

void check_query(const std::vector<double>& q, const std::vector<std::vector<double>>& points,
                 std::size_t m, const char* fn) {
    if (m < 1) throw std::runtime_error(std::string(fn) + ": M must be >= 1");
    if (points.empty()) throw std::runtime_error(std::string(fn) + ": empty reference set");
    for (const auto& p : points) {
        if (p.size() != q.size()) {
            throw std::runtime_error(std::string(fn) + ": query width " +
                                     std::to_string(q.size()) + " does not match point width " +
                                     std::to_string(p.size()));
        }
    }
}

// Representation of one row in the given space.
std::vector<double> representation(Space space, const Dataset& ds, const LatentSet& ls,
                                   std::size_t row) {
    switch (space) {
        case Space::Latent:
            return ls.points[row];
        case Space::Feature:
            return ds.observations[row].features;
        case Space::Geographic:
            return {ds.observations[row].lat, ds.observations[row].lon};
    }
    throw std::runtime_error("score: unknown space");
}

}  // namespace

std::string to_string(Space s) {
    switch (s) {
        case Space::Latent: return "latent";
        case Space::Feature: return "feature";
        case Space::Geographic: return "geographic";
    }
    return "unknown";
}

Space space_from_string(const std::string& name) {
    if (name == "latent" || name == "ls") return Space::Latent;
    if (name == "feature" || name == "fs") return Space::Feature;
    if (name == "geographic" || name == "geo" || name == "gs") return Space::Geographic;
    throw std::runtime_error("unknown space '" + name + "' (expected latent, feature or geo)");
}

LatentSet project(const VaeModel& m, const Dataset& scaled) {
    if (scaled.arity() != m.config.input_dim) {
        throw std::runtime_error("project: dataset arity " + std::to_string(scaled.arity()) +
                                 " does not match model input_dim " +
                                 std::to_string(m.config.input_dim));
    }
    LatentSet ls;
    ls.ids.reserve(scaled.size());
    ls.points.reserve(scaled.size());
    ls.predictions.reserve(scaled.size());
    const bool labeled = scaled.labeled();
    if (labeled) ls.errors.emplace();

    for (const Observation& o : scaled.observations) {
        auto [mu, logvar] = encode(m, o.features);
        const double yhat = decode(m, mu);
        ls.ids.push_back(o.id);
        ls.points.push_back(std::move(mu));
        ls.predictions.push_back(yhat);
        if (labeled) ls.errors->push_back(std::abs(yhat - *o.target));
    }
    return ls;
}

ReliablePartition partition_reliable(const LatentSet& train, ThresholdRule rule) {
    if (rule != ThresholdRule::MeanError) {
        throw std::runtime_error("partition_reliable: unknown threshold rule");
    }
    if (!train.errors || train.errors->empty()) {
        throw std::runtime_error("partition_reliable: training errors required");
    }
    const std::vector<double>& errors = *train.errors;

    ReliablePartition part;
    double sum = 0.0;
    for (double e : errors) sum += e;
    part.threshold = sum / static_cast<double>(errors.size());

    for (std::size_t i = 0; i < errors.size(); ++i) {
        (errors[i] <= part.threshold ? part.plus_indices : part.minus_indices).push_back(i);
    }
    if (part.plus_indices.empty()) {
        throw std::runtime_error("partition_reliable: reliable set is empty");
    }
    return part;
}

double mean_knn_distance(const std::vector<double>& q,
                         const std::vector<std::vector<double>>& points, std::size_t m) {
    check_query(q, points, m, "mean_knn_distance");
    const std::size_t k = std::min(m, points.size());

    std::vector<double> dists;
    dists.reserve(points.size());
    for (const auto& p : points) dists.push_back(euclidean(q, p));

    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     dists.end());
    // ascending sum over the selected k, so oracle and production add in
    // the same order
    std::sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += dists[i];
    return sum / static_cast<double>(k);
}

double knn_oracle(const std::vector<double>& q, const std::vector<std::vector<double>>& points,
                  std::size_t m) {
    check_query(q, points, m, "knn_oracle");
    const std::size_t k = std::min(m, points.size());

    std::vector<double> dists;
    dists.reserve(points.size());
    for (const auto& p : points) dists.push_back(euclidean(q, p));
    std::sort(dists.begin(), dists.end());

    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += dists[i];
    return sum / static_cast<double>(k);
}

ConfidenceReport score(Space space, const Dataset& train_ds, const LatentSet& train_ls,
                       const Dataset& test_ds, const LatentSet& test_ls,
                       const ReliablePartition& part, std::size_t m, bool use_all_train,
                       unsigned threads) {
    if (m < 1) throw std::runtime_error("score: M must be >= 1");
    if (train_ds.size() != train_ls.size()) {
        throw std::runtime_error("score: train dataset and latent set row counts differ");
    }
    if (test_ds.size() != test_ls.size()) {
        throw std::runtime_error("score: test dataset and latent set row counts differ");
    }

    std::vector<std::size_t> reference_rows;
    if (use_all_train) {
        reference_rows.resize(train_ds.size());
        for (std::size_t i = 0; i < reference_rows.size(); ++i) reference_rows[i] = i;
    } else {
        reference_rows = part.plus_indices;
    }
    if (reference_rows.empty()) throw std::runtime_error("score: empty reference set");

    std::vector<std::vector<double>> reference;
    reference.reserve(reference_rows.size());
    for (std::size_t row : reference_rows) {
        reference.push_back(representation(space, train_ds, train_ls, row));
    }

    ConfidenceReport report;
    report.ids = test_ls.ids;
    report.scores.assign(test_ds.size(), 0.0);
    report.space = space;
    report.m = m;
    report.threshold = part.threshold;
    report.reliable_count = reference_rows.size();
    report.k_used = std::min(m, reference_rows.size());

    auto score_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const std::vector<double> q = representation(space, test_ds, test_ls, j);
            report.scores[j] = mean_knn_distance(q, reference, m);
        }
    };

    const unsigned workers = std::min<unsigned>(std::max(1u, threads),
                                                static_cast<unsigned>(test_ds.size()));
    if (workers <= 1) {
        score_range(0, test_ds.size());
    } else {
        // fixed chunking into disjoint slots keeps results independent of
        // scheduling
        std::vector<std::thread> pool;
        const std::size_t chunk = (test_ds.size() + workers - 1) / workers;
        for (unsigned t = 0; t < workers; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(test_ds.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(score_range, begin, end);
        }
        for (std::thread& th : pool) th.join();
    }
    return report;
}

void write_scores_csv(const ConfidenceReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "id,score,space,M,T,degenerate_k\n";
    for (std::size_t i = 0; i < report.ids.size(); ++i) {
        out << report.ids[i] << ',' << format_double(report.scores[i]) << ','
            << to_string(report.space) << ',' << report.m << ',' << format_double(report.threshold)
            << ',' << report.k_used << '\n';
    }
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

ConfidenceReport read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': empty score file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,score,space,M,T,degenerate_k") {
        throw std::runtime_error("'" + path + "': unexpected score CSV header");
    }

    ConfidenceReport report;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::stringstream ss(line);
        std::string id, score, space, m, t, k;
        if (!std::getline(ss, id, ',') || !std::getline(ss, score, ',') ||
            !std::getline(ss, space, ',') || !std::getline(ss, m, ',') ||
            !std::getline(ss, t, ',') || !std::getline(ss, k)) {
            throw std::runtime_error("'" + path + "': malformed score row " + std::to_string(row));
        }
        report.ids.push_back(id);
        report.scores.push_back(std::stod(score));
        report.space = space_from_string(space);
        report.m = std::stoul(m);
        report.threshold = std::stod(t);
        report.k_used = std::stoul(k);
    }
    if (report.ids.empty()) throw std::runtime_error("'" + path + "': no score rows");
    return report;
}

void write_latent_csv(const LatentSet& ls, const std::vector<double>* targets,
                      const std::string& path) {
    if (targets && targets->size() != ls.size()) {
        throw std::runtime_error("write_latent_csv: target count does not match rows");
    }
    if (targets && (!ls.errors || ls.errors->size() != ls.size())) {
        throw std::runtime_error("write_latent_csv: labeled export requires errors");
    }
    const std::size_t width = ls.points.empty() ? 0 : ls.points.front().size();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "id";
    for (std::size_t d = 0; d < width; ++d) out << ",dim_" << d;
    out << ",prediction";
    if (targets) out << ",target,abs_error";
    out << '\n';

    for (std::size_t i = 0; i < ls.size(); ++i) {
        out << ls.ids[i];
        for (double v : ls.points[i]) out << ',' << format_double(v);
        out << ',' << format_double(ls.predictions[i]);
        if (targets) {
            out << ',' << format_double((*targets)[i]) << ','
                << format_double((*ls.errors)[i]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

}  // namespace latconf
