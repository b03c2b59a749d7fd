#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "latconf/confidence.hpp"

namespace latconf {

struct EvalReport {
    std::size_t n = 0;
    double overall_mae = 0.0;
    double mae_most_reliable = 0.0;
    double mae_most_unreliable = 0.0;
    double fraction = 0.2;
    std::optional<double> correlation;  // absent when either side has zero variance
    Space space = Space::Latent;
    std::size_t m = 3;
    double threshold = 0.0;
};

// Sample Pearson coefficient; nullopt when either vector is constant.
std::optional<double> pearson(std::span<const double> c, std::span<const double> e);

double mae(std::span<const double> pred, std::span<const double> y);

enum class Tail { Lowest, Highest };

// MAE over the floor(fraction * n) rows with the lowest (most
// reliable) or highest (most unreliable) scores. Ties break on the
// original index, so row order is reproducible.
double tail_mae(std::span<const double> scores, std::span<const double> errors, double fraction,
                Tail tail);

// conf ids must align with test ids row by row; test must carry errors.
EvalReport build_report(const ConfidenceReport& conf, const LatentSet& test, double fraction);

// key=value lines, one metric per line
std::string format_report(const EvalReport& r);

std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

}  // namespace latconf
