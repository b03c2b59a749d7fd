#include "latconf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace latconf {

std::optional<double> pearson(std::span<const double> c, std::span<const double> e) {
    if (c.size() != e.size()) throw std::runtime_error("pearson: input lengths differ");
    if (c.size() < 2) throw std::runtime_error("pearson: need at least 2 samples");

    const double n = static_cast<double>(c.size());
    double mean_c = 0.0, mean_e = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        mean_c += c[i];
        mean_e += e[i];
    }
    mean_c /= n;
    mean_e /= n;

    double cov = 0.0, var_c = 0.0, var_e = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double dc = c[i] - mean_c;
        const double de = e[i] - mean_e;
        cov += dc * de;
        var_c += dc * dc;
        var_e += de * de;
    }
    if (var_c == 0.0 || var_e == 0.0) return std::nullopt;
    return cov / std::sqrt(var_c * var_e);
}

double mae(std::span<const double> pred, std::span<const double> y) {
    if (pred.size() != y.size()) throw std::runtime_error("mae: input lengths differ");
    if (pred.empty()) throw std::runtime_error("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - y[i]);
    return sum / static_cast<double>(pred.size());
}

double tail_mae(std::span<const double> scores, std::span<const double> errors, double fraction,
                Tail tail) {
    if (scores.size() != errors.size()) throw std::runtime_error("tail_mae: input lengths differ");
    if (!(fraction > 0.0) || fraction > 0.5) {
        throw std::runtime_error("tail_mae: fraction must be in (0, 0.5]");
    }
    const std::size_t take =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(scores.size())));
    if (take < 1) {
        throw std::runtime_error("tail_mae: fraction * n selects no rows");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double sum = 0.0;
    if (tail == Tail::Lowest) {
        for (std::size_t i = 0; i < take; ++i) sum += errors[order[i]];
    } else {
        for (std::size_t i = scores.size() - take; i < scores.size(); ++i) {
            sum += errors[order[i]];
        }
    }
    return sum / static_cast<double>(take);
}

EvalReport build_report(const ConfidenceReport& conf, const LatentSet& test, double fraction) {
    if (conf.ids.size() != test.ids.size()) {
        throw std::runtime_error("build_report: score and test row counts differ");
    }
    for (std::size_t i = 0; i < conf.ids.size(); ++i) {
        if (conf.ids[i] != test.ids[i]) {
            throw std::runtime_error("build_report: id mismatch at row " + std::to_string(i + 1) +
                                     " ('" + conf.ids[i] + "' vs '" + test.ids[i] + "')");
        }
    }
    if (!test.errors) throw std::runtime_error("build_report: test errors required");

    const std::vector<double>& errors = *test.errors;
    EvalReport r;
    r.n = conf.ids.size();
    r.fraction = fraction;
    r.space = conf.space;
    r.m = conf.m;
    r.threshold = conf.threshold;

    double sum = 0.0;
    for (double e : errors) sum += e;
    r.overall_mae = sum / static_cast<double>(errors.size());
    r.mae_most_reliable = tail_mae(conf.scores, errors, fraction, Tail::Lowest);
    r.mae_most_unreliable = tail_mae(conf.scores, errors, fraction, Tail::Highest);
    r.correlation = pearson(conf.scores, errors);
    return r;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    out << "space=" << to_string(r.space) << '\n';
    out << "n=" << r.n << '\n';
    out << "M=" << r.m << '\n';
    out << "T=" << format_double(r.threshold) << '\n';
    out << "fraction=" << format_double(r.fraction) << '\n';
    out << "overall_mae=" << format_double(r.overall_mae) << '\n';
    out << "mae_most_reliable=" << format_double(r.mae_most_reliable) << '\n';
    out << "mae_most_unreliable=" << format_double(r.mae_most_unreliable) << '\n';
    out << "correlation=" << (r.correlation ? format_double(*r.correlation) : "undefined") << '\n';
    return out.str();
}

std::string report_csv_header() {
    return "space,M,n,T,fraction,overall_mae,mae_most_reliable,mae_most_unreliable,correlation";
}

std::string report_csv_row(const EvalReport& r) {
    std::ostringstream out;
    out << to_string(r.space) << ',' << r.m << ',' << r.n << ',' << format_double(r.threshold)
        << ',' << format_double(r.fraction) << ',' << format_double(r.overall_mae) << ','
        << format_double(r.mae_most_reliable) << ',' << format_double(r.mae_most_unreliable) << ','
        << (r.correlation ? format_double(*r.correlation) : "undefined");
    return out.str();
}

}  // namespace latconf
