#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace latconf {

// Calendar date, ISO-8601 text form YYYY-MM-DD.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    friend auto operator<=>(const Date&, const Date&) = default;

    bool valid() const;
    std::string to_string() const;
    static Date parse(const std::string& text);
};

struct Observation {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    Date date;
    std::vector<double> features;
    std::optional<double> target;  // absent for unlabeled data
};

struct Dataset {
    std::vector<Observation> observations;
    std::vector<std::string> feature_names;

    std::size_t size() const { return observations.size(); }
    std::size_t arity() const { return feature_names.size(); }
    bool labeled() const;

    // Targets in row order. Throws if any row is unlabeled.
    std::vector<double> targets() const;
};

// Per-feature standardization parameters fitted on a training set.
// Population standard deviation, floored at kStdFloor so constant
// columns stay invertible.
struct Scaler {
    std::vector<double> means;
    std::vector<double> stds;
};

inline constexpr double kStdFloor = 1e-8;

// Checks all Dataset invariants (finite features, consistent arity,
// unique ids, coordinate ranges, non-negative targets). Throws on the
// first violation, citing the 1-based data row.
void validate(const Dataset& d);

// CSV schema: id,lat,lon,date,<feature...>,target with a mandatory
// header. When require_target is false a file without a target column
// loads as unlabeled data.
Dataset load_csv(const std::string& path, bool require_target = true);
void write_csv(const Dataset& d, const std::string& path);

struct SplitResult {
    Dataset train;
    Dataset test;
};

// Rows dated <= cutoff go to train, the rest to test. Throws when
// either side ends up empty.
SplitResult split_by_date(const Dataset& d, const Date& cutoff);

Scaler fit_scaler(const Dataset& train);

// (x - mean) / std per feature column; ids, coordinates, dates and
// targets pass through unchanged.
Dataset apply_scaler(const Scaler& s, const Dataset& d);

// Shortest round-trip decimal form of a double, used by every CSV and
// report writer so reruns are byte-identical.
std::string format_double(double v);

}  // namespace latconf
