#include "latconf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace latconf {

namespace {

bool is_leap(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
    static constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return lengths[month - 1];
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_double_cell(const std::string& cell, const std::string& column, std::size_t row) {
    if (cell.empty()) {
        throw std::runtime_error("row " + std::to_string(row) + ": empty cell in column '" + column + "'");
    }
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw std::runtime_error("row " + std::to_string(row) + ": cannot parse '" + cell +
                                 "' in column '" + column + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw std::runtime_error("row " + std::to_string(row) + ": non-finite value in column '" +
                                 column + "'");
    }
    return value;
}

}  // namespace

bool Date::valid() const {
    if (year < 1 || month < 1 || month > 12 || day < 1) return false;
    return day <= days_in_month(year, month);
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse(const std::string& text) {
    auto fail = [&]() -> Date {
        throw std::runtime_error("malformed date '" + text + "', expected YYYY-MM-DD");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return fail();
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (text[i] < '0' || text[i] > '9') return fail();
    }
    Date d;
    d.year = std::stoi(text.substr(0, 4));
    d.month = std::stoi(text.substr(5, 2));
    d.day = std::stoi(text.substr(8, 2));
    if (!d.valid()) return fail();
    return d;
}

bool Dataset::labeled() const {
    return std::all_of(observations.begin(), observations.end(),
                       [](const Observation& o) { return o.target.has_value(); });
}

std::vector<double> Dataset::targets() const {
    std::vector<double> out;
    out.reserve(observations.size());
    for (const Observation& o : observations) {
        if (!o.target) throw std::runtime_error("dataset is not fully labeled");
        out.push_back(*o.target);
    }
    return out;
}

void validate(const Dataset& d) {
    std::unordered_set<std::string> seen;
    seen.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Observation& o = d.observations[i];
        const std::string where = "row " + std::to_string(i + 1);
        if (o.id.empty()) throw std::runtime_error(where + ": empty id");
        if (!seen.insert(o.id).second) {
            throw std::runtime_error(where + ": duplicate id '" + o.id + "'");
        }
        if (!std::isfinite(o.lat) || o.lat < -90.0 || o.lat > 90.0) {
            throw std::runtime_error(where + ": lat out of range [-90, 90]");
        }
        if (!std::isfinite(o.lon) || o.lon < -180.0 || o.lon > 180.0) {
            throw std::runtime_error(where + ": lon out of range [-180, 180]");
        }
        if (!o.date.valid()) throw std::runtime_error(where + ": invalid date");
        if (o.features.size() != d.arity()) {
            throw std::runtime_error(where + ": expected " + std::to_string(d.arity()) +
                                     " features, got " + std::to_string(o.features.size()));
        }
        for (std::size_t f = 0; f < o.features.size(); ++f) {
            if (!std::isfinite(o.features[f])) {
                throw std::runtime_error(where + ": non-finite value in column '" +
                                         d.feature_names[f] + "'");
            }
        }
        if (o.target) {
            if (!std::isfinite(*o.target) || *o.target < 0.0) {
                throw std::runtime_error(where + ": target must be a finite non-negative count");
            }
        }
    }
}

Dataset load_csv(const std::string& path, bool require_target) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': empty file, header required");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_line(line);
    auto require_column = [&](std::size_t idx, const std::string& name) {
        if (idx >= header.size() || header[idx] != name) {
            throw std::runtime_error("'" + path + "': missing required column '" + name +
                                     "' (expected at position " + std::to_string(idx + 1) + ")");
        }
    };
    require_column(0, "id");
    require_column(1, "lat");
    require_column(2, "lon");
    require_column(3, "date");

    bool has_target = !header.empty() && header.back() == "target";
    if (require_target && !has_target) {
        throw std::runtime_error("'" + path + "': missing required column 'target'");
    }
    const std::size_t n_fixed = 4 + (has_target ? 1 : 0);
    if (header.size() < n_fixed + 1) {
        throw std::runtime_error("'" + path + "': at least one feature column required");
    }

    Dataset d;
    d.feature_names.assign(header.begin() + 4, header.end() - (has_target ? 1 : 0));

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " cells, got " +
                                     std::to_string(cells.size()));
        }
        Observation o;
        o.id = cells[0];
        o.lat = parse_double_cell(cells[1], "lat", row);
        o.lon = parse_double_cell(cells[2], "lon", row);
        try {
            o.date = Date::parse(cells[3]);
        } catch (const std::exception& e) {
            throw std::runtime_error("row " + std::to_string(row) + ": " + e.what());
        }
        o.features.reserve(d.arity());
        for (std::size_t f = 0; f < d.arity(); ++f) {
            o.features.push_back(parse_double_cell(cells[4 + f], d.feature_names[f], row));
        }
        if (has_target) o.target = parse_double_cell(cells.back(), "target", row);
        d.observations.push_back(std::move(o));
    }

    validate(d);
    return d;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_csv(const Dataset& d, const std::string& path) {
    const bool labeled = d.labeled();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");

    out << "id,lat,lon,date";
    for (const std::string& name : d.feature_names) out << ',' << name;
    if (labeled) out << ",target";
    out << '\n';

    for (const Observation& o : d.observations) {
        out << o.id << ',' << format_double(o.lat) << ',' << format_double(o.lon) << ','
            << o.date.to_string();
        for (double f : o.features) out << ',' << format_double(f);
        if (labeled) out << ',' << format_double(*o.target);
        out << '\n';
    }
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

SplitResult split_by_date(const Dataset& d, const Date& cutoff) {
    SplitResult r;
    r.train.feature_names = d.feature_names;
    r.test.feature_names = d.feature_names;
    for (const Observation& o : d.observations) {
        (o.date <= cutoff ? r.train : r.test).observations.push_back(o);
    }
    if (r.train.observations.empty()) {
        throw std::runtime_error("split_by_date: no rows on or before " + cutoff.to_string());
    }
    if (r.test.observations.empty()) {
        throw std::runtime_error("split_by_date: no rows after " + cutoff.to_string());
    }
    return r;
}

Scaler fit_scaler(const Dataset& train) {
    if (train.observations.empty()) throw std::runtime_error("fit_scaler: empty dataset");
    const std::size_t arity = train.arity();
    const double n = static_cast<double>(train.size());

    Scaler s;
    s.means.assign(arity, 0.0);
    s.stds.assign(arity, 0.0);
    for (const Observation& o : train.observations) {
        for (std::size_t f = 0; f < arity; ++f) s.means[f] += o.features[f];
    }
    for (std::size_t f = 0; f < arity; ++f) s.means[f] /= n;
    for (const Observation& o : train.observations) {
        for (std::size_t f = 0; f < arity; ++f) {
            const double dev = o.features[f] - s.means[f];
            s.stds[f] += dev * dev;
        }
    }
    for (std::size_t f = 0; f < arity; ++f) {
        s.stds[f] = std::max(std::sqrt(s.stds[f] / n), kStdFloor);
    }
    return s;
}

Dataset apply_scaler(const Scaler& s, const Dataset& d) {
    if (s.means.size() != d.arity()) {
        throw std::runtime_error("apply_scaler: scaler arity " + std::to_string(s.means.size()) +
                                 " does not match dataset arity " + std::to_string(d.arity()));
    }
    Dataset out = d;
    for (Observation& o : out.observations) {
        for (std::size_t f = 0; f < o.features.size(); ++f) {
            o.features[f] = (o.features[f] - s.means[f]) / s.stds[f];
        }
    }
    return out;
}

}  // namespace latconf
