#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "latconf/dataset.hpp"

namespace testutil {

// Unique scratch directory, removed when the guard goes out of scope.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("latconf_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small labeled dataset with the given feature columns (row-major).
inline latconf::Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                                     const std::vector<double>& targets) {
    latconf::Dataset d;
    const std::size_t arity = rows.empty() ? 0 : rows.front().size();
    for (std::size_t f = 0; f < arity; ++f) d.feature_names.push_back("f" + std::to_string(f));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        latconf::Observation o;
        o.id = "r" + std::to_string(i);
        o.lat = 45.0;
        o.lon = 11.0;
        o.date = {2015, 1 + static_cast<int>(i % 12), 1};
        o.features = rows[i];
        o.target = targets[i];
        d.observations.push_back(std::move(o));
    }
    return d;
}

}  // namespace testutil
