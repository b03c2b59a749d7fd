#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latconf/dataset.hpp"

namespace latconf {

// Synthetic benchmark: clustered features with a smooth nonlinear
// target surface, low target noise inside the training clusters and
// high noise on test-only (shifted) clusters.
struct SynthConfig {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_features = 12;
    std::size_t n_clusters = 4;
    double shifted_cluster_fraction = 0.3;  // fraction of test rows from clusters absent in train
    double noise_low = 5.0;
    double noise_high = 80.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthMetaRow {
    std::string id;
    std::size_t cluster = 0;
    bool shifted = false;
    double noise_std = 0.0;
};

struct SynthResult {
    Dataset train;
    Dataset test;
    std::vector<SynthMetaRow> meta;    // train rows first, then test rows
    std::vector<double> true_values;   // noise-free target surface, aligned with meta
};

SynthResult generate(const SynthConfig& cfg);

// Sidecar CSV: id,cluster,shifted,noise_std
void write_meta_csv(const std::vector<SynthMetaRow>& meta, const std::string& path);

}  // namespace latconf
