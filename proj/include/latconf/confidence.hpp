#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "latconf/dataset.hpp"
#include "latconf/vae.hpp"

namespace latconf {

// Which coordinates the confidence distance is measured in: the VAE
// latent means, the standardized feature vectors, or raw (lat, lon).
enum class Space { Latent, Feature, Geographic };

std::string to_string(Space s);
Space space_from_string(const std::string& name);

// Per-observation latent means with predictions; absolute errors
// present only for labeled data.
struct LatentSet {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> points;
    std::vector<double> predictions;
    std::optional<std::vector<double>> errors;

    std::size_t size() const { return ids.size(); }
};

// Train indices split by absolute error against the threshold;
// boundary ties (error == threshold) are reliable.
struct ReliablePartition {
    std::vector<std::size_t> plus_indices;
    std::vector<std::size_t> minus_indices;
    double threshold = 0.0;
};

enum class ThresholdRule { MeanError };

struct ConfidenceReport {
    std::vector<std::string> ids;
    std::vector<double> scores;
    Space space = Space::Latent;
    std::size_t m = 3;
    double threshold = 0.0;
    std::size_t reliable_count = 0;
    std::size_t k_used = 0;  // min(m, reliable_count)

    bool degenerate() const { return k_used < m; }
};

// Encode every row at its posterior mean and decode a prediction.
// Expects data standardized with the model's scaler.
LatentSet project(const VaeModel& m, const Dataset& scaled);

ReliablePartition partition_reliable(const LatentSet& train,
                                     ThresholdRule rule = ThresholdRule::MeanError);

// Mean Euclidean distance from q to its k = min(m, |points|) nearest
// rows. Exact; nth_element selection.
double mean_knn_distance(const std::vector<double>& q,
                         const std::vector<std::vector<double>>& points, std::size_t m);

// Brute-force reference: all distances, full sort, average of the
// first k. Must agree with mean_knn_distance to 1e-12.
double knn_oracle(const std::vector<double>& q, const std::vector<std::vector<double>>& points,
                  std::size_t m);

// Scores every test row against the reliable train subset in the
// chosen space. The subset is the same whatever the space, so the
// representation is the only variable. use_all_train widens the
// reference set to every train row.
ConfidenceReport score(Space space, const Dataset& train_ds, const LatentSet& train_ls,
                       const Dataset& test_ds, const LatentSet& test_ls,
                       const ReliablePartition& part, std::size_t m, bool use_all_train = false,
                       unsigned threads = 1);

// id,score,space,M,T,degenerate_k
void write_scores_csv(const ConfidenceReport& report, const std::string& path);
ConfidenceReport read_scores_csv(const std::string& path);

// id,dim_0..dim_{L-1},prediction[,target,abs_error]
void write_latent_csv(const LatentSet& ls, const std::vector<double>* targets,
                      const std::string& path);

}  // namespace latconf
