#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latconf/dataset.hpp"

namespace latconf {

enum class Activation { Tanh, Softplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct VaeConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> encoder_hidden{64, 32};
    std::size_t latent_dim = 8;
    std::vector<std::size_t> decoder_hidden{32, 64};
    Activation activation = Activation::Tanh;
    double kl_weight = 1e-3;
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

// Fully connected layer, weights row-major (out x in).
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Encoder stack -> mu/logvar heads -> decoder stack -> scalar output
// head; the predictor is decode(mu(encode(x))). The scaler that
// standardized the training features travels with the model.
struct VaeModel {
    VaeConfig config;
    std::vector<DenseLayer> encoder;
    DenseLayer mu_head;
    DenseLayer logvar_head;
    std::vector<DenseLayer> decoder;
    DenseLayer out_head;
    Scaler scaler;
    std::uint32_t format_version = kModelFormatVersion;
};

struct TrainHistory {
    std::vector<double> total;
    std::vector<double> regression;
    std::vector<double> kl;

    std::size_t epochs() const { return total.size(); }
};

// Rows already standardized with the model's scaler; targets raw counts.
struct Batch {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
};

struct LossParts {
    double total = 0.0;
    double regression = 0.0;
    double kl = 0.0;
};

// Glorot-uniform weights, zero biases, deterministic per cfg.seed.
VaeModel init_model(const VaeConfig& cfg);

std::pair<std::vector<double>, std::vector<double>> encode(const VaeModel& m,
                                                           const std::vector<double>& x);

// z = mu + exp(logvar / 2) * noise
std::vector<double> sample_latent(const std::vector<double>& mu, const std::vector<double>& logvar,
                                  const std::vector<double>& noise);

double decode(const VaeModel& m, const std::vector<double>& z);

// Deterministic inference: decode at the posterior mean.
double predict(const VaeModel& m, const std::vector<double>& x);

// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar) against the unit Gaussian prior.
double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar);

// regression = mean squared error, kl = mean KL over the batch,
// total = regression + kl_weight * kl. One noise vector per row.
LossParts loss(const VaeModel& m, const Batch& batch,
               const std::vector<std::vector<double>>& noise);

// Adam on shuffled mini-batches; epochs/batch size/seed come from
// m.config. Throws if the loss goes non-finite, naming epoch and batch.
TrainHistory fit(VaeModel& m, const Dataset& scaled_train);

// Total number of scalar parameters, declaration order: encoder
// layers, mu head, logvar head, decoder layers, output head; weights
// before biases within a layer.
std::size_t param_count(const VaeModel& m);
double& param_ref(VaeModel& m, std::size_t flat_index);

// d(total)/d(theta) for every parameter, flat, same order as param_ref.
std::vector<double> analytic_gradients(const VaeModel& m, const Batch& batch,
                                       const std::vector<std::vector<double>>& noise);

// Max relative error of `grads` against central finite differences on
// probe_count randomly chosen parameters (step 1e-5, denominator
// max(|analytic|, |numeric|, 1e-8)).
double fd_max_rel_error(VaeModel& m, const Batch& batch,
                        const std::vector<std::vector<double>>& noise,
                        const std::vector<double>& grads, std::size_t probe_count,
                        std::uint64_t probe_seed);

double grad_check(VaeModel& m, const Batch& batch,
                  const std::vector<std::vector<double>>& noise, std::size_t probe_count,
                  std::uint64_t probe_seed = 1);

// Binary little-endian container: "VAEC" magic, format version, config,
// scaler, then the layer parameters in declaration order.
void save_model(const VaeModel& m, const std::string& path);
VaeModel load_model(const std::string& path);

}  // namespace latconf
