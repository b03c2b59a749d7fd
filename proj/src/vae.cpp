#include "latconf/vae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
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

// Independent deterministic streams per purpose (0 = init, 1 = training).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(seed ^ (0xD2B74407B1CE6E93ULL * (stream + 1))));
}

double activate(Activation a, double x) {
    if (a == Activation::Tanh) return std::tanh(x);
    // softplus, numerically stable on both tails
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Derivative in terms of the pre-activation.
double activate_grad(Activation a, double pre) {
    if (a == Activation::Tanh) {
        const double t = std::tanh(pre);
        return 1.0 - t * t;
    }
    return 1.0 / (1.0 + std::exp(-pre));
}

void affine_forward(const DenseLayer& l, const std::vector<double>& in, std::vector<double>& out) {
    out.assign(l.out, 0.0);
    const double* w = l.w.data();
    for (std::size_t j = 0; j < l.out; ++j) {
        double acc = l.b[j];
        const double* row = w + j * l.in;
        for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * in[i];
        out[j] = acc;
    }
}

// Per-row forward caches needed by backprop.
struct RowForward {
    std::vector<std::vector<double>> enc_pre;
    std::vector<std::vector<double>> enc_act;
    std::vector<double> mu;
    std::vector<double> logvar;
    std::vector<double> z;
    std::vector<std::vector<double>> dec_pre;
    std::vector<std::vector<double>> dec_act;
    double yhat = 0.0;
};

void forward_row(const VaeModel& m, const std::vector<double>& x, const std::vector<double>& noise,
                 RowForward& fw) {
    const Activation act = m.config.activation;
    const std::vector<double>* cur = &x;
    fw.enc_pre.resize(m.encoder.size());
    fw.enc_act.resize(m.encoder.size());
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
        affine_forward(m.encoder[l], *cur, fw.enc_pre[l]);
        fw.enc_act[l].resize(fw.enc_pre[l].size());
        for (std::size_t j = 0; j < fw.enc_pre[l].size(); ++j) {
            fw.enc_act[l][j] = activate(act, fw.enc_pre[l][j]);
        }
        cur = &fw.enc_act[l];
    }
    affine_forward(m.mu_head, *cur, fw.mu);
    affine_forward(m.logvar_head, *cur, fw.logvar);
    fw.z = sample_latent(fw.mu, fw.logvar, noise);

    const std::vector<double>* dcur = &fw.z;
    fw.dec_pre.resize(m.decoder.size());
    fw.dec_act.resize(m.decoder.size());
    for (std::size_t l = 0; l < m.decoder.size(); ++l) {
        affine_forward(m.decoder[l], *dcur, fw.dec_pre[l]);
        fw.dec_act[l].resize(fw.dec_pre[l].size());
        for (std::size_t j = 0; j < fw.dec_pre[l].size(); ++j) {
            fw.dec_act[l][j] = activate(act, fw.dec_pre[l][j]);
        }
        dcur = &fw.dec_act[l];
    }
    std::vector<double> y;
    affine_forward(m.out_head, *dcur, y);
    fw.yhat = y[0];
}

struct ParamSlot {
    DenseLayer* layer;
    std::size_t w_off;
    std::size_t b_off;
};

std::vector<ParamSlot> param_slots(VaeModel& m) {
    std::vector<ParamSlot> slots;
    std::size_t off = 0;
    auto add = [&](DenseLayer& l) {
        slots.push_back({&l, off, off + l.w.size()});
        off += l.w.size() + l.b.size();
    };
    for (DenseLayer& l : m.encoder) add(l);
    add(m.mu_head);
    add(m.logvar_head);
    for (DenseLayer& l : m.decoder) add(l);
    add(m.out_head);
    return slots;
}

// dpre is the gradient at the affine output; accumulates weight/bias
// gradients and returns the gradient at the affine input.
void backprop_affine(const DenseLayer& l, const std::vector<double>& input,
                     const std::vector<double>& dpre, double* gw, double* gb,
                     std::vector<double>& dinput) {
    dinput.assign(l.in, 0.0);
    for (std::size_t j = 0; j < l.out; ++j) {
        const double dj = dpre[j];
        gb[j] += dj;
        const double* row = l.w.data() + j * l.in;
        double* grow = gw + j * l.in;
        for (std::size_t i = 0; i < l.in; ++i) {
            grow[i] += dj * input[i];
            dinput[i] += row[i] * dj;
        }
    }
}

void check_batch(const VaeModel& m, const Batch& batch,
                 const std::vector<std::vector<double>>& noise) {
    if (batch.x.empty()) throw std::runtime_error("loss: empty batch");
    if (batch.x.size() != batch.y.size() || batch.x.size() != noise.size()) {
        throw std::runtime_error("loss: batch rows, targets and noise must align");
    }
    for (const auto& row : batch.x) {
        if (row.size() != m.config.input_dim) {
            throw std::runtime_error("loss: feature row arity does not match input_dim");
        }
    }
    for (const auto& n : noise) {
        if (n.size() != m.config.latent_dim) {
            throw std::runtime_error("loss: noise width does not match latent_dim");
        }
    }
}

// Forward + loss, optionally accumulating flat gradients.
LossParts loss_impl(const VaeModel& m, const Batch& batch,
                    const std::vector<std::vector<double>>& noise, std::vector<double>* grads) {
    check_batch(m, batch, noise);
    const Activation act = m.config.activation;
    const double beta = m.config.kl_weight;
    const double scale = 1.0 / static_cast<double>(batch.x.size());

    std::vector<ParamSlot> slots;
    if (grads) {
        grads->assign(param_count(m), 0.0);
        slots = param_slots(const_cast<VaeModel&>(m));
    }
    const std::size_t n_enc = m.encoder.size();
    const std::size_t n_dec = m.decoder.size();

    LossParts parts;
    RowForward fw;
    std::vector<double> dvec, dnext;
    for (std::size_t r = 0; r < batch.x.size(); ++r) {
        forward_row(m, batch.x[r], noise[r], fw);
        const double err = fw.yhat - batch.y[r];
        const double kl = kl_divergence(fw.mu, fw.logvar);
        parts.regression += err * err * scale;
        parts.kl += kl * scale;
        if (!grads) continue;

        // output head
        const double dyhat = scale * 2.0 * err;
        const std::vector<double>& dec_in_last = n_dec == 0 ? fw.z : fw.dec_act[n_dec - 1];
        dvec.assign(1, dyhat);
        {
            const ParamSlot& s = slots[n_enc + 2 + n_dec];
            backprop_affine(m.out_head, dec_in_last, dvec, grads->data() + s.w_off,
                            grads->data() + s.b_off, dnext);
        }
        // decoder hidden stack
        for (std::size_t l = n_dec; l-- > 0;) {
            dvec.resize(fw.dec_pre[l].size());
            for (std::size_t j = 0; j < dvec.size(); ++j) {
                dvec[j] = dnext[j] * activate_grad(act, fw.dec_pre[l][j]);
            }
            const std::vector<double>& input = l == 0 ? fw.z : fw.dec_act[l - 1];
            const ParamSlot& s = slots[n_enc + 2 + l];
            backprop_affine(m.decoder[l], input, dvec, grads->data() + s.w_off,
                            grads->data() + s.b_off, dnext);
        }
        // reparameterization plus the KL terms
        const std::vector<double>& dz = dnext;
        std::vector<double> dmu(fw.mu.size()), dlogvar(fw.mu.size());
        for (std::size_t i = 0; i < fw.mu.size(); ++i) {
            dmu[i] = dz[i] + scale * beta * fw.mu[i];
            dlogvar[i] = dz[i] * 0.5 * std::exp(0.5 * fw.logvar[i]) * noise[r][i] +
                         scale * beta * 0.5 * (std::exp(fw.logvar[i]) - 1.0);
        }
        const std::vector<double>& enc_out = n_enc == 0 ? batch.x[r] : fw.enc_act[n_enc - 1];
        std::vector<double> dh, dh2;
        {
            const ParamSlot& s = slots[n_enc];
            backprop_affine(m.mu_head, enc_out, dmu, grads->data() + s.w_off,
                            grads->data() + s.b_off, dh);
        }
        {
            const ParamSlot& s = slots[n_enc + 1];
            backprop_affine(m.logvar_head, enc_out, dlogvar, grads->data() + s.w_off,
                            grads->data() + s.b_off, dh2);
        }
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
        // encoder hidden stack
        for (std::size_t l = n_enc; l-- > 0;) {
            dvec.resize(fw.enc_pre[l].size());
            for (std::size_t j = 0; j < dvec.size(); ++j) {
                dvec[j] = dh[j] * activate_grad(act, fw.enc_pre[l][j]);
            }
            const std::vector<double>& input = l == 0 ? batch.x[r] : fw.enc_act[l - 1];
            const ParamSlot& s = slots[l];
            backprop_affine(m.encoder[l], input, dvec, grads->data() + s.w_off,
                            grads->data() + s.b_off, dh);
        }
    }
    parts.total = parts.regression + beta * parts.kl;
    return parts;
}

}  // namespace

std::string to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "softplus";
}

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "softplus") return Activation::Softplus;
    throw std::runtime_error("unknown activation '" + name + "' (expected tanh or softplus)");
}

void VaeConfig::validate() const {
    if (input_dim < 1) throw std::runtime_error("config: input_dim must be >= 1");
    if (latent_dim < 1) throw std::runtime_error("config: latent_dim must be >= 1");
    for (std::size_t h : encoder_hidden) {
        if (h < 1) throw std::runtime_error("config: encoder hidden widths must be >= 1");
    }
    for (std::size_t h : decoder_hidden) {
        if (h < 1) throw std::runtime_error("config: decoder hidden widths must be >= 1");
    }
    if (kl_weight < 0.0 || !std::isfinite(kl_weight)) {
        throw std::runtime_error("config: kl_weight must be finite and >= 0");
    }
    if (learning_rate <= 0.0 || !std::isfinite(learning_rate)) {
        throw std::runtime_error("config: learning_rate must be finite and > 0");
    }
    if (batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
}

VaeModel init_model(const VaeConfig& cfg) {
    cfg.validate();
    VaeModel m;
    m.config = cfg;

    std::mt19937_64 rng = make_rng(cfg.seed, 0);
    auto make_layer = [&rng](std::size_t in, std::size_t out) {
        DenseLayer l;
        l.in = in;
        l.out = out;
        l.b.assign(out, 0.0);
        const double a = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-a, a);
        l.w.resize(in * out);
        for (double& w : l.w) w = dist(rng);
        return l;
    };

    std::size_t prev = cfg.input_dim;
    for (std::size_t h : cfg.encoder_hidden) {
        m.encoder.push_back(make_layer(prev, h));
        prev = h;
    }
    m.mu_head = make_layer(prev, cfg.latent_dim);
    m.logvar_head = make_layer(prev, cfg.latent_dim);

    prev = cfg.latent_dim;
    for (std::size_t h : cfg.decoder_hidden) {
        m.decoder.push_back(make_layer(prev, h));
        prev = h;
    }
    m.out_head = make_layer(prev, 1);

    m.scaler.means.assign(cfg.input_dim, 0.0);
    m.scaler.stds.assign(cfg.input_dim, 1.0);
    return m;
}

std::pair<std::vector<double>, std::vector<double>> encode(const VaeModel& m,
                                                           const std::vector<double>& x) {
    if (x.size() != m.config.input_dim) {
        throw std::runtime_error("encode: expected input of length " +
                                 std::to_string(m.config.input_dim) + ", got " +
                                 std::to_string(x.size()));
    }
    const Activation act = m.config.activation;
    std::vector<double> cur = x, next;
    for (const DenseLayer& l : m.encoder) {
        affine_forward(l, cur, next);
        for (double& v : next) v = activate(act, v);
        cur.swap(next);
    }
    std::vector<double> mu, logvar;
    affine_forward(m.mu_head, cur, mu);
    affine_forward(m.logvar_head, cur, logvar);
    return {std::move(mu), std::move(logvar)};
}

std::vector<double> sample_latent(const std::vector<double>& mu, const std::vector<double>& logvar,
                                  const std::vector<double>& noise) {
    if (mu.size() != logvar.size() || mu.size() != noise.size()) {
        throw std::runtime_error("sample_latent: mu, logvar and noise lengths differ");
    }
    std::vector<double> z(mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = mu[i] + std::exp(0.5 * logvar[i]) * noise[i];
    }
    return z;
}

double decode(const VaeModel& m, const std::vector<double>& z) {
    if (z.size() != m.config.latent_dim) {
        throw std::runtime_error("decode: expected latent vector of length " +
                                 std::to_string(m.config.latent_dim) + ", got " +
                                 std::to_string(z.size()));
    }
    const Activation act = m.config.activation;
    std::vector<double> cur = z, next;
    for (const DenseLayer& l : m.decoder) {
        affine_forward(l, cur, next);
        for (double& v : next) v = activate(act, v);
        cur.swap(next);
    }
    affine_forward(m.out_head, cur, next);
    return next[0];
}

double predict(const VaeModel& m, const std::vector<double>& x) {
    return decode(m, encode(m, x).first);
}

double kl_divergence(const std::vector<double>& mu, const std::vector<double>& logvar) {
    if (mu.size() != logvar.size()) {
        throw std::runtime_error("kl_divergence: mu and logvar lengths differ");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        sum += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
    }
    return 0.5 * sum;
}

LossParts loss(const VaeModel& m, const Batch& batch,
               const std::vector<std::vector<double>>& noise) {
    return loss_impl(m, batch, noise, nullptr);
}

std::vector<double> analytic_gradients(const VaeModel& m, const Batch& batch,
                                       const std::vector<std::vector<double>>& noise) {
    std::vector<double> grads;
    loss_impl(m, batch, noise, &grads);
    return grads;
}

std::size_t param_count(const VaeModel& m) {
    std::size_t n = 0;
    auto add = [&n](const DenseLayer& l) { n += l.w.size() + l.b.size(); };
    for (const DenseLayer& l : m.encoder) add(l);
    add(m.mu_head);
    add(m.logvar_head);
    for (const DenseLayer& l : m.decoder) add(l);
    add(m.out_head);
    return n;
}

double& param_ref(VaeModel& m, std::size_t flat_index) {
    for (const ParamSlot& s : param_slots(m)) {
        if (flat_index < s.b_off) return s.layer->w[flat_index - s.w_off];
        if (flat_index < s.b_off + s.layer->b.size()) return s.layer->b[flat_index - s.b_off];
    }
    throw std::runtime_error("param_ref: index out of range");
}

double fd_max_rel_error(VaeModel& m, const Batch& batch,
                        const std::vector<std::vector<double>>& noise,
                        const std::vector<double>& grads, std::size_t probe_count,
                        std::uint64_t probe_seed) {
    if (grads.size() != param_count(m)) {
        throw std::runtime_error("fd_max_rel_error: gradient vector size mismatch");
    }
    if (probe_count == 0) return 0.0;

    constexpr double h = 1e-5;
    std::mt19937_64 rng = make_rng(probe_seed, 2);
    std::uniform_int_distribution<std::size_t> pick(0, grads.size() - 1);

    double worst = 0.0;
    for (std::size_t p = 0; p < probe_count; ++p) {
        const std::size_t idx = pick(rng);
        double& w = param_ref(m, idx);
        const double original = w;
        w = original + h;
        const double up = loss(m, batch, noise).total;
        w = original - h;
        const double down = loss(m, batch, noise).total;
        w = original;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads[idx];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

double grad_check(VaeModel& m, const Batch& batch,
                  const std::vector<std::vector<double>>& noise, std::size_t probe_count,
                  std::uint64_t probe_seed) {
    const std::vector<double> grads = analytic_gradients(m, batch, noise);
    return fd_max_rel_error(m, batch, noise, grads, probe_count, probe_seed);
}

TrainHistory fit(VaeModel& m, const Dataset& scaled_train) {
    const VaeConfig& cfg = m.config;
    if (scaled_train.size() == 0) throw std::runtime_error("fit: empty training set");
    if (!scaled_train.labeled()) throw std::runtime_error("fit: training set must be labeled");
    if (scaled_train.arity() != cfg.input_dim) {
        throw std::runtime_error("fit: dataset arity " + std::to_string(scaled_train.arity()) +
                                 " does not match model input_dim " +
                                 std::to_string(cfg.input_dim));
    }

    TrainHistory history;
    if (cfg.epochs == 0) return history;

    const std::size_t n = scaled_train.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::mt19937_64 rng = make_rng(cfg.seed, 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n_params = param_count(m);
    std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::size_t step = 0;

    Batch batch;
    std::vector<std::vector<double>> noise;
    std::vector<double> grads;
    std::vector<ParamSlot> slots = param_slots(m);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_total = 0.0, sum_reg = 0.0, sum_kl = 0.0;

        for (std::size_t start = 0, batch_idx = 0; start < n; start += cfg.batch_size, ++batch_idx) {
            const std::size_t rows = std::min(cfg.batch_size, n - start);
            batch.x.assign(rows, {});
            batch.y.assign(rows, 0.0);
            noise.assign(rows, std::vector<double>(cfg.latent_dim));
            for (std::size_t r = 0; r < rows; ++r) {
                const Observation& o = scaled_train.observations[order[start + r]];
                batch.x[r] = o.features;
                batch.y[r] = *o.target;
                for (double& v : noise[r]) v = normal(rng);
            }

            const LossParts parts = loss_impl(m, batch, noise, &grads);
            if (!std::isfinite(parts.total)) {
                throw std::runtime_error("fit: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + ", batch " +
                                         std::to_string(batch_idx + 1));
            }
            sum_total += parts.total * static_cast<double>(rows);
            sum_reg += parts.regression * static_cast<double>(rows);
            sum_kl += parts.kl * static_cast<double>(rows);

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            std::size_t k = 0;
            for (const ParamSlot& s : slots) {
                auto update = [&](std::vector<double>& params) {
                    for (double& w : params) {
                        const double g = grads[k];
                        adam_m[k] = beta1 * adam_m[k] + (1.0 - beta1) * g;
                        adam_v[k] = beta2 * adam_v[k] + (1.0 - beta2) * g * g;
                        w -= cfg.learning_rate * (adam_m[k] / bc1) /
                             (std::sqrt(adam_v[k] / bc2) + adam_eps);
                        ++k;
                    }
                };
                update(s.layer->w);
                update(s.layer->b);
            }
        }

        const double dn = static_cast<double>(n);
        history.total.push_back(sum_total / dn);
        history.regression.push_back(sum_reg / dn);
        history.kl.push_back(sum_kl / dn);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'V', 'A', 'E', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Cursor {
    const std::string& data;
    std::size_t pos = 0;

    void require(std::size_t n, const std::string& field) {
        if (pos + n > data.size()) {
            throw std::runtime_error("model file truncated while reading " + field);
        }
    }
    std::uint32_t u32(const std::string& field) {
        require(4, field);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }
    std::uint64_t u64(const std::string& field) {
        require(8, field);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
        }
        pos += 8;
        return v;
    }
    double f64(const std::string& field) { return std::bit_cast<double>(u64(field)); }
    void f64_vec(std::vector<double>& out, std::size_t count, const std::string& field) {
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = f64(field);
    }
};

void put_layer(std::string& out, const DenseLayer& l) {
    for (double w : l.w) put_f64(out, w);
    for (double b : l.b) put_f64(out, b);
}

void read_layer(Cursor& c, DenseLayer& l, std::size_t in, std::size_t out,
                const std::string& name) {
    l.in = in;
    l.out = out;
    c.f64_vec(l.w, in * out, name + " weights");
    c.f64_vec(l.b, out, name + " biases");
    for (double w : l.w) {
        if (!std::isfinite(w)) throw std::runtime_error("model file: non-finite " + name + " weight");
    }
    for (double b : l.b) {
        if (!std::isfinite(b)) throw std::runtime_error("model file: non-finite " + name + " bias");
    }
}

}  // namespace

void save_model(const VaeModel& m, const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, m.format_version);

    const VaeConfig& c = m.config;
    put_u32(buf, static_cast<std::uint32_t>(c.input_dim));
    put_u32(buf, static_cast<std::uint32_t>(c.encoder_hidden.size()));
    for (std::size_t h : c.encoder_hidden) put_u32(buf, static_cast<std::uint32_t>(h));
    put_u32(buf, static_cast<std::uint32_t>(c.latent_dim));
    put_u32(buf, static_cast<std::uint32_t>(c.decoder_hidden.size()));
    for (std::size_t h : c.decoder_hidden) put_u32(buf, static_cast<std::uint32_t>(h));
    buf.push_back(c.activation == Activation::Tanh ? '\0' : '\1');
    put_f64(buf, c.kl_weight);
    put_f64(buf, c.learning_rate);
    put_u32(buf, static_cast<std::uint32_t>(c.epochs));
    put_u32(buf, static_cast<std::uint32_t>(c.batch_size));
    put_u64(buf, c.seed);

    put_u32(buf, static_cast<std::uint32_t>(m.scaler.means.size()));
    for (double v : m.scaler.means) put_f64(buf, v);
    for (double v : m.scaler.stds) put_f64(buf, v);

    for (const DenseLayer& l : m.encoder) put_layer(buf, l);
    put_layer(buf, m.mu_head);
    put_layer(buf, m.logvar_head);
    for (const DenseLayer& l : m.decoder) put_layer(buf, l);
    put_layer(buf, m.out_head);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write error on '" + path + "'");
}

VaeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Cursor c{data};
    c.require(4, "magic");
    if (std::memcmp(data.data(), kMagic, 4) != 0) {
        throw std::runtime_error("'" + path + "': bad magic, not a model file");
    }
    c.pos = 4;

    VaeModel m;
    m.format_version = c.u32("format_version");
    if (m.format_version != kModelFormatVersion) {
        throw std::runtime_error("'" + path + "': unsupported model format version " +
                                 std::to_string(m.format_version) + " (expected " +
                                 std::to_string(kModelFormatVersion) + ")");
    }

    VaeConfig& cfg = m.config;
    cfg.input_dim = c.u32("config.input_dim");
    cfg.encoder_hidden.resize(c.u32("config.encoder_hidden count"));
    for (std::size_t& h : cfg.encoder_hidden) h = c.u32("config.encoder_hidden");
    cfg.latent_dim = c.u32("config.latent_dim");
    cfg.decoder_hidden.resize(c.u32("config.decoder_hidden count"));
    for (std::size_t& h : cfg.decoder_hidden) h = c.u32("config.decoder_hidden");
    c.require(1, "config.activation");
    const char act = data[c.pos++];
    if (act != '\0' && act != '\1') {
        throw std::runtime_error("'" + path + "': unknown activation code");
    }
    cfg.activation = act == '\0' ? Activation::Tanh : Activation::Softplus;
    cfg.kl_weight = c.f64("config.kl_weight");
    cfg.learning_rate = c.f64("config.learning_rate");
    cfg.epochs = c.u32("config.epochs");
    cfg.batch_size = c.u32("config.batch_size");
    cfg.seed = c.u64("config.seed");
    cfg.validate();

    const std::size_t arity = c.u32("scaler.arity");
    if (arity != cfg.input_dim) {
        throw std::runtime_error("'" + path + "': scaler arity does not match input_dim");
    }
    c.f64_vec(m.scaler.means, arity, "scaler.means");
    c.f64_vec(m.scaler.stds, arity, "scaler.stds");

    std::size_t prev = cfg.input_dim;
    m.encoder.resize(cfg.encoder_hidden.size());
    for (std::size_t l = 0; l < m.encoder.size(); ++l) {
        read_layer(c, m.encoder[l], prev, cfg.encoder_hidden[l],
                   "encoder layer " + std::to_string(l));
        prev = cfg.encoder_hidden[l];
    }
    read_layer(c, m.mu_head, prev, cfg.latent_dim, "mu head");
    read_layer(c, m.logvar_head, prev, cfg.latent_dim, "logvar head");
    prev = cfg.latent_dim;
    m.decoder.resize(cfg.decoder_hidden.size());
    for (std::size_t l = 0; l < m.decoder.size(); ++l) {
        read_layer(c, m.decoder[l], prev, cfg.decoder_hidden[l],
                   "decoder layer " + std::to_string(l));
        prev = cfg.decoder_hidden[l];
    }
    read_layer(c, m.out_head, prev, 1, "output head");

    if (c.pos != data.size()) {
        throw std::runtime_error("'" + path + "': trailing bytes after model data");
    }
    return m;
}

}  // namespace latconf
