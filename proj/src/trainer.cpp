#include "enf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "enf/binary_io.hpp"
#include "enf/errors.hpp"
#include "enf/log.hpp"
#include "enf/runtime.hpp"

namespace enf {

namespace {

constexpr double kDivergenceLimit = 1e6;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

void check_sample(const ModelConfig& config, const FieldSample& s, bool need_output) {
    s.validate();
    auto fail = [](const std::string& what, std::size_t got, std::size_t want) {
        throw DimensionError("sample " + what + " is " + std::to_string(got) + ", model expects " + std::to_string(want));
    };
    if (s.dim() != config.dim) fail("coordinate dimension", s.dim(), config.dim);
    if (s.input_dim() != config.in_dim) fail("input channel count", s.input_dim(), config.in_dim);
    if (need_output) {
        if (s.output_dim() != config.out_dim) fail("output channel count", s.output_dim(), config.out_dim);
        if (s.mu.size() != config.mu_dim) fail("global parameter count", s.mu.size(), config.mu_dim);
    }
}

class OptimizerState {
public:
    OptimizerState(Optimizer kind, double lr, const std::vector<Tensor*>& params) : kind_(kind), lr_(lr) {
        for (auto* p : params) {
            m_.emplace_back(p->shape(), 0.0);
            v_.emplace_back(p->shape(), 0.0);
        }
    }

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto p = params[i]->values();
            const auto& g = grads[i].values();
            if (kind_ == Optimizer::sgd) {
                for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr_ * g[k];
                continue;
            }
            auto m = m_[i].values();
            auto v = v_[i].values();
            for (std::size_t k = 0; k < p.size(); ++k) {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                p[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
        }
    }

private:
    Optimizer kind_;
    double lr_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct SampleGrad {
    double loss = 0.0;
    std::vector<Tensor> grads;
    std::string error;
};

SampleGrad encoder_sample_grad(const EncoderState& state, const FieldSample& s, bool second_order) {
    ad::Tape tape;
    auto vars = EnfVars::leaves(tape, state.field, true);
    FieldGraph graph(tape, s.coords, state.positions, state.field, vars);
    auto target = tape.constant(s.input);
    auto inner = run_inner_loop(graph, target, state.latent_dim(), state.steps, state.lr, second_order);
    const auto list = vars.list();
    auto g = ad::grad(inner.final_loss, list, false);
    SampleGrad out;
    out.loss = inner.final_loss.item();
    for (auto& v : g) out.grads.push_back(v.value());
    return out;
}

SampleGrad decoder_sample_grad(const DecoderParams& params, const LatentPointCloud& z, const FieldSample& s) {
    const auto cl = condition_latents(z, s.mu);
    ad::Tape tape;
    auto vars = DecoderVars::leaves(tape, params, true);
    auto features = tape.constant(cl.features);
    auto pred = decode(tape, cl.positions, features, s.coords, params, vars);
    auto loss = loss_recon(pred, tape.constant(s.output));
    const auto list = vars.list();
    auto g = ad::grad(loss, list, false);
    SampleGrad out;
    out.loss = loss.item();
    for (auto& v : g) out.grads.push_back(v.value());
    return out;
}

void warn_if_clamped(const std::vector<FieldSample>& data, std::size_t k) {
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& s : data) smallest = std::min(smallest, s.size());
    if (smallest < k) {
        log_warning("downsample count " + std::to_string(k) + " exceeds the smallest mesh (" + std::to_string(smallest) +
                    " points); such samples use all their points");
    }
}

// Shared epoch/batch driver. `sample_grad(index, epoch)` returns the loss
// and gradients for one training sample.
template <class GradFn>
TrainReport run_outer_loop(std::vector<Tensor*> params, std::size_t n_train, std::size_t epochs, double lr,
                           const TrainConfig& config, std::uint64_t tag, GradFn sample_grad) {
    TrainReport report;
    OptimizerState opt(config.optimizer, lr, params);
    std::vector<std::size_t> order(n_train);
    for (std::size_t epoch = 0; epoch < epochs && !report.diverged; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = stream(config.seed, epoch, 0, tag);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch) {
            const std::size_t count = std::min(config.batch, n_train - start);
            std::vector<SampleGrad> results(count);
            parallel_for(count, config.threads, [&](std::size_t i) {
                try {
                    results[i] = sample_grad(order[start + i], epoch);
                } catch (const NumericError& e) {
                    results[i].error = e.what();
                    results[i].loss = std::numeric_limits<double>::quiet_NaN();
                }
            });
            double batch_loss = 0.0;
            std::string error;
            for (const auto& r : results) {
                batch_loss += r.loss;
                if (!r.error.empty() && error.empty()) error = r.error;
            }
            batch_loss /= static_cast<double>(count);
            if (!error.empty() || !std::isfinite(batch_loss) || batch_loss > kDivergenceLimit) {
                report.diverged = true;
                report.message = "training diverged at epoch " + std::to_string(epoch) +
                                 (error.empty() ? " (loss " + std::to_string(batch_loss) + ")" : ": " + error) +
                                 "; keeping the last good parameters";
                break;
            }
            std::vector<Tensor> grads = std::move(results[0].grads);
            for (std::size_t i = 1; i < count; ++i) {
                for (std::size_t p = 0; p < grads.size(); ++p) {
                    auto acc = grads[p].values();
                    const auto& add = results[i].grads[p].values();
                    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += add[k];
                }
            }
            for (auto& g : grads)
                for (auto& v : g.values()) v /= static_cast<double>(count);
            opt.step(params, grads);
            epoch_loss += batch_loss * static_cast<double>(count);
        }
        if (!report.diverged) {
            report.loss_curve.push_back(epoch_loss / static_cast<double>(n_train));
            log_info("epoch " + std::to_string(epoch) + " loss " + format_double(report.loss_curve.back()));
        }
    }
    for (auto* p : params) p->round_to_float();
    return report;
}


}  // namespace

void NormStats::validate() const {
    if (out_mean.size() != out_std.size() || coord_min.size() != coord_max.size() || mu_mean.size() != mu_std.size()) {
        throw ConfigError("normalisation statistics have inconsistent lengths");
    }
    for (double s : out_std)
        if (!(s > 0.0)) throw ConfigError("output standard deviation must be positive");
    for (double s : mu_std)
        if (!(s > 0.0)) throw ConfigError("global parameter standard deviation must be positive");
    for (std::size_t k = 0; k < coord_min.size(); ++k) {
        if (!(coord_min[k] < coord_max[k])) throw ConfigError("coordinate range must have min < max");
    }
}

NormStats compute_norm_stats(const std::vector<FieldSample>& train) {
    if (train.empty()) throw ConfigError("normalisation needs a non-empty training split");
    const auto& first = train.front();
    const std::size_t d = first.dim(), nu = first.output_dim(), lm = first.mu.size();
    NormStats st;
    st.coord_min.assign(d, std::numeric_limits<double>::infinity());
    st.coord_max.assign(d, -std::numeric_limits<double>::infinity());
    st.out_mean.assign(nu, 0.0);
    st.out_std.assign(nu, 0.0);
    st.mu_mean.assign(lm, 0.0);
    st.mu_std.assign(lm, 0.0);
    std::size_t points = 0;
    for (const auto& s : train) {
        s.validate();
        if (s.dim() != d || s.output_dim() != nu || s.mu.size() != lm) {
            throw DimensionError("training samples disagree on dimensions");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                st.coord_min[k] = std::min(st.coord_min[k], s.coords(i, k));
                st.coord_max[k] = std::max(st.coord_max[k], s.coords(i, k));
            }
            for (std::size_t k = 0; k < nu; ++k) st.out_mean[k] += s.output(i, k);
        }
        points += s.size();
        for (std::size_t k = 0; k < lm; ++k) st.mu_mean[k] += s.mu[k];
    }
    for (auto& m : st.out_mean) m /= static_cast<double>(points);
    for (auto& m : st.mu_mean) m /= static_cast<double>(train.size());
    for (const auto& s : train) {
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t k = 0; k < nu; ++k) st.out_std[k] += std::pow(s.output(i, k) - st.out_mean[k], 2);
        for (std::size_t k = 0; k < lm; ++k) st.mu_std[k] += std::pow(s.mu[k] - st.mu_mean[k], 2);
    }
    for (std::size_t k = 0; k < nu; ++k) {
        st.out_std[k] = std::sqrt(st.out_std[k] / static_cast<double>(points));
        if (!(st.out_std[k] > 0.0)) {
            throw ConfigError("output channel " + std::to_string(k) + " has zero variance; cannot standardise");
        }
    }
    for (auto& s : st.mu_std) {
        s = std::sqrt(s / static_cast<double>(train.size()));
        if (!(s > 0.0)) s = 1.0;
    }
    st.validate();
    return st;
}

Tensor normalize_coords(const Tensor& coords, const NormStats& stats) {
    require_matrix(coords, "coords");
    if (coords.cols() != stats.coord_min.size()) throw DimensionError("coordinate dimension does not match statistics");
    Tensor out = coords;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t k = 0; k < out.cols(); ++k) {
            const double range = stats.coord_max[k] - stats.coord_min[k];
            out(i, k) = 2.0 * (coords(i, k) - stats.coord_min[k]) / range - 1.0;
        }
    }
    return out;
}

std::vector<double> normalize_mu(const std::vector<double>& mu, const NormStats& stats) {
    if (mu.size() != stats.mu_mean.size()) throw DimensionError("global parameter count does not match statistics");
    std::vector<double> out(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) out[k] = (mu[k] - stats.mu_mean[k]) / stats.mu_std[k];
    return out;
}

FieldSample normalize(const FieldSample& sample, const NormStats& stats) {
    FieldSample s = sample;
    s.coords = normalize_coords(sample.coords, stats);
    if (sample.output_dim() != stats.out_mean.size()) throw DimensionError("output channels do not match statistics");
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t k = 0; k < s.output_dim(); ++k)
            s.output(i, k) = (sample.output(i, k) - stats.out_mean[k]) / stats.out_std[k];
    s.mu = normalize_mu(sample.mu, stats);
    return s;
}

Tensor denormalize(const Tensor& pred, const NormStats& stats) {
    require_matrix(pred, "prediction");
    if (pred.cols() != stats.out_mean.size()) throw DimensionError("prediction channels do not match statistics");
    Tensor out = pred;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t k = 0; k < out.cols(); ++k) out(i, k) = pred(i, k) * stats.out_std[k] + stats.out_mean[k];
    return out;
}

FieldSample downsample(const FieldSample& sample, std::size_t k, std::mt19937_64& rng) {
    if (k == 0) throw ConfigError("downsample count must be positive");
    const std::size_t n = sample.size();
    if (k > n) {
        log_warning("downsample count " + std::to_string(k) + " exceeds mesh size " + std::to_string(n) +
                    "; using all points");
        k = n;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: only the first k slots are needed.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return sample.subset(idx);
}

Model init_model(const ModelConfig& config, const NormStats& stats, std::uint64_t seed) {
    config.validate();
    stats.validate();
    if (stats.coord_min.size() != config.dim) throw DimensionError("statistics do not match model.dim");
    Model m;
    m.config = config;
    m.stats = stats;
    auto rng = stream(seed, 0, 0, 0x696e6974);
    m.encoder.field = init_enf_params(config.encoder_dims(), rng);
    m.encoder.positions = init_latent_positions(config.latent_box, config.latent_count);
    m.encoder.positions.round_to_float();  // stored as f32
    m.encoder.steps = config.steps;
    m.encoder.lr = config.inner_lr;
    init_decoder(m, seed);
    return m;
}

void init_decoder(Model& model, std::uint64_t seed) {
    auto rng = stream(seed, 0, 0, 0x646563);
    model.decoder = init_decoder_params(model.config.decoder_dims(), rng);
    model.has_decoder = false;
}

TrainReport train_encoder(Model& model, const std::vector<FieldSample>& train, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw ConfigError("train_encoder: empty training split");
    std::vector<FieldSample> data;
    for (const auto& s : train) {
        check_sample(model.config, s, false);
        FieldSample n = s;
        n.coords = normalize_coords(s.coords, model.stats);
        data.push_back(std::move(n));
    }
    EncoderState& state = model.encoder;
    warn_if_clamped(data, config.downsample);
    auto params = state.field.trainable();
    return run_outer_loop(params, data.size(), config.encoder_epochs, config.lr, config, 0x656e63,
                          [&](std::size_t i, std::size_t epoch) {
                              auto rng = stream(config.seed, epoch, i, 0x6473);
                              const std::size_t k = std::min(config.downsample, data[i].size());
                              return encoder_sample_grad(state, downsample(data[i], k, rng),
                                                         config.second_order);
                          });
}

TrainReport train_decoder(Model& model, const std::vector<FieldSample>& train, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw ConfigError("train_decoder: empty training split");
    std::vector<FieldSample> data;
    for (const auto& s : train) {
        check_sample(model.config, s, true);
        data.push_back(normalize(s, model.stats));
    }
    const EncoderState& state = model.encoder;
    std::vector<LatentPointCloud> cache;
    if (config.cache_latents) {
        cache.resize(data.size());
        parallel_for(data.size(), config.threads,
                     [&](std::size_t i) { cache[i] = encode(data[i].coords, data[i].input, state).z; });
    }
    model.has_decoder = true;
    warn_if_clamped(data, config.downsample);
    auto params = model.decoder.trainable();
    auto report = run_outer_loop(params, data.size(), config.decoder_epochs, config.decoder_lr, config, 0x646563,
                                 [&](std::size_t i, std::size_t epoch) {
                                     auto rng = stream(config.seed, epoch, i, 0x6464);
                                     const auto s = downsample(data[i], std::min(config.downsample, data[i].size()), rng);
                                     if (config.cache_latents) return decoder_sample_grad(model.decoder, cache[i], s);
                                     const auto z = encode(s.coords, s.input, state).z;
                                     return decoder_sample_grad(model.decoder, z, s);
                                 });
    return report;
}

Prediction predict(const Model& model, const FieldSample& sample) {
    check_sample(model.config, sample, model.has_decoder);
    Prediction out;
    const Tensor coords = normalize_coords(sample.coords, model.stats);
    out.encoding = encode(coords, sample.input, model.encoder);
    out.input = enf_forward(out.encoding.z, coords, model.encoder.field);
    if (model.has_decoder) {
        const auto mu = normalize_mu(sample.mu, model.stats);
        out.output = decode(condition_latents(out.encoding.z, mu), coords, model.decoder);
    }
    return out;
}

Tensor decode_at(const Model& model, const Encoding& encoding, const std::vector<double>& mu, const Tensor& coords) {
    if (!model.has_decoder) throw ConfigError("model has no trained decoder");
    if (coords.rank() != 2 || coords.cols() != model.config.dim) throw DimensionError("query coordinates do not match model.dim");
    const auto nmu = normalize_mu(mu, model.stats);
    return decode(condition_latents(encoding.z, nmu), normalize_coords(coords, model.stats), model.decoder);
}

// --- checkpoint -----------------------------------------------------------------

namespace {

struct NamedParam {
    std::string name;
    const Tensor* value;
};

std::vector<NamedParam> named_params(const Model& m) {
    std::vector<NamedParam> out;
    out.push_back({"encoder.fourier", &m.encoder.field.fourier});
    const auto enc = m.encoder.field.trainable();
    for (std::size_t i = 0; i < enc.size(); ++i) {
        out.push_back({std::string("encoder.") + EnfParams::trainable_name(i), enc[i]});
    }
    out.push_back({"encoder.positions", &m.encoder.positions});
    if (m.has_decoder) {
        out.push_back({"decoder.fourier", &m.decoder.field.fourier});
        const auto dec = m.decoder.trainable();
        const auto names = m.decoder.trainable_names();
        for (std::size_t i = 0; i < dec.size(); ++i) out.push_back({"decoder." + names[i], dec[i]});
    }
    return out;
}

KeyValues checkpoint_metadata(const Checkpoint& c) {
    KeyValues kv = to_key_values(c.model.config, c.train);
    const auto& st = c.model.stats;
    kv["norm.out_mean"] = format_doubles(st.out_mean);
    kv["norm.out_std"] = format_doubles(st.out_std);
    kv["norm.coord_min"] = format_doubles(st.coord_min);
    kv["norm.coord_max"] = format_doubles(st.coord_max);
    kv["norm.mu_mean"] = format_doubles(st.mu_mean);
    kv["norm.mu_std"] = format_doubles(st.mu_std);
    kv["checkpoint.has_decoder"] = c.model.has_decoder ? "true" : "false";
    return kv;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    ByteWriter w;
    w.put_bytes("ENFC");
    w.put_u32(kCheckpointVersion);
    const std::string meta = format_key_values(checkpoint_metadata(checkpoint));
    w.put_u32(static_cast<std::uint32_t>(meta.size()));
    w.put_bytes(meta);
    const auto params = named_params(checkpoint.model);
    w.put_u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.put_u16(static_cast<std::uint16_t>(p.name.size()));
        w.put_bytes(p.name);
        w.put_u32(static_cast<std::uint32_t>(p.value->rank()));
        for (auto e : p.value->shape()) w.put_u32(static_cast<std::uint32_t>(e));
        for (double v : p.value->values()) w.put_f32(static_cast<float>(v));
    }
    w.put_crc();
    return w.bytes();
}

Checkpoint deserialize_checkpoint(std::string bytes) {
    ByteReader r(std::move(bytes));
    if (r.get_bytes(4) != "ENFC") throw LoadError("bad magic, not an ENFC checkpoint", 0);
    const auto version = r.get_u32();
    if (version != kCheckpointVersion) throw LoadError("unsupported ENFC version " + std::to_string(version), 4);
    r.verify_trailing_crc();
    const std::size_t meta_len = r.get_u32();
    const std::size_t meta_at = r.offset();
    const std::string meta = r.get_bytes(meta_len);

    Checkpoint c;
    bool has_decoder = false;
    try {
        const KeyValues kv = parse_key_values(meta);
        auto& st = c.model.stats;
        const std::map<std::string, std::vector<double>*> norm = {
            {"norm.out_mean", &st.out_mean}, {"norm.out_std", &st.out_std},   {"norm.coord_min", &st.coord_min},
            {"norm.coord_max", &st.coord_max}, {"norm.mu_mean", &st.mu_mean}, {"norm.mu_std", &st.mu_std}};
        for (const auto& [k, v] : kv) {
            if (auto it = norm.find(k); it != norm.end()) {
                *it->second = parse_doubles(v);
            } else if (k == "checkpoint.has_decoder") {
                has_decoder = v == "true";
            } else {
                apply_key(c.model.config, c.train, k, v);
            }
        }
        c.model.config.validate();
        st.validate();
    } catch (const ConfigError& e) {
        throw LoadError(std::string("invalid checkpoint metadata: ") + e.what(), meta_at);
    }

    std::map<std::string, Tensor> table;
    const std::size_t count = r.get_u32();
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t entry_at = r.offset();
        const std::string name = r.get_bytes(r.get_u16());
        const std::size_t rank = r.get_u32();
        if (rank == 0 || rank > 8) throw LoadError("parameter '" + name + "' has invalid rank", entry_at);
        Shape shape;
        std::size_t n = 1;
        for (std::size_t k = 0; k < rank; ++k) {
            shape.push_back(r.get_u32());
            if (shape.back() == 0) throw LoadError("parameter '" + name + "' has a zero extent", entry_at);
            n *= shape.back();
        }
        if (n * 4 > r.remaining()) throw LoadError("parameter '" + name + "' is truncated", entry_at);
        std::vector<double> data(n);
        for (auto& v : data) v = r.get_f32();
        if (!table.emplace(name, Tensor(shape, std::move(data))).second) {
            throw LoadError("duplicate parameter '" + name + "'", entry_at);
        }
    }
    r.expect_only_crc_left();

    auto take = [&](const std::string& name) {
        auto it = table.find(name);
        if (it == table.end()) throw LoadError("checkpoint lacks parameter '" + name + "'", r.offset());
        Tensor t = std::move(it->second);
        table.erase(it);
        return t;
    };
    Model& m = c.model;
    m.has_decoder = has_decoder;
    m.encoder.steps = m.config.steps;
    m.encoder.lr = m.config.inner_lr;
    m.encoder.field.window = m.config.window;
    m.encoder.field.heads = m.config.heads;
    m.encoder.field.fourier = take("encoder.fourier");
    {
        auto ptrs = m.encoder.field.trainable();
        for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = take(std::string("encoder.") + EnfParams::trainable_name(i));
    }
    m.encoder.positions = take("encoder.positions");
    if (has_decoder) {
        m.decoder.blocks.resize(m.config.blocks);
        m.decoder.field.window = m.config.window;
        m.decoder.field.heads = m.config.heads;
        m.decoder.field.fourier = take("decoder.fourier");
        auto ptrs = m.decoder.trainable();
        const auto names = m.decoder.trainable_names();
        for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = take("decoder." + names[i]);
    } else {
        init_decoder(m, c.train.seed);
    }
    if (!table.empty()) throw LoadError("unexpected parameter '" + table.begin()->first + "'", r.offset());
    try {
        m.encoder.validate();
        if (m.encoder.field.latent_dim() != m.config.latent_dim || m.encoder.field.out_dim() != m.config.in_dim ||
            m.encoder.latent_count() != m.config.latent_count) {
            throw DimensionError("encoder parameters disagree with the stored configuration");
        }
        if (has_decoder) m.decoder.validate();
    } catch (const DataError& e) {
        throw LoadError(std::string("inconsistent checkpoint: ") + e.what(), r.offset());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("inconsistent checkpoint: ") + e.what(), r.offset());
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return deserialize_checkpoint(read_file(path));
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace enf
