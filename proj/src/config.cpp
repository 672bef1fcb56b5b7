#include "enf/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "enf/errors.hpp"

namespace enf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& text) {
    const std::string t = trim(text);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError("not a non-negative integer: '" + text + "'");
    return v;
}

bool parse_bool(const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("not a boolean: '" + text + "'");
}

struct Entry {
    const char* key;
    std::function<std::string(const ModelConfig&, const TrainConfig&)> get;
    std::function<void(ModelConfig&, TrainConfig&, const std::string&)> set;
};

#define SIZE_ENTRY(key, obj, field)                                                            \
    Entry {                                                                                    \
        key, [](const ModelConfig& m, const TrainConfig& t) {                                  \
            (void)m;                                                                           \
            (void)t;                                                                           \
            return std::to_string(obj.field);                                                  \
        },                                                                                     \
            [](ModelConfig& m, TrainConfig& t, const std::string& v) {                         \
                (void)m;                                                                       \
                (void)t;                                                                       \
                obj.field = parse_size(v);                                                     \
            }                                                                                  \
    }
#define DOUBLE_ENTRY(key, obj, field)                                                          \
    Entry {                                                                                    \
        key, [](const ModelConfig& m, const TrainConfig& t) {                                  \
            (void)m;                                                                           \
            (void)t;                                                                           \
            return format_double(obj.field);                                                   \
        },                                                                                     \
            [](ModelConfig& m, TrainConfig& t, const std::string& v) {                         \
                (void)m;                                                                       \
                (void)t;                                                                       \
                obj.field = parse_double(v);                                                   \
            }                                                                                  \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        SIZE_ENTRY("model.dim", m, dim),
        SIZE_ENTRY("model.in_dim", m, in_dim),
        SIZE_ENTRY("model.out_dim", m, out_dim),
        SIZE_ENTRY("model.mu_dim", m, mu_dim),
        SIZE_ENTRY("model.latent_count", m, latent_count),
        SIZE_ENTRY("model.latent_dim", m, latent_dim),
        SIZE_ENTRY("model.key_dim", m, key_dim),
        SIZE_ENTRY("model.value_dim", m, value_dim),
        SIZE_ENTRY("model.rff_dim", m, rff_dim),
        SIZE_ENTRY("model.heads", m, heads),
        DOUBLE_ENTRY("model.rff_sigma", m, rff_sigma),
        DOUBLE_ENTRY("model.decoder_rff_sigma", m, decoder_rff_sigma),
        SIZE_ENTRY("model.decoder_key_dim", m, decoder_key_dim),
        SIZE_ENTRY("model.decoder_value_dim", m, decoder_value_dim),
        SIZE_ENTRY("model.decoder_rff_dim", m, decoder_rff_dim),
        DOUBLE_ENTRY("model.window", m, window),
        SIZE_ENTRY("model.steps", m, steps),
        DOUBLE_ENTRY("model.inner_lr", m, inner_lr),
        SIZE_ENTRY("model.blocks", m, blocks),
        SIZE_ENTRY("model.block_key_dim", m, block_key_dim),
        Entry{"model.box_lo", [](const ModelConfig& m, const TrainConfig&) { return format_doubles(m.latent_box.lo); },
              [](ModelConfig& m, TrainConfig&, const std::string& v) { m.latent_box.lo = parse_doubles(v); }},
        Entry{"model.box_hi", [](const ModelConfig& m, const TrainConfig&) { return format_doubles(m.latent_box.hi); },
              [](ModelConfig& m, TrainConfig&, const std::string& v) { m.latent_box.hi = parse_doubles(v); }},
        SIZE_ENTRY("train.encoder_epochs", t, encoder_epochs),
        SIZE_ENTRY("train.decoder_epochs", t, decoder_epochs),
        DOUBLE_ENTRY("train.lr", t, lr),
        DOUBLE_ENTRY("train.decoder_lr", t, decoder_lr),
        SIZE_ENTRY("train.batch", t, batch),
        SIZE_ENTRY("train.downsample", t, downsample),
        Entry{"train.seed", [](const ModelConfig&, const TrainConfig& t) { return std::to_string(t.seed); },
              [](ModelConfig&, TrainConfig& t, const std::string& v) { t.seed = parse_size(v); }},
        Entry{"train.mode",
              [](const ModelConfig&, const TrainConfig& t) {
                  return std::string(t.second_order ? "second-order" : "first-order");
              },
              [](ModelConfig&, TrainConfig& t, const std::string& v) {
                  const auto s = trim(v);
                  if (s == "second-order") {
                      t.second_order = true;
                  } else if (s == "first-order") {
                      t.second_order = false;
                  } else {
                      throw ConfigError("train.mode must be second-order or first-order, got '" + v + "'");
                  }
              }},
        Entry{"train.optimizer",
              [](const ModelConfig&, const TrainConfig& t) {
                  return std::string(t.optimizer == Optimizer::adam ? "adam" : "sgd");
              },
              [](ModelConfig&, TrainConfig& t, const std::string& v) {
                  const auto s = trim(v);
                  if (s == "adam") {
                      t.optimizer = Optimizer::adam;
                  } else if (s == "sgd") {
                      t.optimizer = Optimizer::sgd;
                  } else {
                      throw ConfigError("train.optimizer must be adam or sgd, got '" + v + "'");
                  }
              }},
        Entry{"train.cache_latents",
              [](const ModelConfig&, const TrainConfig& t) { return std::string(t.cache_latents ? "true" : "false"); },
              [](ModelConfig&, TrainConfig& t, const std::string& v) { t.cache_latents = parse_bool(v); }},
    };
    return table;
}

#undef SIZE_ENTRY
#undef DOUBLE_ENTRY

}  // namespace

void ModelConfig::validate() const {
    if (dim == 0 || in_dim == 0 || out_dim == 0) throw ConfigError("model dimensions must be positive");
    if (latent_count == 0 || latent_dim == 0) throw ConfigError("latent count and latent dim must be positive");
    encoder_dims().validate();
    decoder_dims().field.validate();
    if (!(inner_lr > 0.0)) throw ConfigError("model.inner_lr must be positive");
    if (blocks > 0 && block_key_dim == 0) throw ConfigError("model.block_key_dim must be positive");
    latent_box.validate();
    if (latent_box.dim() != dim) throw ConfigError("latent box dimension does not match model.dim");
}

FieldDims ModelConfig::encoder_dims() const {
    FieldDims f;
    f.dim = dim;
    f.latent_dim = latent_dim;
    f.out_dim = in_dim;
    f.key_dim = key_dim;
    f.value_dim = value_dim;
    f.rff_dim = rff_dim;
    f.heads = heads;
    f.rff_sigma = rff_sigma;
    f.window = window;
    return f;
}

DecoderDims ModelConfig::decoder_dims() const {
    DecoderDims d;
    d.field = encoder_dims();
    d.field.latent_dim = latent_dim + mu_dim;
    d.field.out_dim = out_dim;
    d.field.rff_sigma = decoder_rff_sigma;
    d.field.key_dim = decoder_key_dim;
    d.field.value_dim = decoder_value_dim;
    d.field.rff_dim = decoder_rff_dim;
    d.blocks = blocks;
    d.block_key_dim = block_key_dim;
    return d;
}

void TrainConfig::validate() const {
    if (batch == 0) throw ConfigError("train.batch must be positive");
    if (downsample == 0) throw ConfigError("train.downsample must be positive");
    if (!(lr > 0.0) || !(decoder_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (threads == 0) throw ConfigError("threads must be positive");
}

KeyValues to_key_values(const ModelConfig& model, const TrainConfig& train) {
    KeyValues out;
    for (const auto& e : entries()) out[e.key] = e.get(model, train);
    return out;
}

void apply_key(ModelConfig& model, TrainConfig& train, const std::string& key, const std::string& value) {
    for (const auto& e : entries()) {
        if (key == e.key) {
            try {
                e.set(model, train, value);
            } catch (const ConfigError& err) {
                throw ConfigError(key + ": " + err.what());
            }
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::apply(const KeyValues& values) {
    for (const auto& [k, v] : values) apply_key(model, train, k, v);
}

void RunConfig::apply_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    apply_key(model, train, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues out;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::string format_key_values(const KeyValues& values) {
    std::string out;
    for (const auto& [k, v] : values) out += k + "=" + v + "\n";
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw ConfigError("cannot format number");
    return std::string(buf, p);
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty()) throw ConfigError("not a number: '" + text + "'");
    return v;
}

std::string format_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(parse_double(item));
    return out;
}

}  // namespace enf
