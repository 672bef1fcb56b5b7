#include "enf/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "enf/binary_io.hpp"
#include "enf/errors.hpp"
#include "enf/runtime.hpp"

namespace enf {

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double time_prediction(const Model& model, const FieldSample& sample, std::size_t repeats) {
    std::vector<double> t;
    for (std::size_t i = 0; i < std::max<std::size_t>(repeats, 1); ++i) {
        const auto start = std::chrono::steady_clock::now();
        (void)predict(model, sample);
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return median(t);
}

bool carries_flow(const FieldSample& s) { return s.mu.size() == 3 && s.dim() == 2 && s.surface_count() >= 8; }

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

SplitMse mse_split(const Tensor& pred, const Tensor& truth, const std::vector<std::uint8_t>& surface) {
    if (pred.shape() != truth.shape()) {
        throw DimensionError("mse_split: shape mismatch " + shape_string(pred.shape()) + " vs " + shape_string(truth.shape()));
    }
    if (surface.size() != pred.rows()) throw DimensionError("mse_split: surface mask length does not match point count");
    double vol = 0.0, surf = 0.0;
    std::size_t nv = 0, ns = 0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        double e = 0.0;
        for (std::size_t k = 0; k < pred.cols(); ++k) e += std::pow(pred(i, k) - truth(i, k), 2);
        if (surface[i]) {
            surf += e;
            ++ns;
        } else {
            vol += e;
            ++nv;
        }
    }
    if (ns == 0) throw DataError("mse_split: sample has no surface points, surface MSE is undefined");
    SplitMse out;
    out.volume = nv ? vol / static_cast<double>(nv) : 0.0;
    out.surface = surf / static_cast<double>(ns);
    return out;
}

double lift_coefficient(const Tensor& points, const std::vector<double>& cp, const FlowCase& flow) {
    require_matrix(points, "surface points");
    if (points.cols() != 2) throw DimensionError("lift_coefficient: points must be S x 2");
    const std::size_t n = points.rows();
    if (cp.size() != n) throw DimensionError("lift_coefficient: one C_p value per point required");
    if (n < 8) throw DataError("lift_coefficient: need at least 8 surface points, got " + std::to_string(n));
    const auto& c = flow.body.center;
    const double r = flow.body.radius;
    std::vector<std::pair<double, double>> samples;  // (angle, C_p n.e_L)
    const double ex = -std::sin(flow.angle), ey = std::cos(flow.angle);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::atan2(points(i, 1) - c[1], points(i, 0) - c[0]);
        samples.emplace_back(t, cp[i] * (std::cos(t) * ex + std::sin(t) * ey));
    }
    std::sort(samples.begin(), samples.end());
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = samples[i];
        const auto& b = samples[(i + 1) % n];
        double dt = b.first - a.first;
        if (i + 1 == n) dt += 2.0 * std::numbers::pi;
        integral += 0.5 * (a.second + b.second) * dt * r;
    }
    return -integral / (2.0 * r);
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DimensionError("spearman: inputs differ in length");
    if (xs.size() < 2) throw DataError("spearman: need at least two values");
    const auto rx = ranks(xs);
    const auto ry = ranks(ys);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericError("spearman: constant input, correlation is undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MetricReport evaluate_model(const Model& model, const std::vector<FieldSample>& test, const EvalOptions& options) {
    if (test.empty()) throw DataError("evaluation needs a non-empty test split");
    MetricReport report;
    report.samples.resize(test.size());
    const bool decoded = model.has_decoder;
    bool lift = decoded;
    for (const auto& s : test) lift = lift && carries_flow(s);
    report.has_lift = lift;

    parallel_for(test.size(), options.threads, [&](std::size_t i) {
        const auto& s = test[i];
        const auto pred = predict(model, s);
        auto& m = report.samples[i];
        m.input_mse = loss_recon(pred.input, s.input);
        if (!decoded) return;
        const FieldSample norm = normalize(s, model.stats);
        const auto split = mse_split(pred.output, norm.output, s.surface);
        m.volume_mse = split.volume;
        m.surface_mse = split.surface;
        if (!lift) return;
        const Tensor physical = denormalize(pred.output, model.stats);
        std::vector<std::size_t> rows;
        for (std::size_t k = 0; k < s.size(); ++k)
            if (s.surface[k]) rows.push_back(k);
        Tensor pts = Tensor::matrix(rows.size(), 2);
        std::vector<double> cp_pred, cp_true;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            pts(k, 0) = s.coords(rows[k], 0);
            pts(k, 1) = s.coords(rows[k], 1);
            cp_pred.push_back(physical(rows[k], 0));
            cp_true.push_back(s.output(rows[k], 0));
        }
        const FlowCase flow = flow_case_from_sample(s);
        m.cl_pred = lift_coefficient(pts, cp_pred, flow);
        m.cl_true = lift_coefficient(pts, cp_true, flow);
        m.cl_closed = kutta_joukowski_lift(flow);
    });

    std::vector<double> vol, surf, inp, out, clp, clt;
    for (const auto& m : report.samples) {
        vol.push_back(m.volume_mse);
        surf.push_back(m.surface_mse);
        inp.push_back(m.input_mse);
        clp.push_back(m.cl_pred);
        clt.push_back(m.cl_true);
    }
    report.input_mse = mean(inp);
    if (decoded) {
        report.volume_mse = mean(vol);
        report.surface_mse = mean(surf);
        double total = 0.0;
        std::size_t points = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            std::size_t ns = test[i].surface_count(), nv = test[i].size() - ns;
            total += report.samples[i].volume_mse * static_cast<double>(nv) +
                     report.samples[i].surface_mse * static_cast<double>(ns);
            points += test[i].size();
        }
        report.output_mse = total / static_cast<double>(points);
    }
    if (lift) {
        double se = 0.0;
        for (std::size_t i = 0; i < clp.size(); ++i) se += std::pow(clp[i] - clt[i], 2);
        report.cl_mse = se / static_cast<double>(clp.size());
        const double mt = mean(clt);
        double var = 0.0;
        for (double v : clt) var += (v - mt) * (v - mt);
        var /= static_cast<double>(clt.size());
        report.cl_mse_normalized = var > 0.0 ? report.cl_mse / var : report.cl_mse;
        report.spearman_lift = spearman(clp, clt);
    }
    report.seconds_per_sample = time_prediction(model, test.front(), options.timing_repeats);
    return report;
}

std::vector<SweepRow> discretization_sweep(const Model& model, const std::vector<FieldSample>& test,
                                           const std::vector<std::size_t>& resolutions, std::uint64_t seed,
                                           const EvalOptions& options, const Box2& domain) {
    if (!model.has_decoder) throw ConfigError("discretization sweep needs a trained decoder");
    if (test.empty()) throw DataError("discretization sweep needs test samples");
    std::vector<SweepRow> rows;
    for (std::size_t res : resolutions) {
        std::vector<FieldSample> meshes(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto& s = test[i];
            if (s.size() == res) {
                meshes[i] = s;
                continue;
            }
            const double frac = static_cast<double>(s.surface_count()) / static_cast<double>(s.size());
            const auto n_surf = std::max<std::size_t>(8, static_cast<std::size_t>(std::lround(frac * res)));
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(res),
                              static_cast<std::uint32_t>(i)};
            std::mt19937_64 rng(seq);
            meshes[i] = make_flow_sample(flow_case_from_sample(s), domain, res, n_surf, rng);
        }
        EvalOptions opt = options;
        opt.timing_repeats = std::max<std::size_t>(options.timing_repeats, 5);
        const auto rep = evaluate_model(model, meshes, opt);
        rows.push_back({res, rep.volume_mse, rep.surface_mse, rep.seconds_per_sample});
    }
    return rows;
}

std::vector<CapacityRow> ablate_capacity(const Dataset& data, const ModelConfig& base, const TrainConfig& train,
                                         const std::vector<LatentShape>& shapes, const EvalOptions& options) {
    const NormStats stats = compute_norm_stats(data.train);
    std::vector<CapacityRow> rows;
    for (const auto& shape : shapes) {
        ModelConfig cfg = base;
        cfg.latent_count = shape.count;
        cfg.latent_dim = shape.dim;
        Model model = init_model(cfg, stats, train.seed);
        CapacityRow row;
        row.shape = shape;
        row.encoder_report = train_encoder(model, data.train, train);
        row.decoder_report = train_decoder(model, data.train, train);
        const auto rep = evaluate_model(model, data.test, options);
        row.input_mse = rep.input_mse;
        row.output_mse = rep.output_mse;
        rows.push_back(row);
    }
    return rows;
}

LocalGlobalResult compare_local_global(const Dataset& data, const ModelConfig& local, const ModelConfig& global,
                                       const TrainConfig& train, const EvalOptions& options) {
    if (global.latent_count != 1 || global.window != 0.0) {
        throw ConfigError("global configuration must use a single latent with window 0");
    }
    const NormStats stats = compute_norm_stats(data.train);
    LocalGlobalResult out;
    Model lm = init_model(local, stats, train.seed);
    out.local_report = train_encoder(lm, data.train, train);
    out.local_mse = evaluate_model(lm, data.test, options).input_mse;
    Model gm = init_model(global, stats, train.seed);
    out.global_report = train_encoder(gm, data.train, train);
    out.global_mse = evaluate_model(gm, data.test, options).input_mse;
    out.ratio = out.local_mse > 0.0 ? out.global_mse / out.local_mse : std::numeric_limits<double>::infinity();
    return out;
}

std::string format_tsv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += '\t';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

void write_heatmap_ppm(const std::filesystem::path& path, const Tensor& coords, const std::vector<double>& values,
                       std::size_t width, std::size_t height) {
    require_matrix(coords, "coords");
    if (coords.cols() != 2 || values.size() != coords.rows()) throw DimensionError("heatmap needs N x 2 coords and N values");
    double x0 = coords(0, 0), x1 = x0, y0 = coords(0, 1), y1 = y0;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        x0 = std::min(x0, coords(i, 0));
        x1 = std::max(x1, coords(i, 0));
        y0 = std::min(y0, coords(i, 1));
        y1 = std::max(y1, coords(i, 1));
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = *hi > *lo ? *hi - *lo : 1.0;
    std::string img = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (std::size_t py = 0; py < height; ++py) {
        const double y = y1 - (static_cast<double>(py) + 0.5) * (y1 - y0) / static_cast<double>(height);
        for (std::size_t px = 0; px < width; ++px) {
            const double x = x0 + (static_cast<double>(px) + 0.5) * (x1 - x0) / static_cast<double>(width);
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < coords.rows(); ++i) {
                const double d = std::pow(coords(i, 0) - x, 2) + std::pow(coords(i, 1) - y, 2);
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            // blue -> white -> red
            const double t = (values[best] - *lo) / span;
            const double r = t < 0.5 ? 2.0 * t : 1.0;
            const double g = t < 0.5 ? 2.0 * t : 2.0 - 2.0 * t;
            const double b = t < 0.5 ? 1.0 : 2.0 - 2.0 * t;
            img += static_cast<char>(std::lround(255 * r));
            img += static_cast<char>(std::lround(255 * g));
            img += static_cast<char>(std::lround(255 * b));
        }
    }
    write_file(path, img);
}

}  // namespace enf
