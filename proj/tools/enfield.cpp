// enfield: data generation, training, inference and evaluation.
//
// Exit codes: 0 success, 1 usage/configuration, 2 data, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "enf/binary_io.hpp"
#include "enf/config.hpp"
#include "enf/errors.hpp"
#include "enf/eval.hpp"
#include "enf/gradcheck.hpp"
#include "enf/log.hpp"
#include "enf/runtime.hpp"
#include "enf/synth.hpp"
#include "enf/trainer.hpp"

namespace {

using namespace enf;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

struct Common {
    std::size_t threads = 0;
    std::optional<std::uint64_t> seed;
    std::string config_file;
    std::vector<std::string> sets;
    bool verbose = false;
    bool quiet = false;
};

std::size_t resolve_threads(const Common& c) {
    if (c.threads > 0) return c.threads;
    if (const char* env = std::getenv("ENFIELD_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("ENFIELD_THREADS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

void apply_overrides(RunConfig& rc, const Common& c) {
    if (!c.config_file.empty()) rc.apply(parse_key_values(read_file(c.config_file)));
    for (const auto& s : c.sets) rc.apply_assignment(s);
    if (c.seed) rc.train.seed = *c.seed;
    rc.train.threads = resolve_threads(c);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void emit(const std::string& table, const std::string& results_dir, const std::string& name) {
    std::cout << table;
    if (!results_dir.empty()) write_file(std::filesystem::path(results_dir) / name, table);
}

Range parse_range(const std::string& text) {
    const auto v = parse_doubles(text);
    if (v.size() == 1) return {v[0], v[0]};
    if (v.size() != 2) throw ConfigError("range must be 'lo,hi' or a single value, got '" + text + "'");
    return {v[0], v[1]};
}

LatentShape parse_shape(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw ConfigError("latent shape must look like 9x8, got '" + text + "'");
    try {
        return {std::stoul(text.substr(0, x)), std::stoul(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw ConfigError("latent shape must look like 9x8, got '" + text + "'");
    }
}

// Model dimensions follow the data.
void adopt_data_dims(ModelConfig& m, const Dataset& ds) {
    if (ds.train.empty()) throw DataError("dataset has no training samples");
    const auto& s = ds.train.front();
    m.dim = s.dim();
    m.in_dim = s.input_dim();
    m.out_dim = s.output_dim();
    m.mu_dim = s.mu.size();
}

void write_curve(const std::string& path, const TrainReport& r) {
    if (path.empty()) return;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t e = 0; e < r.loss_curve.size(); ++e) rows.push_back({std::to_string(e), format_double(r.loss_curve[e])});
    write_file(path, format_tsv({"epoch", "loss"}, rows));
}

int finish_training(const TrainReport& r, const std::string& what) {
    if (r.diverged) {
        std::cerr << "enfield: " << r.message << "\n";
        return kNumeric;
    }
    if (!r.loss_curve.empty()) {
        std::cout << what << "\tfinal_loss\t" << format_double(r.loss_curve.back()) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    CLI::App app{"enfield - equivariant neural-field operator learning"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--threads", common.threads, "Worker threads (default: $ENFIELD_THREADS or 1)");
    app.add_option("--seed", common.seed, "Random seed for generation and training");
    app.add_option("--config", common.config_file, "key=value configuration file");
    app.add_option("--set", common.sets, "Override one configuration key (key=value), repeatable");
    app.add_flag("-v,--verbose", common.verbose, "Log progress to stderr");
    app.add_flag("-q,--quiet", common.quiet, "Suppress warnings");

    // gen-flow
    auto* gen_flow = app.add_subcommand("gen-flow", "Generate the cylinder potential-flow dataset");
    FlowDatasetConfig flow_cfg;
    std::string out_dir;
    std::string radius = "0.2,0.5", speed = "0.5,1.5", angle = "-10,15", gamma = "-2,2", cx = "0,0", cy = "0,0";
    gen_flow->add_option("--out", out_dir, "Output directory")->required();
    gen_flow->add_option("--n-train", flow_cfg.n_train, "Training samples")->capture_default_str();
    gen_flow->add_option("--n-test", flow_cfg.n_test, "Test samples")->capture_default_str();
    gen_flow->add_option("--points", flow_cfg.points, "Points per sample")->capture_default_str();
    gen_flow->add_option("--surface-points", flow_cfg.surface_points, "Boundary points per sample")->capture_default_str();
    gen_flow->add_option("--radius", radius, "Cylinder radius range lo,hi")->capture_default_str();
    gen_flow->add_option("--speed", speed, "Freestream speed range lo,hi")->capture_default_str();
    gen_flow->add_option("--angle", angle, "Angle of attack range in degrees lo,hi")->capture_default_str();
    gen_flow->add_option("--circulation", gamma, "Circulation range lo,hi (clockwise positive)")->capture_default_str();
    gen_flow->add_option("--center-x", cx, "Cylinder centre x range lo,hi")->capture_default_str();
    gen_flow->add_option("--center-y", cy, "Cylinder centre y range lo,hi")->capture_default_str();

    // gen-multibody
    auto* gen_mb = app.add_subcommand("gen-multibody", "Generate the two-body SDF dataset");
    MultibodyConfig mb_cfg;
    std::string offset = "0.85,1.15", mb_angle = "-50,10";
    gen_mb->add_option("--out", out_dir, "Output directory")->required();
    gen_mb->add_option("--n-samples", mb_cfg.n_samples, "Total samples")->capture_default_str();
    gen_mb->add_option("--n-test", mb_cfg.n_test, "Samples held out for testing")->capture_default_str();
    gen_mb->add_option("--points", mb_cfg.points, "Points per sample")->capture_default_str();
    gen_mb->add_option("--surface-points", mb_cfg.surface_points, "Boundary points per sample")->capture_default_str();
    gen_mb->add_option("--offset", offset, "Secondary body distance range lo,hi")->capture_default_str();
    gen_mb->add_option("--angle", mb_angle, "Secondary body direction range in degrees lo,hi")->capture_default_str();

    // training
    std::string data, ckpt, out_file, curve, sample_file, points_file, results;
    bool plots = false;
    auto* train_enc = app.add_subcommand("train-encoder", "Train the meta-learned encoder");
    train_enc->add_option("--data", data, "Dataset directory or manifest")->required();
    train_enc->add_option("--out", out_file, "Checkpoint to write")->required();
    train_enc->add_option("--curve", curve, "Write the loss curve as TSV");

    auto* train_dec = app.add_subcommand("train-decoder", "Train the output decoder with a frozen encoder");
    train_dec->add_option("--data", data, "Dataset directory or manifest")->required();
    train_dec->add_option("--ckpt", ckpt, "Encoder checkpoint")->required();
    train_dec->add_option("--out", out_file, "Checkpoint to write")->required();
    train_dec->add_option("--curve", curve, "Write the loss curve as TSV");

    auto* encode_cmd = app.add_subcommand("encode", "Fit latents to one sample");
    encode_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    encode_cmd->add_option("--sample", sample_file, "ENFD sample")->required();
    encode_cmd->add_option("--out", out_file, "TSV output (default stdout)");

    auto* infer = app.add_subcommand("infer", "Predict the output field of a sample");
    infer->add_option("--ckpt", ckpt, "Checkpoint with decoder")->required();
    infer->add_option("--sample", sample_file, "ENFD sample providing the input field and mu")->required();
    infer->add_option("--points", points_file, "ENFD sample whose coordinates are the query points");
    infer->add_option("--out", out_file, "TSV output (default stdout)");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--data", data, "Dataset directory or manifest")->required();
    eval_cmd->add_option("--results", results, "Directory for TSV reports");
    eval_cmd->add_flag("--plots", plots, "Write PPM heatmaps of the first test sample");

    std::string resolutions = "512,1024,2048,4096";
    auto* sweep = app.add_subcommand("sweep-res", "Evaluate at several mesh resolutions");
    sweep->add_option("--ckpt", ckpt, "Checkpoint with decoder")->required();
    sweep->add_option("--data", data, "Flow dataset directory or manifest")->required();
    sweep->add_option("--resolutions", resolutions, "Comma-separated point counts")->capture_default_str();
    sweep->add_option("--results", results, "Directory for TSV reports");

    std::string shapes = "4x16,9x8,16x4";
    auto* ablate = app.add_subcommand("ablate-capacity", "Train several latent shapes with equal budgets");
    ablate->add_option("--data", data, "Dataset directory or manifest")->required();
    ablate->add_option("--shapes", shapes, "Comma-separated latent shapes COUNTxDIM")->capture_default_str();
    ablate->add_option("--results", results, "Directory for TSV reports");

    std::string local_shape = "4x8";
    std::size_t global_dim = 32;
    auto* compare = app.add_subcommand("compare-encodings", "Local anchored latents against one global latent");
    compare->add_option("--data", data, "Two-body dataset directory or manifest")->required();
    compare->add_option("--local", local_shape, "Local latent shape COUNTxDIM")->capture_default_str();
    compare->add_option("--global-dim", global_dim, "Global latent size")->capture_default_str();
    compare->add_option("--results", results, "Directory for TSV reports");

    bool tiny = false;
    auto* check = app.add_subcommand("check-grad", "Finite-difference gradient suites");
    check->add_flag("--tiny", tiny, "Tiny configurations (the only mode)");

    auto* export_cmd = app.add_subcommand("export-latents", "Encode a dataset and write raw f32 latent tables");
    export_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    export_cmd->add_option("--data", data, "Dataset directory or manifest")->required();
    export_cmd->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    set_log_verbose(common.verbose);
    set_log_muted(common.quiet);

    try {
        if (*gen_flow) {
            flow_cfg.radius = parse_range(radius);
            flow_cfg.speed = parse_range(speed);
            flow_cfg.angle_deg = parse_range(angle);
            flow_cfg.circulation = parse_range(gamma);
            flow_cfg.center_x = parse_range(cx);
            flow_cfg.center_y = parse_range(cy);
            flow_cfg.seed = common.seed.value_or(0);
            const auto m = save_dataset(out_dir, make_flow_dataset(flow_cfg));
            std::cout << "wrote\t" << m.train.size() << " train\t" << m.test.size() << " test\t" << out_dir << "\n";
            return 0;
        }
        if (*gen_mb) {
            mb_cfg.offset = parse_range(offset);
            mb_cfg.angle_deg = parse_range(mb_angle);
            mb_cfg.seed = common.seed.value_or(0);
            const auto m = save_dataset(out_dir, make_multibody_dataset(mb_cfg));
            std::cout << "wrote\t" << m.train.size() << " train\t" << m.test.size() << " test\t" << out_dir << "\n";
            return 0;
        }
        if (*train_enc) {
            const Dataset ds = load_dataset(data);
            RunConfig rc;
            adopt_data_dims(rc.model, ds);
            apply_overrides(rc, common);
            Checkpoint c;
            c.model = init_model(rc.model, compute_norm_stats(ds.train), rc.train.seed);
            c.train = rc.train;
            const auto report = train_encoder(c.model, ds.train, rc.train);
            save_checkpoint(out_file, c);
            write_curve(curve, report);
            return finish_training(report, "encoder");
        }
        if (*train_dec) {
            const Dataset ds = load_dataset(data);
            Checkpoint c = load_checkpoint(ckpt);
            RunConfig rc{c.model.config, c.train};
            apply_overrides(rc, common);
            auto frozen = to_key_values(rc.model, rc.train);
            auto before = to_key_values(c.model.config, c.train);
            for (const char* k : {"model.blocks", "model.block_key_dim", "model.decoder_rff_sigma", "model.decoder_key_dim",
                                  "model.decoder_value_dim", "model.decoder_rff_dim"}) {
                frozen.erase(k);
                before.erase(k);
            }
            for (const auto& [k, v] : before) {
                if (k.rfind("model.", 0) == 0 && frozen.at(k) != v) {
                    throw ConfigError("cannot change encoder setting " + k + " of a trained checkpoint");
                }
            }
            c.model.config = rc.model;
            c.train = rc.train;
            init_decoder(c.model, rc.train.seed);
            const auto report = train_decoder(c.model, ds.train, rc.train);
            save_checkpoint(out_file, c);
            write_curve(curve, report);
            return finish_training(report, "decoder");
        }
        if (*encode_cmd) {
            const Checkpoint c = load_checkpoint(ckpt);
            const FieldSample s = load_sample(sample_file);
            Model m = c.model;
            m.has_decoder = false;  // only the input field is needed
            const auto p = predict(m, s);
            std::vector<std::vector<std::string>> rows;
            for (std::size_t j = 0; j < p.encoding.z.size(); ++j) {
                std::vector<std::string> row{std::to_string(j)};
                for (std::size_t k = 0; k < p.encoding.z.positions.cols(); ++k) row.push_back(format_double(p.encoding.z.positions(j, k)));
                for (std::size_t k = 0; k < p.encoding.z.features.cols(); ++k) row.push_back(format_double(p.encoding.z.features(j, k)));
                rows.push_back(row);
            }
            std::vector<std::string> header{"latent"};
            for (std::size_t k = 0; k < p.encoding.z.positions.cols(); ++k) header.push_back("p" + std::to_string(k));
            for (std::size_t k = 0; k < p.encoding.z.features.cols(); ++k) header.push_back("c" + std::to_string(k));
            std::string table = format_tsv(header, rows);
            table += "# inner-loop losses:";
            for (double l : p.encoding.trace.losses) table += " " + format_double(l);
            table += "\n";
            if (out_file.empty()) std::cout << table; else write_file(out_file, table);
            return 0;
        }
        if (*infer) {
            const Checkpoint c = load_checkpoint(ckpt);
            const FieldSample s = load_sample(sample_file);
            const auto p = predict(c.model, s);
            Tensor coords = s.coords;
            Tensor values;
            if (!points_file.empty()) {
                coords = load_sample(points_file).coords;
                if (coords.cols() != c.model.config.dim) {
                    throw DimensionError("query points have dimension " + std::to_string(coords.cols()) + ", model expects " +
                                         std::to_string(c.model.config.dim));
                }
            }
            values = points_file.empty() ? denormalize(p.output, c.model.stats)
                                         : denormalize(decode_at(c.model, p.encoding, s.mu, coords), c.model.stats);
            std::vector<std::vector<std::string>> rows;
            for (std::size_t i = 0; i < coords.rows(); ++i) {
                std::vector<std::string> row;
                for (std::size_t k = 0; k < coords.cols(); ++k) row.push_back(format_double(coords(i, k)));
                for (std::size_t k = 0; k < values.cols(); ++k) row.push_back(format_double(values(i, k)));
                rows.push_back(row);
            }
            std::vector<std::string> header;
            for (std::size_t k = 0; k < coords.cols(); ++k) header.push_back("x" + std::to_string(k));
            for (std::size_t k = 0; k < values.cols(); ++k) header.push_back("u" + std::to_string(k));
            const std::string table = format_tsv(header, rows);
            if (out_file.empty()) std::cout << table; else write_file(out_file, table);
            return 0;
        }
        if (*eval_cmd) {
            const Checkpoint c = load_checkpoint(ckpt);
            const Dataset ds = load_dataset(data);
            EvalOptions opt;
            opt.threads = resolve_threads(common);
            const auto r = evaluate_model(c.model, ds.test, opt);
            std::vector<std::vector<std::string>> rows{
                {"volume_mse", fmt(r.volume_mse)},
                {"surface_mse", fmt(r.surface_mse)},
                {"output_mse", fmt(r.output_mse)},
                {"input_mse", fmt(r.input_mse)},
                {"seconds_per_sample", fmt(r.seconds_per_sample)}};
            if (r.has_lift) {
                rows.push_back({"cl_mse", fmt(r.cl_mse)});
                rows.push_back({"cl_mse_normalized", fmt(r.cl_mse_normalized)});
                rows.push_back({"spearman_lift", fmt(r.spearman_lift)});
            }
            emit(format_tsv({"metric", "value"}, rows), results, "metrics.tsv");
            std::vector<std::vector<std::string>> per;
            for (std::size_t i = 0; i < r.samples.size(); ++i) {
                const auto& s = r.samples[i];
                per.push_back({std::to_string(i), fmt(s.volume_mse), fmt(s.surface_mse), fmt(s.input_mse), fmt(s.cl_pred),
                               fmt(s.cl_true), fmt(s.cl_closed)});
            }
            const std::string per_table =
                format_tsv({"sample", "volume_mse", "surface_mse", "input_mse", "cl_pred", "cl_true", "cl_closed_form"}, per);
            if (!results.empty()) write_file(std::filesystem::path(results) / "samples.tsv", per_table);
            if (plots) {
                if (results.empty()) throw ConfigError("--plots needs --results");
                const auto& s = ds.test.front();
                if (s.dim() != 2) throw DataError("heatmaps need two-dimensional samples");
                const auto p = predict(c.model, s);
                std::vector<double> truth, pred, err;
                const Tensor phys = c.model.has_decoder ? denormalize(p.output, c.model.stats) : p.input;
                const Tensor& ref = c.model.has_decoder ? s.output : s.input;
                for (std::size_t i = 0; i < s.size(); ++i) {
                    truth.push_back(ref(i, 0));
                    pred.push_back(phys(i, 0));
                    err.push_back(phys(i, 0) - ref(i, 0));
                }
                const std::filesystem::path dir(results);
                write_heatmap_ppm(dir / "truth.ppm", s.coords, truth, 160, 160);
                write_heatmap_ppm(dir / "prediction.ppm", s.coords, pred, 160, 160);
                write_heatmap_ppm(dir / "error.ppm", s.coords, err, 160, 160);
            }
            return 0;
        }
        if (*sweep) {
            const Checkpoint c = load_checkpoint(ckpt);
            const Dataset ds = load_dataset(data);
            std::vector<std::size_t> res;
            for (double v : parse_doubles(resolutions)) {
                if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("resolutions must be positive integers");
                res.push_back(static_cast<std::size_t>(v));
            }
            EvalOptions opt;
            opt.threads = resolve_threads(common);
            const auto rows = discretization_sweep(c.model, ds.test, res, common.seed.value_or(0), opt);
            std::vector<std::vector<std::string>> t;
            for (const auto& r : rows) {
                t.push_back({std::to_string(r.points), fmt(r.volume_mse), fmt(r.surface_mse), fmt(r.seconds_per_sample)});
            }
            emit(format_tsv({"points", "volume_mse", "surface_mse", "seconds_per_sample"}, t), results, "sweep.tsv");
            return 0;
        }
        if (*ablate) {
            const Dataset ds = load_dataset(data);
            RunConfig rc;
            adopt_data_dims(rc.model, ds);
            apply_overrides(rc, common);
            std::vector<LatentShape> list;
            std::istringstream is(shapes);
            for (std::string item; std::getline(is, item, ',');) list.push_back(parse_shape(item));
            EvalOptions opt;
            opt.threads = rc.train.threads;
            const auto rows = ablate_capacity(ds, rc.model, rc.train, list, opt);
            std::vector<std::vector<std::string>> t;
            int status = 0;
            for (const auto& r : rows) {
                t.push_back({std::to_string(r.shape.count) + "x" + std::to_string(r.shape.dim), fmt(r.input_mse), fmt(r.output_mse)});
                if (r.encoder_report.diverged || r.decoder_report.diverged) status = kNumeric;
            }
            emit(format_tsv({"latents", "input_mse", "output_mse"}, t), results, "ablation.tsv");
            return status;
        }
        if (*compare) {
            const Dataset ds = load_dataset(data);
            RunConfig rc;
            adopt_data_dims(rc.model, ds);
            const auto shape = parse_shape(local_shape);
            rc.model.latent_count = shape.count;
            rc.model.latent_dim = shape.dim;
            apply_overrides(rc, common);
            ModelConfig global = rc.model;
            global.latent_count = 1;
            global.latent_dim = global_dim;
            global.window = 0.0;
            EvalOptions opt;
            opt.threads = rc.train.threads;
            const auto r = compare_local_global(ds, rc.model, global, rc.train, opt);
            emit(format_tsv({"local_mse", "global_mse", "global_over_local"}, {{fmt(r.local_mse), fmt(r.global_mse), fmt(r.ratio)}}),
                 results, "local_global.tsv");
            return r.local_report.diverged || r.global_report.diverged ? kNumeric : 0;
        }
        if (*check) {
            (void)tiny;
            bool pass = true;
            for (const auto& s : run_gradient_suites(common.seed.value_or(0))) {
                std::cout << s.name << "\tmax_rel_error\t" << fmt(s.report.max_rel_error) << "\ttol\t" << fmt(s.tol) << "\t"
                          << (s.report.pass ? "PASS" : "FAIL") << "\n";
                pass = pass && s.report.pass;
            }
            return pass ? 0 : kNumeric;
        }
        if (*export_cmd) {
            const Checkpoint c = load_checkpoint(ckpt);
            const Dataset ds = load_dataset(data);
            Model m = c.model;
            m.has_decoder = false;
            ByteWriter blob;
            std::vector<std::vector<std::string>> index;
            std::size_t row = 0;
            auto run = [&](const std::vector<FieldSample>& split, const char* name) {
                for (std::size_t i = 0; i < split.size(); ++i) {
                    const auto p = predict(m, split[i]);
                    for (double v : p.encoding.z.features.values()) blob.put_f32(static_cast<float>(v));
                    index.push_back({name, std::to_string(i), std::to_string(row)});
                    ++row;
                }
            };
            run(ds.train, "train");
            run(ds.test, "test");
            const std::filesystem::path dir(out_dir);
            write_file(dir / "latents.f32", blob.bytes());
            write_file(dir / "latents_index.tsv", format_tsv({"split", "sample", "row"}, index));
            std::vector<std::vector<std::string>> pos;
            for (std::size_t j = 0; j < m.encoder.positions.rows(); ++j) {
                std::vector<std::string> r{std::to_string(j)};
                for (std::size_t k = 0; k < m.encoder.positions.cols(); ++k) r.push_back(format_double(m.encoder.positions(j, k)));
                pos.push_back(r);
            }
            write_file(dir / "positions.tsv", format_tsv({"latent", "p0", "p1"}, pos));
            std::cout << "wrote\t" << row << " rows of " << m.encoder.latent_count() * m.encoder.latent_dim()
                      << " f32 values\t" << (dir / "latents.f32").string() << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "enfield: configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "enfield: data error: " << e.what() << "\n";
        return kData;
    } catch (const DomainError& e) {
        std::cerr << "enfield: data error: " << e.what() << "\n";
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "enfield: I/O error: " << e.what() << "\n";
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "enfield: numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "enfield: error: " << e.what() << "\n";
        return kNumeric;
    }
    return kUsage;
}
