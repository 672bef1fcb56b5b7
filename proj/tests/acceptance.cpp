// Acceptance checks. Usage: acceptance [criterion ...]; no arguments runs all.
// Prints one PASS/FAIL line per criterion and exits non-zero if any failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "enf/errors.hpp"
#include "enf/eval.hpp"
#include "enf/gradcheck.hpp"
#include "enf/log.hpp"
#include "enf/runtime.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace enf;
using enf::test::max_abs;
using enf::test::max_abs_diff;
using enf::test::random_matrix;

namespace {

constexpr std::uint64_t kDataSeed = 7;
constexpr std::uint64_t kTrainSeed = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- desk-scale flow model shared by criteria 4, 5 and 9 -----------------------

FlowDatasetConfig desk_flow_data() {
    FlowDatasetConfig c;
    c.n_train = 64;
    c.n_test = 16;
    c.points = 2048;
    c.seed = kDataSeed;
    return c;
}

// Latents [9, 8], K = 3, alpha = 1, sigma = 0.1 are the library defaults.
ModelConfig desk_model() { return ModelConfig{}; }

TrainConfig desk_train() {
    TrainConfig t;
    t.seed = kTrainSeed;
    return t;
}

struct FlowRun {
    Dataset data;
    Model model;
    TrainReport encoder, decoder;
    double train_seconds = 0.0;
    double total_seconds = 0.0;
    MetricReport report;
};

FlowRun& flow_run() {
    static std::optional<FlowRun> run;
    if (!run) {
        const auto t0 = Clock::now();
        run.emplace();
        run->data = make_flow_dataset(desk_flow_data());
        run->model = init_model(desk_model(), compute_norm_stats(run->data.train), kTrainSeed);
        run->encoder = train_encoder(run->model, run->data.train, desk_train());
        run->decoder = train_decoder(run->model, run->data.train, desk_train());
        run->train_seconds = seconds_since(t0);
        run->report = evaluate_model(run->model, run->data.test, {1, 1});
        run->total_seconds = seconds_since(t0);
    }
    return *run;
}

// --- criteria ----------------------------------------------------------------

EnfParams random_field(std::size_t latent_dim, std::size_t out_dim, std::mt19937_64& rng) {
    FieldDims d;
    d.latent_dim = latent_dim;
    d.out_dim = out_dim;
    d.window = 0.1;
    EnfParams p = init_enf_params(d, rng);
    for (auto* t : p.trainable()) *t = random_matrix(t->rows(), t->cols(), rng, -0.5, 0.5);
    return p;
}

Outcome equivariance() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> shift(-10.0, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const EnfParams p = random_field(8, 1, rng);
        LatentPointCloud z{random_matrix(9, 2, rng), random_matrix(9, 8, rng)};
        const Tensor x = random_matrix(64, 2, rng);

        DecoderDims dd;
        dd.field.latent_dim = 11;
        dd.field.window = 0.1;
        DecoderParams dec = init_decoder_params(dd, rng);
        const std::vector<double> mu{shift(rng), shift(rng), shift(rng)};

        const double dx = shift(rng), dy = shift(rng);
        LatentPointCloud zs = z;
        Tensor xs = x;
        for (std::size_t j = 0; j < z.size(); ++j) {
            zs.positions(j, 0) += dx;
            zs.positions(j, 1) += dy;
        }
        for (std::size_t m = 0; m < x.rows(); ++m) {
            xs(m, 0) += dx;
            xs(m, 1) += dy;
        }
        auto rel = [](const Tensor& a, const Tensor& b) { return max_abs_diff(a, b) / std::max(max_abs(a), 1e-300); };
        worst = std::max(worst, rel(enf_forward(z, x, p), enf_forward(zs, xs, p)));
        worst = std::max(worst, rel(decode(condition_latents(z, mu), x, dec), decode(condition_latents(zs, mu), xs, dec)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-8 && secs < 10.0, fmt("max relative deviation %.2e over 100 instances, %.2f s", worst, secs)};
}

Outcome gradients() {
    const auto t0 = Clock::now();
    const auto suites = run_gradient_suites(0);
    bool pass = true;
    std::string detail;
    for (const auto& s : suites) {
        pass = pass && s.report.pass;
        detail += fmt("%s %.1e (tol %.0e); ", s.name.c_str(), s.report.max_rel_error, s.tol);
    }
    const double secs = seconds_since(t0);
    return {pass && secs < 60.0, detail + fmt("%.2f s", secs)};
}

Outcome oracles() {
    std::mt19937_64 rng(303);
    double field = 0.0, block = 0.0, loss = 0.0, rank = 0.0;
    const int instances = 25;
    for (int trial = 0; trial < instances; ++trial) {
        const EnfParams p = random_field(4, 2, rng);
        LatentPointCloud z{random_matrix(5, 2, rng), random_matrix(5, 4, rng)};
        const Tensor x = random_matrix(7, 2, rng);
        field = std::max(field, max_abs_diff(enf_forward(z, x, p), test::naive_field(x, z.positions, z.features, p)));

        AttentionBlockParams b{random_matrix(3, 6, rng), random_matrix(3, 6, rng), random_matrix(6, 6, rng)};
        const Tensor c = random_matrix(5, 6, rng, -2, 2);
        block = std::max(block, max_abs_diff(self_attention_block(c, b), test::naive_block(c, b)));

        const Tensor a = random_matrix(9, 2, rng, -3, 3), t = random_matrix(9, 2, rng, -3, 3);
        loss = std::max(loss, std::abs(loss_recon(a, t) - test::naive_loss(a, t)));

        std::vector<double> xs(12), ys(12);
        std::uniform_int_distribution<int> coarse(0, 6);  // coarse values force ties
        for (std::size_t i = 0; i < 12; ++i) {
            xs[i] = coarse(rng);
            ys[i] = xs[i] + coarse(rng);
        }
        xs[0] = -1.0;  // never constant
        ys[1] = 100.0;
        rank = std::max(rank, std::abs(spearman(xs, ys) - test::naive_spearman(xs, ys)));
    }
    const bool pass = field <= 1e-10 && block <= 1e-10 && loss <= 1e-10 && rank <= 1e-10;
    return {pass, fmt("%d instances; enf_forward %.1e, block %.1e, loss %.1e, spearman %.1e", instances, field, block,
                      loss, rank)};
}

Outcome flow_task() {
    const auto& run = flow_run();
    const auto& r = run.report;
    const bool pass = !run.encoder.diverged && !run.decoder.diverged && r.volume_mse < 5e-2 && r.surface_mse < 1e-1 &&
                      r.spearman_lift >= 0.95 && run.total_seconds < 1800.0;
    return {pass, fmt("volume %.4f (< 0.05), surface %.4f (< 0.1), rho_L %.4f (>= 0.95), input %.2e, C_L MSE %.3f, "
                      "%.0f s",
                      r.volume_mse, r.surface_mse, r.spearman_lift, r.input_mse, r.cl_mse, run.total_seconds)};
}

Outcome discretization() {
    const auto& run = flow_run();
    const auto rows = discretization_sweep(run.model, run.data.test, {512, 4096}, 11, {1, 1});
    const double base = rows[0].volume_mse, fine = rows[1].volume_mse;
    const double degradation = (fine - base) / base;
    return {degradation < 0.2, fmt("volume MSE %.4f at 512, %.4f at 4096 points, change %+.1f%% (< +20%%)", base, fine,
                                   100.0 * degradation)};
}

Outcome multi_element() {
    MultibodyConfig mc;
    mc.seed = kDataSeed;
    const Dataset data = make_multibody_dataset(mc);
    ModelConfig local = desk_model();
    local.mu_dim = 0;
    local.latent_count = 4;
    local.latent_dim = 8;
    ModelConfig global = local;
    global.latent_count = 1;
    global.latent_dim = 32;
    global.window = 0.0;
    const auto r = compare_local_global(data, local, global, desk_train());
    return {r.ratio >= 5.0,
            fmt("test SDF MSE local %.3e, global %.3e, ratio %.1f (>= 5)", r.local_mse, r.global_mse, r.ratio)};
}

Outcome ablation() {
    const Dataset data = make_flow_dataset(desk_flow_data());
    const auto rows = ablate_capacity(data, desk_model(), desk_train(), {{4, 16}, {9, 8}, {16, 4}}, {1, 1});
    const auto& a = rows[0];
    const auto& b = rows[1];
    const auto& c = rows[2];
    const bool output_order = b.output_mse < a.output_mse && b.output_mse < c.output_mse;
    const bool input_order = a.input_mse > b.input_mse && a.input_mse > c.input_mse;
    return {output_order && input_order,
            fmt("output MSE [4,16] %.4f, [9,8] %.4f, [16,4] %.4f; SDF MSE [4,16] %.2e, [9,8] %.2e, [16,4] %.2e",
                a.output_mse, b.output_mse, c.output_mse, a.input_mse, b.input_mse, c.input_mse)};
}

Outcome quadrature() {
    double worst_lift = 0.0;
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> gamma(-2.0, 2.0), radius(0.2, 0.5), speed(0.5, 1.5), angle(-0.17, 0.26);
    double worst_stag = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        FlowCase f;
        f.circulation = gamma(rng);
        f.body.radius = radius(rng);
        f.speed = speed(rng);
        f.angle = angle(rng);
        std::mt19937_64 mesh(trial);
        const FieldSample s = make_flow_sample(f, {}, 400, 128, mesh);
        Tensor pts = Tensor::matrix(128, 2);
        std::vector<double> cp;
        for (std::size_t i = 0, k = 0; i < s.size(); ++i) {
            if (!s.surface[i]) continue;
            pts(k, 0) = s.coords(i, 0);
            pts(k, 1) = s.coords(i, 1);
            cp.push_back(s.output(i, 0));
            ++k;
        }
        const double closed = kutta_joukowski_lift(f);
        worst_lift = std::max(worst_lift, std::abs(lift_coefficient(pts, cp, f) - closed) / std::abs(closed));

        // Surface stagnation points: 2 sin(theta) = -Gamma / (2 pi U r) where it has a solution.
        const double s0 = -f.circulation / (4.0 * std::numbers::pi * f.speed * f.body.radius);
        if (std::abs(s0) <= 1.0) {
            for (double theta : {std::asin(s0), std::numbers::pi - std::asin(s0)}) {
                const double t = theta + f.angle;
                const double r = f.body.radius * (1.0 + 1e-14);
                const Vec2 x{f.body.center[0] + r * std::cos(t), f.body.center[1] + r * std::sin(t)};
                worst_stag = std::max(worst_stag, std::abs(potential_flow(f, x).cp - 1.0));
            }
        }
    }
    return {worst_lift <= 0.01 && worst_stag <= 1e-9,
            fmt("max relative lift error %.2e at 128 points (<= 1%%), max |C_p - 1| at stagnation %.1e", worst_lift,
                worst_stag)};
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome serialization() {
    namespace fs = std::filesystem;
    // A small trained model keeps this criterion independent of the long runs.
    FlowDatasetConfig fc = desk_flow_data();
    fc.n_train = 8;
    fc.n_test = 2;
    fc.points = 512;
    Dataset data = make_flow_dataset(fc);
    for (auto& s : data.train) s = s.rounded_to_float();
    for (auto& s : data.test) s = s.rounded_to_float();
    TrainConfig tc = desk_train();
    tc.encoder_epochs = 2;
    tc.decoder_epochs = 2;
    Checkpoint ck{init_model(desk_model(), compute_norm_stats(data.train), kTrainSeed), tc};
    (void)train_encoder(ck.model, data.train, tc);
    (void)train_decoder(ck.model, data.train, tc);

    const fs::path dir = fs::temp_directory_path() / "enf_acceptance_io";
    fs::remove_all(dir);
    fs::create_directories(dir);
    bool ok = true;
    std::string failures;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) {
            ok = false;
            failures += std::string(" ") + what + ";";
        }
    };

    save_checkpoint(dir / "a.enfc", ck);
    const Checkpoint back = load_checkpoint(dir / "a.enfc");
    save_checkpoint(dir / "b.enfc", back);
    const std::string bytes = serialize_checkpoint(ck);
    expect(serialize_checkpoint(back) == bytes, "checkpoint bytes differ after reload");
    const auto p1 = predict(ck.model, data.test[0]);
    const auto p2 = predict(back.model, data.test[0]);
    expect(same_bits(p1.output, p2.output) && same_bits(p1.input, p2.input), "predictions differ after reload");

    save_dataset(dir / "data", data);
    const Dataset loaded = load_dataset(dir / "data");
    bool data_same = loaded.train.size() == data.train.size() && loaded.test.size() == data.test.size();
    for (std::size_t i = 0; data_same && i < data.train.size(); ++i) {
        const auto& a = data.train[i];
        const auto& b = loaded.train[i];
        data_same = same_bits(a.coords, b.coords) && same_bits(a.input, b.input) && same_bits(a.output, b.output) &&
                    a.mu == b.mu && a.surface == b.surface;
    }
    expect(data_same, "dataset differs after reload");

    std::size_t rejected = 0, trials = 0;
    const std::string sample = serialize_sample(data.test[0]);
    for (std::size_t at : {std::size_t{20}, bytes.size() / 3, bytes.size() / 2, bytes.size() - 8}) {
        std::string bad = bytes;
        bad[at] = static_cast<char>(bad[at] ^ 0x04);
        ++trials;
        try {
            (void)deserialize_checkpoint(bad);
        } catch (const LoadError&) {
            ++rejected;
        }
    }
    for (std::size_t at : {std::size_t{24}, sample.size() / 2, sample.size() - 6}) {
        std::string bad = sample;
        bad[at] = static_cast<char>(bad[at] ^ 0x04);
        ++trials;
        try {
            (void)deserialize_sample(bad);
        } catch (const LoadError&) {
            ++rejected;
        }
    }
    expect(rejected == trials, "a corrupted file was accepted");
    fs::remove_all(dir);
    return {ok, fmt("checkpoint %zu bytes and %zu samples round trip; %zu/%zu corrupted files rejected;", bytes.size(),
                    data.train.size() + data.test.size(), rejected, trials) +
                    failures};
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    set_log_muted(true);
    const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria = {
        {1, {"equivariance", equivariance}},
        {2, {"gradient suite", gradients}},
        {3, {"oracle equivalence", oracles}},
        {4, {"desk-scale flow task", flow_task}},
        {5, {"discretization invariance", discretization}},
        {6, {"local vs global encoding", multi_element}},
        {7, {"latent capacity ordering", ablation}},
        {8, {"quadrature and stagnation", quadrature}},
        {9, {"serialization", serialization}},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    if (selected.empty())
        for (const auto& [k, v] : criteria) selected.insert(k);

    int failed = 0;
    for (int k : selected) {
        const auto it = criteria.find(k);
        if (it == criteria.end()) {
            std::printf("criterion %d: FAIL unknown criterion\n", k);
            ++failed;
            continue;
        }
        Outcome o;
        try {
            o = it->second.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %d (%s): %s  %s\n", k, it->second.first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
