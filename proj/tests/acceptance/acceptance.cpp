// Acceptance run: every criterion prints one PASS/FAIL line; the exit status
// is non-zero when any criterion fails.

#include "riverflow/common/error.hpp"
#include "riverflow/geostat/geostat.hpp"
#include "riverflow/inversion/inversion.hpp"
#include "riverflow/nn/gradcheck.hpp"
#include "riverflow/nn/loss.hpp"
#include "riverflow/nn/network.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/pipeline/pipeline.hpp"
#include "riverflow/scenario/gauge.hpp"
#include "riverflow/surrogate/pca.hpp"
#include "riverflow/surrogate/prediction.hpp"
#include "riverflow/surrogate/training.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

using namespace riverflow;
namespace fs = std::filesystem;
using surrogate::Scope;
using surrogate::Variant;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0)
{
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string num(double v, const char* fmt = "%.4g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

const fs::path kSource = RIVERFLOW_SOURCE_DIR;
const fs::path kWork = RIVERFLOW_ACCEPTANCE_DIR;

// ---------------------------------------------------------------------------
// 1. PCA reconstruction error against a dense SVD.

Outcome pca_correctness()
{
    const auto t0 = clock_type::now();
    const Eigen::Index n = 30, m = 48;
    std::mt19937_64 rng(101);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Decaying spectrum so every truncation level matters.
    Eigen::MatrixXd a(n, m), b(m, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) a(i, j) = normal(rng) * std::pow(0.8, double(j));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) b(i, j) = normal(rng);
    Eigen::MatrixXd x = a * Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() * 3.0;
    x.rowwise() += Eigen::RowVectorXd::LinSpaced(m, 5.0, -2.0);

    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const Eigen::VectorXd s = svd.singularValues();

    double worst = 0.0, prev = INFINITY;
    bool monotone = true;
    for (std::size_t l = 1; l < std::size_t(n); ++l) {
        const auto basis = surrogate::fit_pca(x, l);
        const Eigen::MatrixXd rec = basis.reconstruct_rows(basis.project_rows(x));
        const double ours = std::sqrt((rec - x).squaredNorm() / double(n * m));
        const double tail = s.tail(s.size() - Eigen::Index(l)).squaredNorm();
        const double oracle = std::sqrt(tail / double(n * m));
        worst = std::max(worst, std::abs(ours - oracle));
        if (ours > prev) monotone = false;
        prev = ours;
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-9 && monotone && dt < 5.0,
            "max |ours - svd| = " + num(worst) + ", monotone " + (monotone ? "yes" : "no") + ", " + num(dt, "%.2f") +
                " s"};
}

// ---------------------------------------------------------------------------
// 2. Finite-difference gradient checks.

nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, double scale = 1.0)
{
    nn::Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    for (auto& v : t.values()) v = normal(rng);
    return t;
}

double layer_check(nn::Shape in, std::vector<nn::LayerSpec> specs, std::uint64_t seed)
{
    nn::Sequential net(in, std::move(specs));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.4);
    for (nn::Param* p : net.params())
        for (auto& v : p->value.values()) v = normal(rng) + (p->name == "gamma" ? 1.0 : 0.0);
    nn::Shape xs{4};
    xs.insert(xs.end(), in.begin(), in.end());
    nn::Param input{"input", random_tensor(xs, seed + 1), nn::Tensor(xs), false};
    const nn::Tensor target = random_tensor(net.forward(input.value, nn::Mode::train).shape(), seed + 2);
    const double l2 = 0.01;
    auto loss = [&] {
        return nn::mse_loss(net.forward(input.value, nn::Mode::train), target) + nn::l2_penalty(net.params(), l2, false);
    };
    auto grads = [&] {
        net.zero_grad();
        nn::Tensor dy;
        nn::mse_loss(net.forward(input.value, nn::Mode::train), target, &dy);
        input.grad = net.backward(dy);
        nn::l2_penalty(net.params(), l2, true);
    };
    auto params = net.params();
    params.push_back(&input);
    return nn::check_gradients(loss, grads, params, 100, seed + 3).max_rel_error;
}

double reparam_check()
{
    nn::Param mu{"mu", random_tensor({3, 4}, 20, 0.5), nn::Tensor({3, 4}), false};
    nn::Param lv{"log_var", random_tensor({3, 4}, 21, 0.5), nn::Tensor({3, 4}), false};
    const nn::Tensor eps = nn::standard_normal_like(mu.value, 22);
    const nn::Tensor target = random_tensor({3, 4}, 23);
    auto loss = [&] {
        return nn::mse_loss(nn::reparameterize(mu.value, lv.value, eps), target) +
               0.7 * nn::kl_standard_normal(mu.value, lv.value);
    };
    auto grads = [&] {
        mu.grad.fill(0.0);
        lv.grad.fill(0.0);
        nn::Tensor dz;
        nn::mse_loss(nn::reparameterize(mu.value, lv.value, eps), target, &dz);
        nn::reparameterize_backward(lv.value, eps, dz, mu.grad, lv.grad);
        nn::kl_standard_normal(mu.value, lv.value, 0.7, &mu.grad, &lv.grad);
    };
    return nn::check_gradients(loss, grads, {&mu, &lv}, 100, 24).max_rel_error;
}

// Small oracle dataset on a 9 x 20 reach for the model-level checks.
oracle::SampleSet small_dataset()
{
    const auto g = grid::RiverGrid::synthetic_bend(9, 20, 2.4);
    std::vector<double> bed(g.node_count());
    for (std::size_t j = 0; j < g.n_along(); ++j)
        for (std::size_t i = 0; i < g.n_across(); ++i)
            bed[g.shape().index(i, j)] = 24.0 + 2.0 * std::abs(double(i) - 4.0);
    const auto kernel = geostat::build_separable_factors({0.4, 20.0, 6.0}, g.shape(), {10, 6, 30});
    const geostat::LowRankGaussian dist(grid::ScalarField(g.shape(), bed, grid::FieldKind::bathymetry), kernel.factor());
    std::vector<grid::ScalarField> beds;
    for (std::size_t b = 0; b < 12; ++b) beds.push_back(geostat::sample_field(dist, 300 + b));
    oracle::DatasetConfig cfg;
    cfg.bcs_per_bathy = 2;
    return oracle::build_dataset(g, beds, {-6.666e-6, 0.013451, 28.4048}, cfg, {}, 5, kWork / "gradcheck_dataset");
}

Outcome gradient_integrity()
{
    const auto t0 = clock_type::now();
    std::ostringstream detail;
    double worst = 0.0;
    auto record = [&](const std::string& name, double err) {
        worst = std::max(worst, err);
        if (err >= 1e-4) detail << name << " " << num(err) << "; ";
    };
    using nn::LayerSpec;
    record("dense", layer_check({6}, {LayerSpec::dense(6, 4)}, 10));
    record("conv2d", layer_check({2, 7, 5}, {LayerSpec::conv2d(2, 3, 3, 2, 1)}, 20));
    record("conv_transpose2d", layer_check({3, 4, 3}, {LayerSpec::conv_transpose2d(3, 2, 3, 2, 1, 7, 6)}, 30));
    record("batchnorm", layer_check({5}, {LayerSpec::batchnorm(5)}, 40));
    record("batchnorm conv", layer_check({3, 4, 2}, {LayerSpec::batchnorm(3)}, 50));
    record("sve reparameterization", reparam_check());

    const auto ds = small_dataset();
    const auto train = ds.split(oracle::Split::train);
    surrogate::Architecture arch;
    arch.latent_dim = 6;
    arch.dnn_hidden = {16, 16};
    arch.local_dnn_hidden = {16, 16};
    arch.conv_channels = {2, 4};
    arch.local_hidden = {16, 8};
    arch.window_along = 6;
    arch.pca_block = 64;
    for (auto scope : {Scope::global, Scope::local})
        for (auto v : {Variant::linear, Variant::pca_dnn, Variant::se, Variant::sve}) {
            const auto list = scope == Scope::global
                                  ? surrogate::ExampleList::global(train, surrogate::Target::magnitude)
                                  : surrogate::ExampleList::local(train, surrogate::Target::magnitude, arch.window_along);
            auto m = surrogate::SurrogateModel::build(v, scope, surrogate::Target::magnitude, ds.grid().shape(), arch,
                                                      list.items(), 21);
            const std::vector<std::size_t> idx{0, 3, 5, 8, 13};
            const auto batch = surrogate::gather(m.tensors(list.items()), idx);
            nn::TrainSpec spec;
            spec.l2_coeff = 0.05;
            spec.kl_weight = 0.5;
            auto loss = [&] { return m.objective(batch, spec, 77, false); };
            auto grads = [&] { m.objective(batch, spec, 77, true); };
            record(std::string(to_string(scope)) + " " + std::string(to_string(v)) + " objective",
                   nn::check_gradients(loss, grads, m.params(), 100, 5).max_rel_error);
        }
    const double dt = seconds_since(t0);
    return {worst < 1e-4 && dt < 60.0,
            detail.str() + "max relative error " + num(worst) + " over 14 checks, " + num(dt, "%.2f") + " s"};
}

// ---------------------------------------------------------------------------
// 3. Oracle mass conservation on the desk grid.

Outcome oracle_conservation()
{
    const auto t0 = clock_type::now();
    const auto g = grid::RiverGrid::synthetic_bend(41, 64, 2.4);
    const auto factors = geostat::build_separable_factors({}, g.shape());
    const geostat::LowRankGaussian prior(oracle::template_bathymetry(g), factors.factor());
    const auto curve = scenario::fit_stage_discharge(scenario::ingest_gauge_csv(kSource / "data" / "synthetic_gauge.csv"));
    const auto bcs = scenario::sample_bc(curve, 100, 404);
    double worst = 0.0;
    std::size_t failures = 0;
    for (std::size_t k = 0; k < 100; ++k) {
        const auto bed = geostat::sample_field(prior, 500 + k);
        try {
            const auto st = oracle::solve_steady(g, bed, bcs[k]);
            for (std::size_t j = 0; j < g.n_along(); ++j) {
                double q = 0.0;
                for (std::size_t i = 0; i < g.n_across(); ++i) {
                    const auto n = g.shape().index(i, j);
                    const double speed = std::hypot(st.velocity.easting()[n], st.velocity.northing()[n]);
                    q += speed * st.depth[n] * g.spacing_m();
                }
                worst = std::max(worst, std::abs(q - bcs[k].discharge_q) / bcs[k].discharge_q);
            }
        } catch (const SolveError&) {
            ++failures;
        }
    }
    const double dt = seconds_since(t0);
    return {failures == 0 && worst < 1e-3 && dt < 30.0,
            "max relative section discharge error " + num(worst) + ", " + std::to_string(failures) +
                " failed solves, " + num(dt, "%.2f") + " s"};
}

// ---------------------------------------------------------------------------
// 9. Inversion with a linear forward map on a 5 x 7 grid.

Outcome inversion_sanity()
{
    const grid::GridShape shape{5, 7, 1.0};
    std::vector<double> mean(35);
    for (std::size_t n = 0; n < 35; ++n) mean[n] = 10.0 + 0.2 * double(n % 5) - 0.1 * double(n / 5);
    const auto full = geostat::build_separable_factors({1.0, 3.0, 2.0}, shape, {7, 5, 35});
    const geostat::LowRankGaussian prior(grid::ScalarField(shape, mean), full.factor().leftCols(20));
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd gm(35, 35);
    for (Eigen::Index r = 0; r < 35; ++r)
        for (Eigen::Index c = 0; c < 35; ++c) gm(r, c) = normal(rng) / 6.0;
    const auto draw = geostat::sample_field(prior, 10);
    const Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(draw.values().data(), 35);
    const Eigen::VectorXd d = gm * truth;

    inversion::InversionConfig cfg;
    cfg.n_pc = 20;
    cfg.obs_noise_sigma = 0.05;
    const auto r = inversion::invert_with_forward([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return gm * x; },
                                                  d, prior, cfg);
    const Eigen::MatrixXd& f = prior.factor();
    const Eigen::MatrixXd q = f * f.transpose();
    const Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mean.data(), 35);
    const double s2 = cfg.obs_noise_sigma * cfg.obs_noise_sigma;
    const Eigen::MatrixXd s = gm * q * gm.transpose() + s2 * Eigen::MatrixXd::Identity(35, 35);
    const Eigen::VectorXd gls = mu + q * gm.transpose() * s.fullPivLu().solve(d - gm * mu);
    const Eigen::VectorXd ours = Eigen::Map<const Eigen::VectorXd>(r.posterior.mean().values().data(), 35);
    const double err = (ours - gls).cwiseAbs().maxCoeff();
    double max_var = 0.0;
    for (Eigen::Index c = 0; c < r.coef_covariance.rows(); ++c) max_var = std::max(max_var, r.coef_covariance(c, c));
    return {err < 1e-6 && max_var <= 1.0,
            "max |mean - GLS| " + num(err) + ", largest posterior coefficient variance " + num(max_var) +
                " (prior 1)"};
}

// ---------------------------------------------------------------------------
// Pipeline-based criteria.

void print(int id, const std::string& name, const Outcome& o)
{
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << o.detail << std::endl;
}

Outcome method_ordering(const pipeline::PipelineResult& r, double run_seconds)
{
    const double se = r.model("se").test_rmse, lin = r.model("linear").test_rmse;
    double best = INFINITY;
    std::ostringstream s;
    for (const char* n : {"linear", "pca_dnn", "se", "sve"}) {
        best = std::min(best, r.model(n).test_rmse);
        s << n << " " << num(r.model(n).test_rmse, "%.5f") << ", ";
    }
    const bool ok = se < lin && se <= 1.05 * best && run_seconds < 1800.0;
    s << "se/min " << num(se / best, "%.4f") << ", pipeline " << num(run_seconds, "%.0f") << " s";
    return {ok, s.str()};
}

Outcome local_collapse(const pipeline::PipelineResult& r)
{
    const double lin = r.model("local_linear").test_rmse, se = r.model("local_se").test_rmse;
    return {lin >= 2.0 * se, "local linear " + num(lin, "%.5f") + ", local se " + num(se, "%.5f") + ", ratio " +
                                 num(lin / se, "%.3f") + " (need >= 2)"};
}

Outcome sensitivity_decay(const pipeline::PipelineResult& r)
{
    bool ok = true;
    std::ostringstream s;
    for (const auto& m : r.models) {
        const double worst = *std::max_element(m.decay_ratio.begin(), m.decay_ratio.end());
        ok = ok && worst < 0.1;
        s << m.name << " " << num(worst, "%.3g") << ", ";
    }
    const double dt = r.stage_time("sensitivity");
    ok = ok && dt < 300.0;
    s << "worst tail/head ratio over splits; " << num(dt, "%.1f") << " s";
    return {ok, s.str()};
}

Outcome partial_limits(const pipeline::PipelineResult& r)
{
    bool ok = true;
    std::ostringstream s;
    for (const auto& m : r.models) {
        const double r0 = m.partial_rmse.front(), rn = m.partial_rmse.back();
        const bool exact = m.sections.back() == r.models.front().sections.back() && rn == m.test_rmse;
        const double drop = (r0 - rn) / r0;
        ok = ok && r0 >= rn && exact && drop >= 0.25;
        s << m.name << " " << num(r0, "%.4f") << "->" << num(rn, "%.4f") << (exact ? "" : " (full != test)") << " -"
          << num(100.0 * drop, "%.0f") << "%, ";
    }
    return {ok, s.str()};
}

Outcome posterior_propagation(const pipeline::PipelineResult& r)
{
    bool ok = true;
    std::ostringstream s;
    const auto post = geostat::LowRankGaussian::load(r.run_dir / "posterior.rlg");
    const geostat::LowRankGaussian point(post.mean(), Eigen::MatrixXd::Zero(post.factor().rows(), 3));
    const auto curve = scenario::StageDischargeCurve::load(r.run_dir / "curve.json");
    for (const auto& m : r.models) {
        if (m.scope != Scope::global) continue;
        const auto model = surrogate::SurrogateModel::load(r.run_dir / "models" / (m.name + ".rfn"));
        const auto flat = surrogate::predict_posterior_ensemble(model, point, {400.0, curve(400.0)}, 5, 1);
        const bool zero = flat.std.max() == 0.0 && flat.std.min() == 0.0;
        const bool ratio = m.propagation_rmse <= 2.0 * m.test_rmse;
        ok = ok && ratio && zero && m.surrogate_std_min >= 0.0;
        s << m.name << " " << num(m.propagation_rmse / m.test_rmse, "%.3f") << "x" << (zero ? "" : " (nonzero std)")
          << ", ";
    }
    s << "ensemble-mean RMSE as a multiple of test RMSE (need <= 2)";
    return {ok, s.str()};
}

} // namespace

int main()
{
    fs::create_directories(kWork);
    int failed = 0;
    auto run = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        if (!o.pass) ++failed;
        print(id, name, o);
    };

    run(1, "PCA correctness", pca_correctness);
    run(2, "gradient integrity", gradient_integrity);
    run(3, "oracle conservation", oracle_conservation);
    run(9, "inversion sanity", inversion_sanity);

    const auto config = pipeline::PipelineConfig::load(kSource / "data" / "desk.config");
    std::optional<pipeline::PipelineResult> first;
    double first_seconds = 0.0;
    try {
        const auto t0 = clock_type::now();
        first = pipeline::run_pipeline(config, kWork / "run_a", &std::cerr);
        first_seconds = seconds_since(t0);
    } catch (const std::exception& e) {
        std::cout << "desk pipeline failed: " << e.what() << std::endl;
    }
    auto with_run = [&](const std::function<Outcome(const pipeline::PipelineResult&)>& f) {
        return [&, f] { return first ? f(*first) : Outcome{false, "desk pipeline did not complete"}; };
    };
    run(4, "method ordering", with_run([&](const auto& r) { return method_ordering(r, first_seconds); }));
    run(5, "local linear collapse", with_run(local_collapse));
    run(6, "sensitivity decay", with_run(sensitivity_decay));
    run(7, "partial-measurement limits", with_run(partial_limits));
    run(8, "posterior propagation", with_run(posterior_propagation));
    run(10, "determinism", with_run([&](const pipeline::PipelineResult& r) {
            const auto again = pipeline::run_pipeline(config, kWork / "run_b", &std::cerr);
            return Outcome{again.manifest_digest == r.manifest_digest,
                           "manifest sha256 " + r.manifest_digest.substr(0, 16) + "... vs " +
                               again.manifest_digest.substr(0, 16) + "..."};
        }));

    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
