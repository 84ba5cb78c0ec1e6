#include "doctest.h"

#include "riverflow/common/digest.hpp"
#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"
#include "riverflow/geostat/geostat.hpp"
#include "riverflow/nn/gradcheck.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/surrogate/prediction.hpp"
#include "riverflow/surrogate/training.hpp"

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>

using namespace riverflow;
using namespace riverflow::surrogate;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("riverflow_surrogate_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// 9 x 20 V-shaped channel with smooth random bed perturbations, solved by the
// steady oracle: 30 beds x 3 BCs, the last 5 beds held out.
const oracle::SampleSet& small_dataset()
{
    static std::unique_ptr<oracle::SampleSet> set;
    if (!set) {
        const auto g = grid::RiverGrid::synthetic_bend(9, 20, 2.4);
        std::vector<double> bed(g.node_count());
        for (std::size_t j = 0; j < g.n_along(); ++j)
            for (std::size_t i = 0; i < g.n_across(); ++i)
                bed[g.shape().index(i, j)] = 24.0 + 2.0 * std::abs(double(i) - 4.0);
        const auto kernel = geostat::build_separable_factors({0.4, 20.0, 6.0}, g.shape(), {10, 6, 30});
        const geostat::LowRankGaussian dist(grid::ScalarField(g.shape(), bed, grid::FieldKind::bathymetry),
                                            kernel.factor());
        std::vector<grid::ScalarField> beds;
        for (std::size_t b = 0; b < 30; ++b) beds.push_back(geostat::sample_field(dist, 100 + b));
        const scenario::StageDischargeCurve curve{-6.666e-6, 0.013451, 28.4048};
        oracle::DatasetConfig cfg;
        cfg.bcs_per_bathy = 3;
        cfg.test_bathys = 5;
        set = std::make_unique<oracle::SampleSet>(
            oracle::build_dataset(g, beds, curve, cfg, {}, 5, scratch("dataset")));
    }
    return *set;
}

Architecture small_arch()
{
    Architecture a;
    a.latent_dim = 6;
    a.dnn_hidden = {16, 16};
    a.local_dnn_hidden = {16, 16};
    a.conv_channels = {2, 4};
    a.local_hidden = {16, 8};
    a.window_along = 6;
    a.pca_block = 64;
    return a;
}

nn::TrainSpec quick_spec(std::size_t epochs = 5)
{
    nn::TrainSpec s;
    s.epochs = epochs;
    s.batch_size = 16;
    s.l2_coeff = 1e-4;
    s.seed = 3;
    return s;
}

std::vector<const oracle::Sample*> split(oracle::Split s) { return small_dataset().split(s); }

bool same_values(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (a.data()[k] != b.data()[k]) return false;
    return true;
}

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t width, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> out(n, std::vector<double>(width));
    for (auto& r : out)
        for (double& v : r) v = normal(rng);
    return out;
}

const Variant kAll[] = {Variant::linear, Variant::pca_dnn, Variant::se, Variant::sve};

} // namespace

TEST_CASE("variant, scope and target names round trip")
{
    for (auto v : kAll) CHECK(parse_variant(to_string(v)) == v);
    CHECK(parse_variant("pca-dnn") == Variant::pca_dnn);
    CHECK(parse_scope("local") == Scope::local);
    CHECK(parse_target("northing") == Target::northing);
    CHECK(parse_tiling("disjoint") == Tiling::disjoint);
    CHECK_THROWS_AS(parse_variant("cnn"), InputError);
}

TEST_CASE("window counts and local input width")
{
    CHECK(window_count(501, 16) == 486);
    CHECK(window_count(64, 16) == 49);
    CHECK(window_count(15, 16) == 0);

    // Default local PCA-DNN: 50 bathymetry coordinates + Q + z_f + d.
    const grid::GridShape shape{41, 64, 2.4};
    const auto bathy = random_rows(60, 41 * 16, 1);
    const auto vel = random_rows(60, 41 * 16, 2);
    std::vector<Example> items;
    for (std::size_t k = 0; k < 60; ++k) items.push_back({bathy[k], {100.0 + double(k), 30.0}, k % 49, vel[k]});
    const auto m = SurrogateModel::build(Variant::pca_dnn, Scope::local, Target::magnitude, shape, Architecture{},
                                         items, 1);
    CHECK(m.decoder().input_shape() == nn::Shape{53});
    CHECK(m.decoder_input_width() == 53);

    const auto train = split(oracle::Split::train);
    const auto list = ExampleList::local(train, Target::magnitude, 6);
    CHECK(list.size() == train.size() * window_count(20, 6));
}

TEST_CASE("PCA variants equal the explicit composition")
{
    const auto& ds = small_dataset();
    for (auto v : {Variant::linear, Variant::pca_dnn}) {
        const auto m = train_global(ds, v, Target::magnitude, quick_spec(), small_arch());
        for (const auto* s : split(oracle::Split::test)) {
            const auto pred = m.predict_global(s->bathy, s->bc);
            const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(s->bathy.values().data(), Eigen::Index(s->bathy.size()));
            const Eigen::VectorXd xl = m.bathy_basis().project(b) / m.input_scale();
            const Example e{s->bathy.values(), s->bc, 0, {}};
            const nn::Tensor cond = m.condition(std::span<const Example>(&e, 1));
            nn::Tensor in({1, m.decoder_input_width()});
            for (std::size_t k = 0; k < m.latent_dim(); ++k) in[k] = xl(Eigen::Index(k));
            in[m.latent_dim()] = cond[0];
            in[m.latent_dim() + 1] = cond[1];
            const nn::Tensor y = m.decoder().infer(in);
            Eigen::VectorXd z(Eigen::Index(m.latent_dim()));
            for (std::size_t k = 0; k < m.latent_dim(); ++k) z(Eigen::Index(k)) = y[k] * m.output_scale();
            const Eigen::VectorXd explicit_pred = m.velocity_basis().reconstruct(z);
            double err = 0.0;
            for (std::size_t n = 0; n < pred.size(); ++n) err = std::max(err, std::abs(pred[n] - explicit_pred(Eigen::Index(n))));
            CHECK(err < 1e-12);
        }
    }
}

TEST_CASE("PCA variants ignore bed changes orthogonal to the basis")
{
    const auto m = train_global(small_dataset(), Variant::pca_dnn, Target::magnitude, quick_spec(), small_arch());
    const auto* s = split(oracle::Split::test).front();
    const auto& U = m.bathy_basis().components;
    Eigen::VectorXd r(U.cols());
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    for (Eigen::Index k = 0; k < r.size(); ++k) r(k) = normal(rng);
    const Eigen::VectorXd orth = r - U.transpose() * (U * r);
    std::vector<double> moved(s->bathy.values().begin(), s->bathy.values().end());
    for (std::size_t k = 0; k < moved.size(); ++k) moved[k] += orth(Eigen::Index(k));
    const grid::ScalarField bed(s->bathy.shape(), moved);
    const auto a = m.predict_global(s->bathy, s->bc);
    const auto b = m.predict_global(bed, s->bc);
    CHECK(grid::field_rmse(a, b) < 1e-10);
    // Zero perturbation is bitwise deterministic.
    const auto c = m.predict_global(grid::ScalarField(s->bathy.shape(), {s->bathy.values().begin(), s->bathy.values().end()}), s->bc);
    for (std::size_t n = 0; n < a.size(); ++n) CHECK(a[n] == c[n]);
    CHECK(a.shape() == s->bathy.shape());
}

TEST_CASE("batched prediction equals one-at-a-time prediction")
{
    const auto test = split(oracle::Split::test);
    for (auto v : kAll) {
        const auto m = train_global(small_dataset(), v, Target::easting, quick_spec(2), small_arch());
        const auto list = ExampleList::global(test, Target::easting);
        const Eigen::MatrixXd all = m.predict(list.items());
        for (std::size_t r = 0; r < list.size(); ++r) {
            const Eigen::MatrixXd one = m.predict(list.items().subspan(r, 1));
            CHECK(same_values(one, all.row(Eigen::Index(r))));
        }
        // decode(encode(x)) reproduces predict.
        const Eigen::MatrixXd again = m.decode(m.encode(list.items()), list.items());
        CHECK((again - all).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("checkpoint round trip is bit-exact")
{
    const auto test = split(oracle::Split::test);
    const auto dir = scratch("ckpt");
    for (auto scope : {Scope::global, Scope::local})
        for (auto v : kAll) {
            const auto& ds = small_dataset();
            const auto m = scope == Scope::global ? train_global(ds, v, Target::magnitude, quick_spec(3), small_arch())
                                                  : train_local(ds, v, Target::magnitude, quick_spec(1), small_arch());
            const auto path = dir / (std::string(to_string(v)) + "_" + std::string(to_string(scope)) + ".rfn");
            m.save(path);
            const auto back = SurrogateModel::load(path);
            CHECK(back.variant() == v);
            CHECK(back.scope() == scope);
            CHECK(back.history().validation_loss == m.history().validation_loss);
            const auto list = scope == Scope::global ? ExampleList::global(test, Target::magnitude)
                                                     : ExampleList::local(test, Target::magnitude, 6);
            CHECK(same_values(m.predict(list.items()), back.predict(list.items())));
            if (uses_pca(v)) {
                const auto& U = back.bathy_basis().components;
                const Eigen::MatrixXd gram = U * U.transpose();
                CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8);
            }
            back.save(dir / "again.rfn");
            CHECK(sha256_file(path) == sha256_file(dir / "again.rfn"));
        }
    CHECK_THROWS(SurrogateModel::load(dir / "missing.rfn"));
}

TEST_CASE("training is deterministic for a fixed seed")
{
    const auto dir = scratch("determinism");
    for (auto v : {Variant::pca_dnn, Variant::sve}) {
        train_global(small_dataset(), v, Target::magnitude, quick_spec(4), small_arch()).save(dir / "a.rfn");
        train_global(small_dataset(), v, Target::magnitude, quick_spec(4), small_arch()).save(dir / "b.rfn");
        CHECK(sha256_file(dir / "a.rfn") == sha256_file(dir / "b.rfn"));
        auto other = quick_spec(4);
        other.seed = 4;
        train_global(small_dataset(), v, Target::magnitude, other, small_arch()).save(dir / "c.rfn");
        CHECK(sha256_file(dir / "a.rfn") != sha256_file(dir / "c.rfn"));
    }
}

TEST_CASE("the returned model is the lowest-validation epoch")
{
    auto spec = quick_spec(30);
    spec.learning_rate = 3e-2; // noisy enough that the last epoch is rarely the best
    const auto& ds = small_dataset();
    for (auto v : {Variant::pca_dnn, Variant::se}) {
        const auto m = train_global(ds, v, Target::magnitude, spec, small_arch());
        const auto& h = m.history();
        REQUIRE(h.validation_loss.size() == 30);
        const auto best = std::min_element(h.validation_loss.begin(), h.validation_loss.end());
        CHECK(std::size_t(best - h.validation_loss.begin()) == h.best_epoch);
        const auto val = ExampleList::global(split(oracle::Split::validation), Target::magnitude);
        const double again = m.evaluation_mse(m.tensors(val.items()));
        CHECK(std::abs(again - *best) <= 1e-12 * std::max(1.0, *best));
    }
}

TEST_CASE("a single sample is fitted almost exactly")
{
    const auto train = split(oracle::Split::train);
    const auto list = ExampleList::global(train, Target::magnitude);
    auto arch = small_arch();
    arch.conv_channels = {8, 16}; // enough decoder width to reach any field on this grid
    for (auto v : {Variant::se, Variant::pca_dnn}) {
        auto m = SurrogateModel::build(v, Scope::global, Target::magnitude, small_dataset().grid().shape(), arch,
                                       list.items(), 11);
        const auto one = list.items().subspan(0, 1);
        const TensorSet t = m.tensors(one);
        nn::TrainSpec spec;
        spec.epochs = 2000;
        spec.learning_rate = 3e-3;
        spec.decay = 0.0;
        fit(m, t, {}, spec);
        const Eigen::MatrixXd y = m.predict(one);
        const auto& target = one[0].target;
        double mean = 0.0, sq = 0.0, var = 0.0;
        for (double x : target) mean += x / double(target.size());
        for (std::size_t k = 0; k < target.size(); ++k) {
            sq += std::pow(y(0, Eigen::Index(k)) - target[k], 2);
            var += std::pow(target[k] - mean, 2);
        }
        const double rmse = std::sqrt(sq / double(target.size())), sd = std::sqrt(var / double(target.size()));
        // The PCA model can only reach the reconstruction of the target in its basis.
        const Eigen::VectorXd t_vec = Eigen::Map<const Eigen::VectorXd>(target.data(), Eigen::Index(target.size()));
        const double floor = uses_pca(v) ? (m.velocity_basis().reconstruct(m.velocity_basis().project(t_vec)) - t_vec).norm() /
                                               std::sqrt(double(target.size()))
                                         : 0.0;
        CHECK(rmse < floor + 1e-3 * sd);
    }

    // Local model, one window.
    const auto windows = ExampleList::local(train, Target::magnitude, arch.window_along);
    auto m = SurrogateModel::build(Variant::se, Scope::local, Target::magnitude, small_dataset().grid().shape(), arch,
                                   windows.items(), 12);
    const auto one = windows.items().subspan(7, 1);
    nn::TrainSpec spec;
    spec.epochs = 500;
    spec.learning_rate = 3e-3;
    spec.decay = 0.0;
    fit(m, m.tensors(one), {}, spec);
    CHECK(m.history().train_loss[m.history().best_epoch] < 1e-6);
}

TEST_CASE("full training objectives pass gradient checks")
{
    const auto train = split(oracle::Split::train);
    const auto& ds = small_dataset();
    for (auto scope : {Scope::global, Scope::local})
        for (auto v : kAll) {
            auto arch = small_arch();
            const auto list = scope == Scope::global ? ExampleList::global(train, Target::easting)
                                                     : ExampleList::local(train, Target::easting, arch.window_along);
            auto m = SurrogateModel::build(v, scope, Target::easting, ds.grid().shape(), arch, list.items(), 21);
            std::vector<std::size_t> idx{0, 3, 5, 8, 13, 21};
            const TensorSet batch = gather(m.tensors(list.items()), idx);
            nn::TrainSpec spec;
            spec.l2_coeff = 0.05;
            spec.kl_weight = 0.5;
            auto loss = [&] { return m.objective(batch, spec, 77, false); };
            auto grads = [&] { m.objective(batch, spec, 77, true); };
            const auto r = nn::check_gradients(loss, grads, m.params(), 100, 5);
            INFO(to_string(v), " ", to_string(scope), " worst ", r.worst);
            CHECK(r.max_rel_error < 1e-4);
        }
}

TEST_CASE("training errors")
{
    const auto& ds = small_dataset();
    auto spec = quick_spec(3);
    spec.optimizer = nn::OptimizerKind::sgd;
    spec.learning_rate = 1e150;
    spec.decay = 0.0;
    CHECK_THROWS_AS(train_global(ds, Variant::pca_dnn, Target::magnitude, spec, small_arch()), SolveError);

    const oracle::SampleSet empty(ds.grid(), {}, {}, "");
    CHECK_THROWS_AS(train_global(empty, Variant::se, Target::magnitude, quick_spec(), small_arch()), InputError);

    const auto m = train_global(ds, Variant::linear, Target::magnitude, quick_spec(1), small_arch());
    const auto other = grid::ScalarField::constant({9, 21, 2.4}, 20.0);
    CHECK_THROWS_AS(m.predict_global(other, {100.0, 30.0}), InputError);
    CHECK_THROWS_AS(m.predict_window(ds.samples()[0].bathy, {100.0, 30.0}, 0), InputError);
}

TEST_CASE("se latents are ordered by decreasing spread")
{
    for (auto v : {Variant::se, Variant::sve}) {
        const auto m = train_global(small_dataset(), v, Target::magnitude, quick_spec(10), small_arch());
        const auto list = ExampleList::global(split(oracle::Split::train), Target::magnitude);
        const Eigen::MatrixXd z = m.encode(list.items());
        std::vector<double> sd;
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            sd.push_back(std::sqrt((z.col(c).array() - z.col(c).mean()).square().mean()));
        for (std::size_t c = 1; c < sd.size(); ++c) CHECK(sd[c] <= sd[c - 1] * (1.0 + 1e-12));
    }
}

TEST_CASE("dense segments average overlapping windows")
{
    const auto& ds = small_dataset();
    const auto m = train_local(ds, Variant::se, Target::magnitude, quick_spec(1), small_arch());
    const auto& s = ds.samples()[0];
    const auto seg = predict_segment(m, s.bathy, s.bc, 2, 8, Tiling::dense);
    CHECK(seg.window_starts == std::vector<std::size_t>{2, 3, 4});
    // Node at along 7 (segment row 5) is covered by windows 2, 3 and 4.
    const auto w2 = m.predict_window(s.bathy, s.bc, 2), w3 = m.predict_window(s.bathy, s.bc, 3),
               w4 = m.predict_window(s.bathy, s.bc, 4);
    const std::size_t na = 9;
    for (std::size_t i = 0; i < na; ++i) {
        const double mean = (w2[5 * na + i] + w3[4 * na + i] + w4[3 * na + i]) / 3.0;
        CHECK(seg.at(i, 5) == doctest::Approx(mean).epsilon(1e-14));
        CHECK(seg.at(i, 0) == w2[i]);
    }
    CHECK_THROWS_AS(predict_segment(m, s.bathy, s.bc, 0, 5, Tiling::dense), InputError);
    CHECK_THROWS_AS(predict_segment(m, s.bathy, s.bc, 16, 6, Tiling::dense), InputError);
}

TEST_CASE("segment of length span + 2 uses three windows")
{
    auto arch = small_arch();
    arch.window_along = 16;
    const grid::GridShape shape{9, 20, 2.4};
    const auto rows = random_rows(20, 9 * 16, 3);
    std::vector<Example> items;
    for (std::size_t k = 0; k < rows.size(); ++k) items.push_back({rows[k], {200.0, 31.0}, k % 5, rows[(k + 1) % 20]});
    const auto m = SurrogateModel::build(Variant::se, Scope::local, Target::magnitude, shape, arch, items, 2);
    const auto bed = grid::ScalarField::constant(shape, 25.0);
    const auto seg = predict_segment(m, bed, {200.0, 31.0}, 1, 18, Tiling::dense);
    CHECK(seg.window_starts == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("windows that agree on a constant average to that constant")
{
    const grid::GridShape shape{9, 20, 2.4};
    auto arch = small_arch();
    const auto rows = random_rows(30, 9 * 6, 4);
    const std::vector<double> constant(9 * 6, 0.7);
    std::vector<Example> items;
    for (std::size_t k = 0; k < rows.size(); ++k) items.push_back({rows[k], {150.0 + double(k), 31.0}, k % 15, constant});
    auto m = SurrogateModel::build(Variant::se, Scope::local, Target::magnitude, shape, arch, items, 5);
    auto ps = m.params();
    for (std::size_t k = ps.size() - 2; k < ps.size(); ++k) ps[k]->value.fill(0.0);
    const auto bed = grid::ScalarField::constant(shape, 25.0);
    const auto seg = predict_segment(m, bed, {300.0, 32.0}, 0, 20, Tiling::dense);
    for (double v : seg.values) CHECK(v == 0.7);
}

TEST_CASE("disjoint tiling concatenates windows bitwise")
{
    const auto& ds = small_dataset();
    const auto m = train_local(ds, Variant::pca_dnn, Target::magnitude, quick_spec(1), small_arch());
    const auto& s = ds.samples()[3];
    const auto seg = predict_segment(m, s.bathy, s.bc, 4, 12, Tiling::disjoint);
    CHECK(seg.window_starts == std::vector<std::size_t>{4, 10});
    const auto a = m.predict_window(s.bathy, s.bc, 4), b = m.predict_window(s.bathy, s.bc, 10);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(seg.values[k] == a[k]);
        CHECK(seg.values[a.size() + k] == b[k]);
    }
    // A ragged length ends with a right-aligned window.
    const auto ragged = predict_segment(m, s.bathy, s.bc, 0, 14, Tiling::disjoint);
    CHECK(ragged.window_starts == std::vector<std::size_t>{0, 6, 8});
    const auto last = m.predict_window(s.bathy, s.bc, 8);
    for (std::size_t j = 12; j < 14; ++j)
        for (std::size_t i = 0; i < 9; ++i) CHECK(ragged.at(i, j) == last[(j - 8) * 9 + i]);
}

TEST_CASE("posterior ensembles")
{
    const auto& ds = small_dataset();
    const auto m = train_global(ds, Variant::se, Target::magnitude, quick_spec(3), small_arch());
    const auto& mean_bed = ds.samples()[0].bathy;
    const grid::BoundaryCondition bc{300.0, 31.5};

    const geostat::LowRankGaussian degenerate(mean_bed, Eigen::MatrixXd::Zero(Eigen::Index(mean_bed.size()), 4));
    const auto flat = predict_posterior_ensemble(m, degenerate, bc, 10, 1);
    const auto direct = m.predict_global(mean_bed, bc);
    for (std::size_t n = 0; n < direct.size(); ++n) {
        CHECK(flat.std[n] == 0.0);
        CHECK(flat.mean[n] == direct[n]);
    }

    const auto kernel = geostat::build_separable_factors({0.3, 20.0, 6.0}, mean_bed.shape(), {8, 5, 20});
    const geostat::LowRankGaussian post(mean_bed, kernel.factor());
    const auto ens = predict_posterior_ensemble(m, post, bc, 100, 8);
    std::vector<grid::ScalarField> preds;
    for (std::size_t i = 0; i < 100; ++i)
        preds.push_back(m.predict_global(geostat::sample_field(post, derive_seed(8, "ensemble", i)), bc));
    for (std::size_t n = 0; n < direct.size(); ++n) {
        double mean = 0.0;
        for (const auto& p : preds) mean += p[n];
        mean /= 100.0;
        double var = 0.0;
        for (const auto& p : preds) var += (p[n] - mean) * (p[n] - mean);
        CHECK(ens.mean[n] == doctest::Approx(mean).epsilon(1e-12));
        CHECK(ens.std[n] == doctest::Approx(std::sqrt(var / 100.0)).epsilon(1e-9));
        CHECK(ens.std[n] >= 0.0);
    }
    const auto brute = ensemble_stats(preds);
    for (std::size_t n = 0; n < direct.size(); ++n) {
        CHECK(brute.mean[n] == ens.mean[n]);
        CHECK(brute.std[n] == ens.std[n]);
    }
    CHECK_THROWS_AS(predict_posterior_ensemble(m, post, bc, 1, 8), InputError);
}

TEST_CASE("local evaluation pools every window")
{
    const auto& ds = small_dataset();
    const auto m = train_local(ds, Variant::linear, Target::magnitude, quick_spec(2), small_arch());
    const auto test = split(oracle::Split::test);
    const auto ev = evaluate(m, test);
    REQUIRE(ev.sample_rmse.size() == test.size());
    double sq = 0.0;
    std::size_t count = 0;
    for (const auto* s : test) {
        const auto truth = target_values(s->velocity, Target::magnitude);
        for (std::size_t d = 0; d < window_count(20, 6); ++d) {
            const auto w = m.predict_window(s->bathy, s->bc, d);
            for (std::size_t k = 0; k < w.size(); ++k, ++count) sq += std::pow(w[k] - truth[d * 9 + k], 2);
        }
    }
    CHECK(ev.rmse == doctest::Approx(std::sqrt(sq / double(count))).epsilon(1e-12));
}
