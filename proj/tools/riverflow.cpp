// riverflow: command-line front end for the surrogate pipeline.
// Exit codes: 0 success, 2 bad arguments or configuration, 3 stage failure.

#include "riverflow/analysis/analysis.hpp"
#include "riverflow/analysis/report.hpp"
#include "riverflow/common/config.hpp"
#include "riverflow/common/error.hpp"
#include "riverflow/common/parallel.hpp"
#include "riverflow/geostat/geostat.hpp"
#include "riverflow/grid/field_io.hpp"
#include "riverflow/inversion/inversion.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/pipeline/pipeline.hpp"
#include "riverflow/scenario/gauge.hpp"
#include "riverflow/simd/kernels.hpp"
#include "riverflow/surrogate/prediction.hpp"
#include "riverflow/surrogate/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace riverflow;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageFailure = 3;

grid::RiverGrid grid_for(const std::string& grid_file, const grid::GridShape& shape)
{
    if (!grid_file.empty()) {
        auto g = grid::RiverGrid::load(grid_file);
        require(g.shape() == shape, "grid file " + grid_file + " does not match the field shape");
        return g;
    }
    return grid::RiverGrid::synthetic_bend(shape.n_across, shape.n_along, shape.spacing_m);
}

std::vector<grid::ScalarField> load_bathy_dir(const fs::path& dir)
{
    require(fs::is_directory(dir), dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".rfs") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), "no .rfs files in " + dir.string());
    std::vector<grid::ScalarField> out;
    for (const auto& f : files) out.push_back(grid::load_scalar_field(f));
    return out;
}

std::vector<const oracle::Sample*> split_refs(const oracle::SampleSet& set, const std::string& split)
{
    if (split == "all") {
        std::vector<const oracle::Sample*> all;
        for (const auto& s : set.samples()) all.push_back(&s);
        return all;
    }
    return set.split(oracle::parse_split(split));
}

/// TrainSpec and architecture keys; every key is optional.
void read_spec(const fs::path& path, nn::TrainSpec& spec, surrogate::Architecture& arch)
{
    if (path.empty()) return;
    const auto kv = KeyValueConfig::load(path);
    spec.optimizer = nn::parse_optimizer(kv.get_string("optimizer", std::string(nn::to_string(spec.optimizer))));
    spec.learning_rate = kv.get_double("learning_rate", spec.learning_rate);
    spec.decay = kv.get_double("decay", spec.decay);
    spec.batch_size = std::size_t(kv.get_int("batch_size", (long long)spec.batch_size));
    spec.l2_coeff = kv.get_double("l2", spec.l2_coeff);
    spec.epochs = std::size_t(kv.get_int("epochs", (long long)spec.epochs));
    spec.kl_weight = kv.get_double("kl_weight", spec.kl_weight);
    if (kv.contains("seed")) spec.seed = kv.get_u64("seed");
    arch.latent_dim = std::size_t(kv.get_int("latent_dim", (long long)arch.latent_dim));
    arch.window_along = std::size_t(kv.get_int("window_along", (long long)arch.window_along));
    arch.conv_kernel = std::size_t(kv.get_int("conv_kernel", (long long)arch.conv_kernel));
    arch.activation = nn::parse_activation(kv.get_string("activation", std::string(nn::to_string(arch.activation))));
    arch.local_batchnorm = kv.get_bool("local_batchnorm", arch.local_batchnorm);
    auto sizes = [&](const char* key, std::vector<std::size_t>& dst) {
        if (!kv.contains(key)) return;
        dst.clear();
        for (auto v : kv.get_int_list(key)) {
            require(v > 0, std::string("config key '") + key + "' must list positive sizes");
            dst.push_back(std::size_t(v));
        }
    };
    sizes("conv_channels", arch.conv_channels);
    sizes("dnn_hidden", arch.dnn_hidden);
    sizes("local_dnn_hidden", arch.local_dnn_hidden);
    sizes("local_hidden", arch.local_hidden);
    spec.validate();
    arch.validate();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reduced-order surrogates of steady river flow"};
    app.require_subcommand(1);
    std::size_t jobs = 0;
    std::string simd = "auto";
    app.add_option("--jobs", jobs, "worker threads (0 = hardware concurrency)");
    app.add_option("--simd", simd, "kernel backend: auto, scalar or avx2");

    std::function<void()> action;
    auto on = [&](CLI::App* sub, std::function<void()> f) { sub->callback([&action, f] { action = f; }); };

    // gen-bc
    struct {
        std::string gauge, out, units = "si", curve_out;
        std::size_t n = 10;
        std::uint64_t seed = 0;
    } bc;
    auto* c_bc = app.add_subcommand("gen-bc", "fit the stage-discharge curve and draw boundary conditions");
    c_bc->add_option("--gauge", bc.gauge)->required();
    c_bc->add_option("--n", bc.n);
    c_bc->add_option("--seed", bc.seed);
    c_bc->add_option("--units", bc.units);
    c_bc->add_option("--curve-out", bc.curve_out, "also write the fitted curve (JSON)");
    c_bc->add_option("--out", bc.out)->required();
    on(c_bc, [&] {
        const auto curve = scenario::fit_stage_discharge(scenario::ingest_gauge_csv(bc.gauge, scenario::parse_units(bc.units)));
        const auto draws = scenario::sample_bc(curve, bc.n, bc.seed);
        std::ostringstream s;
        for (std::size_t i = 0; i < draws.size(); ++i)
            s << json{{"index", i}, {"discharge_q", draws[i].discharge_q}, {"stage_zf", draws[i].stage_zf}}.dump()
              << '\n';
        analysis::write_text(bc.out, s.str());
        if (!bc.curve_out.empty()) curve.save(bc.curve_out);
        std::cout << "z_f(Q) = " << curve.a << " Q^2 + " << curve.b << " Q + " << curve.c << " on [" << curve.q_min
                  << ", " << curve.q_max << "], residual rms " << curve.residual_rms << " m\n";
    });

    // gen-bathy
    struct {
        std::string posterior, out;
        double beta = 1.2, lx = 115.0, ly = 29.0, w_min = 0.15, power = 1.0;
        std::size_t n = 450;
        std::uint64_t seed = 0;
    } gb;
    auto* c_gb = app.add_subcommand("gen-bathy", "augmented bed samples from a posterior");
    c_gb->add_option("--posterior", gb.posterior)->required();
    c_gb->add_option("--beta", gb.beta);
    c_gb->add_option("--lx", gb.lx);
    c_gb->add_option("--ly", gb.ly);
    c_gb->add_option("--w-min", gb.w_min);
    c_gb->add_option("--power", gb.power);
    c_gb->add_option("--n", gb.n);
    c_gb->add_option("--seed", gb.seed);
    c_gb->add_option("--out", gb.out)->required();
    on(c_gb, [&] {
        const auto post = geostat::LowRankGaussian::load(gb.posterior);
        const auto w = geostat::WeightProfile::sine_power(post.shape().n_across, gb.w_min, gb.power);
        const auto beds = geostat::augment_posterior(post, {gb.beta, gb.lx, gb.ly}, w, gb.n, gb.seed);
        fs::create_directories(gb.out);
        for (std::size_t b = 0; b < beds.size(); ++b) {
            char name[32];
            std::snprintf(name, sizeof name, "bathy_%04zu.rfs", b);
            grid::save_field(beds[b], fs::path(gb.out) / name);
        }
        std::cout << beds.size() << " beds written to " << gb.out << "\n";
    });

    // simulate
    struct {
        std::string bathy, out, grid, mode = "backwater";
        double q = 0, zf = 0, manning = 0.03;
    } sim;
    auto* c_sim = app.add_subcommand("simulate", "steady oracle solve for one bed and boundary condition");
    c_sim->add_option("--bathy", sim.bathy)->required();
    c_sim->add_option("--q", sim.q)->required();
    c_sim->add_option("--zf", sim.zf)->required();
    c_sim->add_option("--grid", sim.grid, "grid file (default: synthetic bend of the bed's shape)");
    c_sim->add_option("--mode", sim.mode);
    c_sim->add_option("--manning", sim.manning);
    c_sim->add_option("--out", sim.out)->required();
    on(c_sim, [&] {
        const auto bed = grid::load_scalar_field(sim.bathy);
        const auto g = grid_for(sim.grid, bed.shape());
        oracle::OracleConfig oc;
        oc.mode = oracle::parse_stage_mode(sim.mode);
        oc.manning_n = sim.manning;
        const auto st = oracle::solve_steady(g, bed, {sim.q, sim.zf}, oc);
        const fs::path out = sim.out;
        fs::create_directories(out);
        grid::save_field(st.velocity, out / "velocity.rfs");
        grid::save_field(st.depth, out / "depth.rfs");
        std::ostringstream s;
        s << "j,surface_m\n";
        for (std::size_t j = 0; j < st.surface.size(); ++j) s << j << ',' << analysis::format_double(st.surface[j]) << '\n';
        analysis::write_text(out / "surface.csv", s.str());
        std::cout << "solved; outlet surface " << st.surface.back() << " m, inlet " << st.surface.front() << " m\n";
    });

    // build-dataset
    struct {
        std::string bathys, curve, out, grid, dtype = "f32";
        std::size_t per_bathy = 10, test_bathys = 0;
        double validation = 0.10;
        std::uint64_t seed = 0;
    } bd;
    auto* c_bd = app.add_subcommand("build-dataset", "oracle solves for every bed and sampled boundary condition");
    c_bd->add_option("--bathys", bd.bathys)->required();
    c_bd->add_option("--curve", bd.curve)->required();
    c_bd->add_option("--per-bathy", bd.per_bathy);
    c_bd->add_option("--test-bathys", bd.test_bathys, "last beds held out as the test split");
    c_bd->add_option("--validation-fraction", bd.validation);
    c_bd->add_option("--dtype", bd.dtype);
    c_bd->add_option("--grid", bd.grid);
    c_bd->add_option("--seed", bd.seed);
    c_bd->add_option("--out", bd.out)->required();
    on(c_bd, [&] {
        const auto beds = load_bathy_dir(bd.bathys);
        const auto g = grid_for(bd.grid, beds.front().shape());
        oracle::DatasetConfig dc;
        dc.bcs_per_bathy = bd.per_bathy;
        dc.test_bathys = bd.test_bathys;
        dc.validation_fraction = bd.validation;
        dc.dtype = grid::parse_payload_type(bd.dtype);
        const auto set = oracle::build_dataset(g, beds, scenario::StageDischargeCurve::load(bd.curve), dc, {}, bd.seed,
                                               bd.out);
        std::cout << set.samples().size() << " samples, " << set.failures().size() << " failed solves\n";
    });

    // invert
    struct {
        std::string obs, prior, out, grid;
        double q = 0, zf = 0;
        std::size_t npc = 100, iters = 5;
    } inv;
    auto* c_inv = app.add_subcommand("invert", "bed posterior from sparse velocity observations");
    c_inv->add_option("--obs", inv.obs)->required();
    c_inv->add_option("--prior", inv.prior)->required();
    c_inv->add_option("--q", inv.q)->required();
    c_inv->add_option("--zf", inv.zf)->required();
    c_inv->add_option("--npc", inv.npc);
    c_inv->add_option("--iterations", inv.iters);
    c_inv->add_option("--grid", inv.grid);
    c_inv->add_option("--out", inv.out)->required();
    on(c_inv, [&] {
        const auto obs = oracle::ObservationSet::load(inv.obs);
        const auto prior = geostat::LowRankGaussian::load(inv.prior);
        const auto g = grid_for(inv.grid, prior.shape());
        inversion::InversionConfig ic;
        ic.n_pc = inv.npc;
        ic.obs_noise_sigma = obs.noise_sigma;
        ic.max_gn_iter = inv.iters;
        const auto r = inversion::invert(obs, {inv.q, inv.zf}, g, prior, ic);
        r.posterior.save(inv.out);
        std::cout << r.iterations << " iterations, objective " << r.objective.front() << " -> " << r.objective.back()
                  << (r.improved ? "" : " (no improvement, prior returned)") << "\n";
    });

    // train
    struct {
        std::string dataset, variant, scope = "global", target = "magnitude", spec, out;
    } tr;
    auto* c_tr = app.add_subcommand("train", "train one surrogate");
    c_tr->add_option("--dataset", tr.dataset)->required();
    c_tr->add_option("--variant", tr.variant)->required();
    c_tr->add_option("--scope", tr.scope);
    c_tr->add_option("--target", tr.target);
    c_tr->add_option("--spec", tr.spec, "key = value training config");
    c_tr->add_option("--out", tr.out)->required();
    on(c_tr, [&] {
        nn::TrainSpec spec;
        surrogate::Architecture arch;
        read_spec(tr.spec, spec, arch);
        const auto set = oracle::SampleSet::load(tr.dataset);
        const auto v = surrogate::parse_variant(tr.variant);
        const auto t = surrogate::parse_target(tr.target);
        const auto m = surrogate::parse_scope(tr.scope) == surrogate::Scope::global
                           ? surrogate::train_global(set, v, t, spec, arch)
                           : surrogate::train_local(set, v, t, spec, arch);
        m.save(tr.out);
        const auto& h = m.history();
        std::cout << "best epoch " << h.best_epoch << ", validation loss "
                  << (h.validation_loss.empty() ? 0.0 : h.validation_loss[h.best_epoch]) << "\n";
    });

    // predict
    struct {
        std::string model, bathy, out;
        double q = 0, zf = 0;
    } pr;
    auto* c_pr = app.add_subcommand("predict", "full-domain prediction (local models tile the reach)");
    c_pr->add_option("--model", pr.model)->required();
    c_pr->add_option("--bathy", pr.bathy)->required();
    c_pr->add_option("--q", pr.q)->required();
    c_pr->add_option("--zf", pr.zf)->required();
    c_pr->add_option("--out", pr.out)->required();
    on(c_pr, [&] {
        const auto m = surrogate::SurrogateModel::load(pr.model);
        const auto bed = grid::load_scalar_field(pr.bathy);
        const grid::BoundaryCondition b{pr.q, pr.zf};
        if (m.scope() == surrogate::Scope::global) {
            grid::save_field(m.predict_global(bed, b), pr.out);
        } else {
            auto seg = surrogate::predict_segment(m, bed, b, 0, bed.shape().n_along, surrogate::Tiling::dense);
            grid::save_field(grid::ScalarField(bed.shape(), std::move(seg.values), grid::FieldKind::generic), pr.out);
        }
    });

    // predict-segment
    struct {
        std::string model, bathy, out, tiling = "dense";
        double q = 0, zf = 0;
        std::size_t start = 0, length = 0;
    } ps;
    auto* c_ps = app.add_subcommand("predict-segment", "local-model prediction over a run of cross sections");
    c_ps->add_option("--model", ps.model)->required();
    c_ps->add_option("--bathy", ps.bathy)->required();
    c_ps->add_option("--q", ps.q)->required();
    c_ps->add_option("--zf", ps.zf)->required();
    c_ps->add_option("--start", ps.start);
    c_ps->add_option("--length", ps.length)->required();
    c_ps->add_option("--tiling", ps.tiling, "dense or disjoint");
    c_ps->add_option("--out", ps.out)->required();
    on(c_ps, [&] {
        const auto m = surrogate::SurrogateModel::load(ps.model);
        const auto bed = grid::load_scalar_field(ps.bathy);
        const auto seg = surrogate::predict_segment(m, bed, {ps.q, ps.zf}, ps.start, ps.length,
                                                    surrogate::parse_tiling(ps.tiling));
        std::ostringstream s;
        s << "j,i,value\n";
        for (std::size_t j = 0; j < seg.length; ++j)
            for (std::size_t i = 0; i < seg.n_across; ++i)
                s << seg.start + j << ',' << i << ',' << analysis::format_double(seg.at(i, j)) << '\n';
        analysis::write_text(ps.out, s.str());
        std::cout << seg.window_starts.size() << " windows evaluated\n";
    });

    // evaluate
    struct {
        std::string model, dataset, split = "test";
    } ev;
    auto* c_ev = app.add_subcommand("evaluate", "pooled RMSE on a dataset split");
    c_ev->add_option("--model", ev.model)->required();
    c_ev->add_option("--dataset", ev.dataset)->required();
    c_ev->add_option("--split", ev.split, "train, validation, test or all");
    on(c_ev, [&] {
        const auto m = surrogate::SurrogateModel::load(ev.model);
        const auto set = oracle::SampleSet::load(ev.dataset);
        const auto refs = split_refs(set, ev.split);
        require(!refs.empty(), "split '" + ev.split + "' is empty");
        std::cout << "rmse " << analysis::format_double(surrogate::evaluate(m, refs).rmse) << " over " << refs.size()
                  << " samples\n";
    });

    // sensitivity
    struct {
        std::string model, dataset, out;
    } se;
    auto* c_se = app.add_subcommand("sensitivity", "latent perturbation study per split");
    c_se->add_option("--model", se.model)->required();
    c_se->add_option("--dataset", se.dataset)->required();
    c_se->add_option("--out", se.out)->required();
    on(c_se, [&] {
        const auto m = surrogate::SurrogateModel::load(se.model);
        const auto set = oracle::SampleSet::load(se.dataset);
        std::vector<analysis::SensitivityReport> reps;
        for (auto s : {oracle::Split::train, oracle::Split::validation, oracle::Split::test}) {
            const auto refs = set.split(s);
            if (refs.size() < 2) continue;
            reps.push_back(analysis::latent_sensitivity(m, refs, std::string(oracle::to_string(s))));
            std::cout << reps.back().tag << ": decay ratio "
                      << analysis::sensitivity_decay_ratio(reps.back(), std::min<std::size_t>(5, m.latent_dim()),
                                                           std::min<std::size_t>(10, m.latent_dim()))
                      << "\n";
        }
        analysis::emit_sensitivity(se.out, reps);
    });

    // partial-eval
    struct {
        std::string model, dataset, posterior, out;
        std::vector<std::size_t> sections;
    } pe;
    auto* c_pe = app.add_subcommand("partial-eval", "test error with the bed known on the first S sections");
    c_pe->add_option("--model", pe.model)->required();
    c_pe->add_option("--dataset", pe.dataset)->required();
    c_pe->add_option("--posterior", pe.posterior, "posterior (.rlg) or mean field (.rfs)")->required();
    c_pe->add_option("--sections", pe.sections)->delimiter(',');
    c_pe->add_option("--out", pe.out)->required();
    on(c_pe, [&] {
        const auto m = surrogate::SurrogateModel::load(pe.model);
        const auto set = oracle::SampleSet::load(pe.dataset);
        const auto mean = fs::path(pe.posterior).extension() == ".rfs"
                              ? grid::load_scalar_field(pe.posterior)
                              : geostat::LowRankGaussian::load(pe.posterior).mean();
        const auto sections = pe.sections.empty() ? analysis::default_sections(m.grid_shape().n_along) : pe.sections;
        const auto r = analysis::partial_bathymetry_eval(m, set.split(oracle::Split::test), mean, sections);
        for (const auto& p : r) std::cout << "S " << p.sections << ": " << p.rmse << "\n";
        analysis::emit_partial(pe.out, r);
    });

    // error-bins
    struct {
        std::string model, dataset, out, curve;
        double q_min = 85.0, q_max = 840.0;
        std::size_t bins = 5;
    } eb;
    auto* c_eb = app.add_subcommand("error-bins", "test error grouped by discharge");
    c_eb->add_option("--model", eb.model)->required();
    c_eb->add_option("--dataset", eb.dataset)->required();
    c_eb->add_option("--curve", eb.curve, "take the discharge range from a fitted curve");
    c_eb->add_option("--q-min", eb.q_min);
    c_eb->add_option("--q-max", eb.q_max);
    c_eb->add_option("--bins", eb.bins);
    c_eb->add_option("--out", eb.out)->required();
    on(c_eb, [&] {
        if (!eb.curve.empty()) {
            const auto c = scenario::StageDischargeCurve::load(eb.curve);
            eb.q_min = c.q_min;
            eb.q_max = c.q_max;
        }
        const auto m = surrogate::SurrogateModel::load(eb.model);
        const auto set = oracle::SampleSet::load(eb.dataset);
        const auto bins = analysis::error_vs_discharge(m, set.split(oracle::Split::test), eb.q_min, eb.q_max, eb.bins);
        analysis::emit_error_bins(eb.out, bins);
        for (const auto& b : bins.bins)
            std::cout << b.q_low << "-" << b.q_high << ": " << b.box.count << " samples, median " << b.box.median << "\n";
    });

    // propagate
    struct {
        std::string model, posterior, out, grid;
        double q = 0, zf = 0;
        std::size_t n = 100;
        std::uint64_t seed = 0;
    } pp;
    auto* c_pp = app.add_subcommand("propagate", "posterior ensemble through the surrogate and the oracle");
    c_pp->add_option("--model", pp.model)->required();
    c_pp->add_option("--posterior", pp.posterior)->required();
    c_pp->add_option("--q", pp.q)->required();
    c_pp->add_option("--zf", pp.zf)->required();
    c_pp->add_option("--n", pp.n);
    c_pp->add_option("--seed", pp.seed);
    c_pp->add_option("--grid", pp.grid);
    c_pp->add_option("--out", pp.out)->required();
    on(c_pp, [&] {
        const auto m = surrogate::SurrogateModel::load(pp.model);
        const auto post = geostat::LowRankGaussian::load(pp.posterior);
        const auto g = grid_for(pp.grid, post.shape());
        const auto r = analysis::propagate(m, g, post, {pp.q, pp.zf}, pp.n, pp.seed);
        analysis::emit_ensemble(pp.out, "surrogate", r.surrogate);
        analysis::emit_ensemble(pp.out, "oracle", r.oracle);
        std::cout << "ensemble mean rmse " << r.mean_rmse << ", oracle failures " << r.oracle_failures << "\n";
    });

    // run-pipeline
    struct {
        std::string config, out = "run";
        bool dry_run = false;
    } rp;
    auto* c_rp = app.add_subcommand("run-pipeline", "every stage from a pipeline config");
    c_rp->add_option("config", rp.config)->required();
    c_rp->add_option("--out", rp.out, "run directory");
    c_rp->add_flag("--dry-run", rp.dry_run, "print the stage plan and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (simd != "auto") simd::set_backend(simd::parse_backend(simd));
        set_default_jobs(jobs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }

    if (c_rp->parsed()) {
        pipeline::PipelineConfig cfg;
        try {
            cfg = pipeline::PipelineConfig::load(rp.config);
            if (!fs::exists(cfg.gauge_csv)) throw InputError("gauge file " + cfg.gauge_csv.string() + " does not exist");
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kConfigError;
        }
        if (rp.dry_run) {
            for (const auto& line : cfg.plan()) std::cout << line << "\n";
            return 0;
        }
        try {
            const auto r = pipeline::run_pipeline(cfg, rp.out, &std::cout);
            std::cout << "\nmodel            test RMSE [m/s]\n";
            for (const auto& m : r.models) {
                char line[80];
                std::snprintf(line, sizeof line, "%-16s %.5f\n", m.name.c_str(), m.test_rmse);
                std::cout << line;
            }
            std::cout << "manifest sha256 " << r.manifest_digest << "\n";
            return 0;
        } catch (const pipeline::StageFailure& e) {
            std::cerr << "stage failed: " << e.what() << "\n";
            return kStageFailure;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kConfigError;
        }
    }

    try {
        action();
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << "\n";
        return kStageFailure;
    }
    return 0;
}
