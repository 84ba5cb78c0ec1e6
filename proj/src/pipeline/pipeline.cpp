#include "riverflow/pipeline/pipeline.hpp"

#include "riverflow/analysis/analysis.hpp"
#include "riverflow/analysis/report.hpp"
#include "riverflow/common/digest.hpp"
#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"
#include "riverflow/inversion/inversion.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/scenario/gauge.hpp"
#include "riverflow/surrogate/prediction.hpp"
#include "riverflow/surrogate/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

namespace riverflow::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using surrogate::Scope;
using surrogate::Variant;

namespace {

constexpr const char* kRunMarker = ".riverflow-run";

std::size_t get_count(const KeyValueConfig& kv, const std::string& key)
{
    const long long v = kv.get_int(key);
    if (v < 0) throw InputError("config key '" + key + "' must not be negative");
    return std::size_t(v);
}

std::vector<std::size_t> get_sizes(const KeyValueConfig& kv, const std::string& key)
{
    std::vector<std::size_t> out;
    for (long long v : kv.get_int_list(key)) {
        if (v <= 0) throw InputError("config key '" + key + "' must list positive sizes");
        out.push_back(std::size_t(v));
    }
    return out;
}

ModelRun parse_run(const KeyValueConfig& kv, const std::string& name, const surrogate::Architecture& base)
{
    const std::string p = "train." + name + ".";
    ModelRun r;
    r.name = name;
    r.variant = surrogate::parse_variant(kv.get_string(p + "variant"));
    r.scope = surrogate::parse_scope(kv.get_string(p + "scope"));
    r.spec.epochs = get_count(kv, p + "epochs");
    r.spec.learning_rate = kv.get_double(p + "learning_rate");
    r.spec.batch_size = get_count(kv, p + "batch_size");
    r.spec.l2_coeff = kv.get_double(p + "l2");
    r.spec.decay = kv.get_double(p + "decay");
    r.spec.kl_weight = kv.get_double(p + "kl_weight", r.spec.kl_weight);
    r.spec.optimizer = nn::parse_optimizer(kv.get_string(p + "optimizer", "adam"));
    r.spec.validate();
    r.arch = base;
    r.arch.activation = nn::parse_activation(kv.get_string(p + "activation"));
    r.arch.validate();
    return r;
}

std::string hms(double seconds)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fs", seconds);
    return buf;
}

/// Every regular file under `dir` except the manifest itself, sorted by relative path.
json artifact_digests(const fs::path& dir)
{
    std::vector<std::string> rel;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto r = fs::relative(e.path(), dir).generic_string();
        if (r == "manifest.json" || r == "manifest.sha256" || r == "timings.txt" || r == kRunMarker) continue;
        rel.push_back(r);
    }
    std::sort(rel.begin(), rel.end());
    json out = json::object();
    for (const auto& r : rel) out[r] = sha256_file(dir / r);
    return out;
}

void prepare_run_dir(const fs::path& dir)
{
    if (fs::exists(dir)) {
        require(fs::is_directory(dir), dir.string() + " exists and is not a directory");
        const bool empty = fs::directory_iterator(dir) == fs::directory_iterator();
        if (!empty && !fs::exists(dir / kRunMarker))
            throw InputError(dir.string() + " is not empty and was not created by a previous run");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
    std::FILE* f = std::fopen((dir / kRunMarker).string().c_str(), "w");
    if (!f) throw InputError("cannot write to " + dir.string());
    std::fclose(f);
}

json metrics_json(const ModelMetrics& m)
{
    json j;
    j["variant"] = surrogate::to_string(m.variant);
    j["scope"] = surrogate::to_string(m.scope);
    j["train_rmse"] = m.train_rmse;
    j["validation_rmse"] = m.validation_rmse;
    j["test_rmse"] = m.test_rmse;
    j["best_epoch"] = m.best_epoch;
    j["param_count"] = m.param_count;
    j["sensitivity_decay_ratio"] = {{"train", m.decay_ratio[0]},
                                    {"validation", m.decay_ratio[1]},
                                    {"test", m.decay_ratio[2]}};
    j["partial_sections"] = m.sections;
    j["partial_rmse"] = m.partial_rmse;
    if (m.segment_rmse >= 0.0) j["segment_rmse"] = m.segment_rmse;
    if (m.propagation_rmse >= 0.0) {
        j["propagation_mean_rmse"] = m.propagation_rmse;
        j["surrogate_std_min"] = m.surrogate_std_min;
        j["oracle_failures"] = m.oracle_failures;
    }
    return j;
}

} // namespace

PipelineConfig PipelineConfig::from(const KeyValueConfig& kv, const fs::path& base_dir)
{
    PipelineConfig c;
    c.source = kv;
    c.seed = kv.get_u64("seed");
    c.grid = {get_count(kv, "grid.n_across"), get_count(kv, "grid.n_along"), kv.get_double("grid.spacing_m")};
    require(c.grid.n_across >= 3 && c.grid.n_along >= 2 && c.grid.spacing_m > 0.0, "grid is too small");
    c.gauge_csv = kv.get_string("gauge.csv");
    if (c.gauge_csv.is_relative()) c.gauge_csv = base_dir / c.gauge_csv;

    c.kernel.beta = kv.get_double("kernel.beta");
    c.kernel.l_x = kv.get_double("kernel.l_x");
    c.kernel.l_y = kv.get_double("kernel.l_y");
    c.ranks.rank_x = get_count(kv, "kernel.rank_x");
    c.ranks.rank_y = get_count(kv, "kernel.rank_y");
    c.ranks.max_rank = get_count(kv, "kernel.max_rank");
    require(c.kernel.beta > 0.0 && c.kernel.l_x > 0.0 && c.kernel.l_y > 0.0, "kernel parameters must be positive");
    c.weight_min = kv.get_double("weight.w_min");
    c.weight_power = kv.get_double("weight.power");

    c.oracle.manning_n = kv.get_double("oracle.manning_n");
    c.oracle.h_min = kv.get_double("oracle.h_min");
    c.oracle.mode = oracle::parse_stage_mode(kv.get_string("oracle.mode"));
    c.oracle.validate();

    c.invert = kv.get_bool("invert.enabled");
    c.obs_count = get_count(kv, "observe.count");
    c.obs_noise_fraction = kv.get_double("observe.noise_fraction");
    c.obs_discharge = kv.get_double("observe.discharge");
    c.n_pc = get_count(kv, "invert.n_pc");
    c.max_gn_iter = get_count(kv, "invert.max_gn_iter");

    c.n_bathy = get_count(kv, "dataset.n_bathy");
    c.bcs_per_bathy = get_count(kv, "dataset.bcs_per_bathy");
    c.test_bathys = get_count(kv, "dataset.test_bathys");
    c.validation_fraction = kv.get_double("dataset.validation_fraction");
    c.dtype = grid::parse_payload_type(kv.get_string("dataset.dtype"));
    require(c.validation_fraction > 0.0 && c.validation_fraction < 1.0, "dataset.validation_fraction must be in (0, 1)");
    require(c.test_bathys < c.n_bathy, "dataset.test_bathys must leave bathymetries for training");
    require(c.bcs_per_bathy > 0, "dataset.bcs_per_bathy must be positive");

    c.target = surrogate::parse_target(kv.get_string("model.target"));
    surrogate::Architecture base;
    base.latent_dim = get_count(kv, "model.latent_dim");
    base.window_along = get_count(kv, "model.window_along");
    if (kv.contains("model.conv_channels")) base.conv_channels = get_sizes(kv, "model.conv_channels");
    if (kv.contains("model.dnn_hidden")) base.dnn_hidden = get_sizes(kv, "model.dnn_hidden");
    if (kv.contains("model.local_dnn_hidden")) base.local_dnn_hidden = get_sizes(kv, "model.local_dnn_hidden");
    if (kv.contains("model.local_hidden")) base.local_hidden = get_sizes(kv, "model.local_hidden");
    const auto names = kv.get_string_list("models");
    require(!names.empty(), "config key 'models' lists no models");
    for (const auto& n : names) {
        for (const auto& r : c.runs) require(r.name != n, "model '" + n + "' is listed twice");
        c.runs.push_back(parse_run(kv, n, base));
    }

    c.ensemble_size = get_count(kv, "propagate.n");
    c.ensemble_discharge = kv.get_double("propagate.discharge");
    require(c.ensemble_size >= 2, "propagate.n must be at least 2");
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path)
{
    return from(KeyValueConfig::load(path), path.parent_path());
}

std::vector<std::string> PipelineConfig::plan() const
{
    std::vector<std::string> p;
    auto add = [&](std::string s) { p.push_back(std::to_string(p.size() + 1) + ". " + std::move(s)); };
    add("gauge: fit the stage-discharge curve to " + gauge_csv.string());
    add("observe: solve the synthetic true bed at Q = " + std::to_string(obs_discharge) + ", sample " +
        std::to_string(obs_count) + " noisy velocities");
    add(invert ? "invert: " + std::to_string(n_pc) + "-component inversion for the bed posterior"
               : "invert: skipped, the prior is used as the posterior");
    add("gen-bathy: " + std::to_string(n_bathy) + " augmented posterior beds");
    add("build-dataset: " + std::to_string(n_bathy * bcs_per_bathy) + " oracle solves, last " +
        std::to_string(test_bathys) + " beds held out for testing");
    for (const auto& r : runs)
        add("train/" + r.name + ": " + std::string(surrogate::to_string(r.scope)) + " " +
            std::string(surrogate::to_string(r.variant)) + ", " + std::to_string(r.spec.epochs) + " epochs");
    add("evaluate: train, validation and test RMSE for every model");
    add("sensitivity: latent perturbation per model and split");
    add("partial-eval: beds measured on the first S sections");
    add("error-bins: test error by discharge");
    add("segment: dense tiling over the whole reach for local models");
    add("propagate: " + std::to_string(ensemble_size) + " posterior draws through global models and the oracle");
    add("manifest: metrics.csv and manifest.json");
    return p;
}

const ModelMetrics& PipelineResult::model(const std::string& name) const
{
    for (const auto& m : models)
        if (m.name == name) return m;
    throw InputError("no model named '" + name + "' in this run");
}

double PipelineResult::stage_time(const std::string& prefix) const
{
    double t = 0.0;
    for (const auto& [name, dt] : stage_seconds)
        if (name.compare(0, prefix.size(), prefix) == 0) t += dt;
    return t;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const fs::path& run_dir, std::ostream* log)
{
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    std::ostringstream timings;
    PipelineResult res;
    res.run_dir = run_dir;
    auto stage = [&](const std::string& name, const std::function<void()>& body) {
        const auto t0 = clock::now();
        if (log) *log << "[" << name << "] ..." << std::endl;
        try {
            body();
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure(name, e.what());
        }
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        timings << name << ' ' << dt << '\n';
        res.stage_seconds.emplace_back(name, dt);
        if (log) *log << "[" << name << "] done in " << hms(dt) << std::endl;
    };

    stage("prepare", [&] { prepare_run_dir(run_dir); });

    json seeds = json::object();
    auto seed_for = [&](const std::string& name) {
        const auto s = derive_seed(cfg.seed, name);
        seeds[name] = s;
        return s;
    };

    const auto river = grid::RiverGrid::synthetic_bend(cfg.grid.n_across, cfg.grid.n_along, cfg.grid.spacing_m);
    scenario::StageDischargeCurve curve;
    stage("gauge", [&] {
        river.save(run_dir / "grid.csv");
        curve = scenario::fit_stage_discharge(scenario::ingest_gauge_csv(cfg.gauge_csv));
        curve.save(run_dir / "curve.json");
    });

    const grid::BoundaryCondition obs_bc{cfg.obs_discharge, curve(cfg.obs_discharge)};
    grid::ScalarField truth;
    oracle::ObservationSet obs;
    stage("observe", [&] {
        truth = oracle::synthetic_bathymetry(river);
        const auto state = oracle::solve_steady(river, truth, obs_bc, cfg.oracle);
        obs = oracle::make_observations(state.velocity, cfg.obs_count, cfg.obs_noise_fraction, seed_for("observe"));
        grid::save_field(truth, run_dir / "truth_bathymetry.rfs");
        obs.save(run_dir / "observations.csv");
    });

    geostat::LowRankGaussian posterior;
    stage("invert", [&] {
        const auto factors = geostat::build_separable_factors(cfg.kernel, river.shape(), cfg.ranks);
        const geostat::LowRankGaussian prior(oracle::template_bathymetry(river), factors.factor());
        if (cfg.invert) {
            inversion::InversionConfig ic;
            ic.n_pc = cfg.n_pc;
            ic.obs_noise_sigma = obs.noise_sigma;
            ic.max_gn_iter = cfg.max_gn_iter;
            posterior = inversion::invert(obs, obs_bc, river, prior, ic, cfg.oracle).posterior;
        } else {
            posterior = prior;
        }
        res.prior_bed_rmse = grid::field_rmse(prior.mean(), truth);
        res.posterior_bed_rmse = grid::field_rmse(posterior.mean(), truth);
        posterior.save(run_dir / "posterior.rlg");
        if (log)
            *log << "  bed RMSE prior " << res.prior_bed_rmse << " m, posterior " << res.posterior_bed_rmse << " m\n";
    });

    std::vector<grid::ScalarField> bathys;
    stage("gen-bathy", [&] {
        const auto w = geostat::WeightProfile::sine_power(river.n_across(), cfg.weight_min, cfg.weight_power);
        bathys = geostat::augment_posterior(posterior, cfg.kernel, w, cfg.n_bathy, seed_for("augment"), cfg.ranks);
        fs::create_directories(run_dir / "bathymetry");
        for (std::size_t b = 0; b < bathys.size(); ++b) {
            char name[32];
            std::snprintf(name, sizeof name, "bathy_%04zu.rfs", b);
            grid::save_field(bathys[b], run_dir / "bathymetry" / name, cfg.dtype);
        }
    });

    std::unique_ptr<oracle::SampleSet> data;
    stage("build-dataset", [&] {
        oracle::DatasetConfig dc;
        dc.bcs_per_bathy = cfg.bcs_per_bathy;
        dc.validation_fraction = cfg.validation_fraction;
        dc.test_bathys = cfg.test_bathys;
        dc.dtype = cfg.dtype;
        data = std::make_unique<oracle::SampleSet>(
            oracle::build_dataset(river, bathys, curve, dc, cfg.oracle, seed_for("dataset"), run_dir / "dataset"));
        res.dataset_samples = data->samples().size();
        res.dataset_failures = data->failures().size();
        if (log)
            *log << "  " << res.dataset_samples << " samples, " << res.dataset_failures << " failed solves\n";
    });

    const auto train = data->split(oracle::Split::train);
    const auto val = data->split(oracle::Split::validation);
    const auto test = data->split(oracle::Split::test);

    std::vector<surrogate::SurrogateModel> models;
    for (const auto& run : cfg.runs) {
        stage("train/" + run.name, [&] {
            auto spec = run.spec;
            spec.seed = seed_for("train/" + run.name);
            auto m = run.scope == Scope::global
                         ? surrogate::train_global(*data, run.variant, cfg.target, spec, run.arch)
                         : surrogate::train_local(*data, run.variant, cfg.target, spec, run.arch);
            fs::create_directories(run_dir / "models");
            m.save(run_dir / "models" / (run.name + ".rfn"));
            models.push_back(std::move(m));
        });
    }

    for (std::size_t k = 0; k < cfg.runs.size(); ++k) {
        ModelMetrics mm;
        mm.name = cfg.runs[k].name;
        mm.variant = cfg.runs[k].variant;
        mm.scope = cfg.runs[k].scope;
        mm.best_epoch = models[k].history().best_epoch;
        mm.param_count = models[k].param_count();
        res.models.push_back(std::move(mm));
    }

    stage("evaluate", [&] {
        for (std::size_t k = 0; k < models.size(); ++k) {
            auto& mm = res.models[k];
            mm.train_rmse = surrogate::evaluate(models[k], train).rmse;
            mm.validation_rmse = val.empty() ? 0.0 : surrogate::evaluate(models[k], val).rmse;
            mm.test_rmse = surrogate::evaluate(models[k], test).rmse;
            if (log)
                *log << "  " << mm.name << ": train " << mm.train_rmse << ", validation " << mm.validation_rmse
                     << ", test " << mm.test_rmse << " m/s\n";
        }
    });

    const fs::path reports = run_dir / "reports";
    stage("sensitivity", [&] {
        for (std::size_t k = 0; k < models.size(); ++k) {
            std::vector<analysis::SensitivityReport> reps;
            std::vector<std::pair<std::string, analysis::SampleRefs>> tags{
                {"train", train}, {"validation", val}, {"test", test}};
            for (const auto& [tag, refs] : tags) {
                if (refs.size() < 2) {
                    res.models[k].decay_ratio.push_back(0.0);
                    continue;
                }
                reps.push_back(analysis::latent_sensitivity(models[k], refs, tag));
                res.models[k].decay_ratio.push_back(analysis::sensitivity_decay_ratio(
                    reps.back(), std::min<std::size_t>(5, models[k].latent_dim()),
                    std::min<std::size_t>(10, models[k].latent_dim())));
            }
            analysis::emit_sensitivity(reports / res.models[k].name, reps);
        }
    });

    stage("partial-eval", [&] {
        const auto sections = analysis::default_sections(river.n_along());
        for (std::size_t k = 0; k < models.size(); ++k) {
            const auto r = analysis::partial_bathymetry_eval(models[k], test, posterior.mean(), sections);
            for (const auto& p : r) {
                res.models[k].sections.push_back(p.sections);
                res.models[k].partial_rmse.push_back(p.rmse);
            }
            analysis::emit_partial(reports / res.models[k].name, r);
        }
    });

    stage("error-bins", [&] {
        for (std::size_t k = 0; k < models.size(); ++k)
            analysis::emit_error_bins(reports / res.models[k].name,
                                      analysis::error_vs_discharge(models[k], test, curve.q_min, curve.q_max));
    });

    stage("segment", [&] {
        for (std::size_t k = 0; k < models.size(); ++k) {
            if (models[k].scope() != Scope::local || models[k].architecture().window_along > river.n_along()) continue;
            double sq = 0.0;
            std::size_t n = 0;
            for (const auto* s : test) {
                const auto seg = surrogate::predict_segment(models[k], s->bathy, s->bc, 0, river.n_along(),
                                                            surrogate::Tiling::dense);
                const auto truth_v = surrogate::target_values(s->velocity, models[k].target());
                for (std::size_t i = 0; i < truth_v.size(); ++i, ++n) sq += std::pow(seg.values[i] - truth_v[i], 2);
            }
            res.models[k].segment_rmse = std::sqrt(sq / double(n));
        }
    });

    stage("propagate", [&] {
        const grid::BoundaryCondition bc{cfg.ensemble_discharge, curve(cfg.ensemble_discharge)};
        const auto seed = seed_for("propagate");
        for (std::size_t k = 0; k < models.size(); ++k) {
            if (models[k].scope() != Scope::global) continue;
            const auto p = analysis::propagate(models[k], river, posterior, bc, cfg.ensemble_size, seed, cfg.oracle);
            auto& mm = res.models[k];
            mm.propagation_rmse = p.mean_rmse;
            mm.surrogate_std_min = p.surrogate.std.min();
            mm.oracle_failures = p.oracle_failures;
            analysis::emit_ensemble(reports / mm.name, "surrogate", p.surrogate);
            analysis::emit_ensemble(reports / mm.name, "oracle", p.oracle);
        }
    });

    stage("manifest", [&] {
        std::ostringstream csv;
        csv << "model,variant,scope,train_rmse,validation_rmse,test_rmse,best_epoch,params,decay_ratio_test,"
               "partial_rmse_s0,partial_rmse_full,propagation_rmse\n";
        for (const auto& m : res.models) {
            csv << m.name << ',' << surrogate::to_string(m.variant) << ',' << surrogate::to_string(m.scope) << ','
                << analysis::format_double(m.train_rmse) << ',' << analysis::format_double(m.validation_rmse) << ','
                << analysis::format_double(m.test_rmse) << ',' << m.best_epoch << ',' << m.param_count << ','
                << analysis::format_double(m.decay_ratio.back()) << ','
                << analysis::format_double(m.partial_rmse.front()) << ','
                << analysis::format_double(m.partial_rmse.back()) << ',';
            if (m.propagation_rmse >= 0.0) csv << analysis::format_double(m.propagation_rmse);
            csv << '\n';
        }
        analysis::write_text(run_dir / "metrics.csv", csv.str());

        json man;
        man["format"] = "riverflow-run";
        json conf = json::object();
        for (const auto& [k, v] : cfg.source.entries()) conf[k] = v;
        man["config"] = conf;
        man["master_seed"] = cfg.seed;
        man["seeds"] = seeds;
        json ds;
        ds["samples"] = res.dataset_samples;
        ds["failures"] = res.dataset_failures;
        ds["train"] = train.size();
        ds["validation"] = val.size();
        ds["test"] = test.size();
        ds["manifest_digest"] = data->manifest_digest();
        man["dataset"] = ds;
        man["inversion"] = {{"enabled", cfg.invert},
                            {"prior_bed_rmse", res.prior_bed_rmse},
                            {"posterior_bed_rmse", res.posterior_bed_rmse}};
        json mj = json::object();
        for (const auto& m : res.models) mj[m.name] = metrics_json(m);
        man["metrics"] = mj;
        man["artifacts"] = artifact_digests(run_dir);
        const std::string text = man.dump(2) + "\n";
        analysis::write_text(run_dir / "manifest.json", text);
        res.manifest_digest = sha256_hex(text);
        analysis::write_text(run_dir / "manifest.sha256", res.manifest_digest + "  manifest.json\n");
    });

    timings << "total " << std::chrono::duration<double>(clock::now() - t_start).count() << '\n';
    analysis::write_text(run_dir / "timings.txt", timings.str());
    return res;
}

} // namespace riverflow::pipeline
