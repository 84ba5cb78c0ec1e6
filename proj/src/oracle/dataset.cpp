#include "riverflow/oracle/dataset.hpp"

#include "riverflow/common/digest.hpp"
#include "riverflow/common/error.hpp"
#include "riverflow/common/parallel.hpp"
#include "riverflow/common/seed.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>

namespace riverflow::oracle {

namespace fs = std::filesystem;
using grid::ScalarField;
using grid::VectorField;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t a, std::optional<std::size_t> b = {})
{
    char buf[64];
    if (b)
        std::snprintf(buf, sizeof buf, "fields/%s_%05zu_%03zu.rfs", stem, a, *b);
    else
        std::snprintf(buf, sizeof buf, "fields/%s_%05zu.rfs", stem, a);
    return buf;
}

std::vector<double> stored(std::span<const double> v, grid::PayloadType dtype)
{
    std::vector<double> out(v.begin(), v.end());
    if (dtype == grid::PayloadType::f32)
        for (double& x : out) x = static_cast<double>(static_cast<float>(x));
    return out;
}

ScalarField stored(const ScalarField& f, grid::PayloadType dtype)
{
    return ScalarField(f.shape(), stored(f.values(), dtype), f.kind());
}

VectorField stored(const VectorField& f, grid::PayloadType dtype)
{
    return VectorField(f.shape(), stored(f.easting(), dtype), stored(f.northing(), dtype));
}

std::string record_digest(const fs::path& dir, const std::string& bathy, const std::string& vel,
                          const std::string& depth)
{
    return sha256_hex(sha256_file(dir / bathy) + sha256_file(dir / vel) + sha256_file(dir / depth));
}

void write_lines(const fs::path& path, const std::vector<json>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    for (const auto& r : records) out << r.dump() << "\n";
    if (!out) throw InputError("failed writing " + path.string());
}

} // namespace

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text)
{
    if (text == "train") return Split::train;
    if (text == "validation") return Split::validation;
    if (text == "test") return Split::test;
    throw InputError("unknown split '" + std::string(text) + "'");
}

std::vector<const Sample*> SampleSet::split(Split s) const
{
    std::vector<const Sample*> out;
    for (const auto& sample : samples_)
        if (sample.split == s) out.push_back(&sample);
    return out;
}

SampleSet build_dataset(const grid::RiverGrid& grid, const std::vector<ScalarField>& bathys,
                        const scenario::StageDischargeCurve& curve, const DatasetConfig& cfg,
                        const OracleConfig& oracle, std::uint64_t seed, const fs::path& out_dir)
{
    require(!bathys.empty(), "build_dataset needs at least one bathymetry");
    require(cfg.bcs_per_bathy >= 1, "bcs_per_bathy must be at least 1");
    require(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0,
            "validation fraction must lie in [0, 1)");
    require(cfg.test_bathys < bathys.size() || (cfg.test_bathys == bathys.size() && cfg.validation_fraction == 0.0),
            "test_bathys leaves no bathymetry for training");
    oracle.validate();
    for (const auto& b : bathys)
        if (b.shape().n_across != grid.n_across() || b.shape().n_along != grid.n_along())
            throw InputError("bathymetry shape does not match the grid");

    fs::create_directories(out_dir / "fields");
    grid.save(out_dir / "grid.csv");

    const std::size_t nb = bathys.size();
    const std::size_t per = cfg.bcs_per_bathy;
    std::vector<grid::BoundaryCondition> bcs;
    bcs.reserve(nb * per);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto draws = scenario::sample_bc(curve, per, derive_seed(seed, "dataset/bc", b));
        bcs.insert(bcs.end(), draws.begin(), draws.end());
    }

    std::vector<ScalarField> stored_bathy(nb);
    parallel_for(nb, [&](std::size_t b) {
        stored_bathy[b] = stored(bathys[b], cfg.dtype);
        grid::save_field(stored_bathy[b], out_dir / numbered("bathy", b), cfg.dtype);
    });

    struct Outcome {
        std::optional<SteadyState> state;
        std::string error;
    };
    std::vector<Outcome> outcomes(nb * per);
    parallel_for(nb * per, [&](std::size_t p) {
        const std::size_t b = p / per, k = p % per;
        try {
            SteadyState s = solve_steady(grid, bathys[b], bcs[p], oracle);
            s.velocity = stored(s.velocity, cfg.dtype);
            s.depth = stored(s.depth, cfg.dtype);
            grid::save_field(s.velocity, out_dir / numbered("velocity", b, k), cfg.dtype);
            grid::save_field(s.depth, out_dir / numbered("depth", b, k), cfg.dtype);
            outcomes[p].state = std::move(s);
        } catch (const SolveError& e) {
            outcomes[p].error = e.what();
        }
    });

    // Validation draws are taken from the accepted non-test samples.
    std::vector<std::size_t> pool;
    for (std::size_t p = 0; p < outcomes.size(); ++p)
        if (outcomes[p].state && p / per < nb - cfg.test_bathys) pool.push_back(p);
    std::vector<bool> is_validation(outcomes.size(), false);
    {
        std::mt19937_64 rng(derive_seed(seed, "dataset/split"));
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * double(pool.size())));
        for (std::size_t t = 0; t < n_val; ++t) is_validation[pool[t]] = true;
    }

    std::vector<Sample> samples;
    std::vector<FailedSolve> failures;
    std::vector<json> manifest, failed;
    for (std::size_t p = 0; p < outcomes.size(); ++p) {
        const std::size_t b = p / per, k = p % per;
        if (!outcomes[p].state) {
            failures.push_back({b, k, bcs[p], outcomes[p].error});
            failed.push_back({{"bathy_index", b}, {"bc_index", k}, {"q", bcs[p].discharge_q},
                              {"zf", bcs[p].stage_zf}, {"error", outcomes[p].error}});
            continue;
        }
        const Split split = b >= nb - cfg.test_bathys ? Split::test
                            : is_validation[p]       ? Split::validation
                                                     : Split::train;
        const std::string bathy_path = numbered("bathy", b);
        const std::string vel_path = numbered("velocity", b, k);
        const std::string depth_path = numbered("depth", b, k);
        Sample s;
        s.bathy_index = b;
        s.bc_index = k;
        s.bc = bcs[p];
        s.split = split;
        s.bathy = stored_bathy[b];
        s.velocity = std::move(outcomes[p].state->velocity);
        s.depth = std::move(outcomes[p].state->depth);
        s.digest = record_digest(out_dir, bathy_path, vel_path, depth_path);
        manifest.push_back({{"bathy_index", b},      {"bc_index", k},           {"q", s.bc.discharge_q},
                            {"zf", s.bc.stage_zf},   {"split", to_string(split)}, {"bathy", bathy_path},
                            {"velocity", vel_path},  {"depth", depth_path},     {"digest", s.digest}});
        samples.push_back(std::move(s));
    }
    if (samples.empty())
        throw SolveError("all " + std::to_string(outcomes.size()) + " oracle solves failed; first error: " +
                         outcomes.front().error);

    write_lines(out_dir / "manifest.jsonl", manifest);
    write_lines(out_dir / "failures.jsonl", failed);
    const std::string digest = sha256_file(out_dir / "manifest.jsonl");
    json summary = {{"samples", samples.size()},
                    {"failed", failures.size()},
                    {"bathymetries", nb},
                    {"bcs_per_bathy", per},
                    {"seed", seed},
                    {"dtype", cfg.dtype == grid::PayloadType::f32 ? "f32" : "f64"},
                    {"manifest_sha256", digest}};
    std::ofstream(out_dir / "dataset.json") << summary.dump(2) << "\n";
    return SampleSet(grid, std::move(samples), std::move(failures), digest);
}

SampleSet SampleSet::load(const fs::path& dir)
{
    const fs::path manifest_path = dir / "manifest.jsonl";
    std::ifstream in(manifest_path);
    if (!in) throw InputError("no manifest.jsonl in " + dir.string());
    grid::RiverGrid g = grid::RiverGrid::load(dir / "grid.csv");

    std::map<std::string, ScalarField> bathy_cache;
    std::vector<Sample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json r;
        try {
            r = json::parse(line);
            Sample s;
            s.bathy_index = r.at("bathy_index").get<std::size_t>();
            s.bc_index = r.at("bc_index").get<std::size_t>();
            s.bc = {r.at("q").get<double>(), r.at("zf").get<double>()};
            s.split = parse_split(r.at("split").get<std::string>());
            const auto bathy_path = r.at("bathy").get<std::string>();
            const auto vel_path = r.at("velocity").get<std::string>();
            const auto depth_path = r.at("depth").get<std::string>();
            s.digest = r.at("digest").get<std::string>();
            if (record_digest(dir, bathy_path, vel_path, depth_path) != s.digest)
                throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": digest mismatch");
            auto it = bathy_cache.find(bathy_path);
            if (it == bathy_cache.end())
                it = bathy_cache.emplace(bathy_path, grid::load_scalar_field(dir / bathy_path)).first;
            s.bathy = it->second;
            s.velocity = grid::load_vector_field(dir / vel_path);
            s.depth = grid::load_scalar_field(dir / depth_path);
            samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }

    std::vector<FailedSolve> failures;
    std::ifstream fin(dir / "failures.jsonl");
    while (fin && std::getline(fin, line)) {
        if (line.empty()) continue;
        const json r = json::parse(line);
        failures.push_back({r.at("bathy_index").get<std::size_t>(), r.at("bc_index").get<std::size_t>(),
                            {r.at("q").get<double>(), r.at("zf").get<double>()}, r.at("error").get<std::string>()});
    }
    return SampleSet(std::move(g), std::move(samples), std::move(failures), sha256_file(manifest_path));
}

} // namespace riverflow::oracle
