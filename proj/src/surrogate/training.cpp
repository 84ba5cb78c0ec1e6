#include "riverflow/surrogate/training.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace riverflow::surrogate {

namespace {

constexpr std::size_t kPredictBatch = 64;

nn::Tensor gather_rows(const nn::Tensor& t, std::span<const std::size_t> index)
{
    if (t.size() == 0) return t;
    nn::Shape shape = t.shape();
    shape[0] = index.size();
    nn::Tensor out(shape);
    const std::size_t w = t.item_size();
    for (std::size_t r = 0; r < index.size(); ++r) std::copy_n(t.data() + index[r] * w, w, out.data() + r * w);
    return out;
}

} // namespace

std::size_t window_count(std::size_t n_along, std::size_t window)
{
    return window == 0 || window > n_along ? 0 : n_along - window + 1;
}

ExampleList ExampleList::global(std::span<const oracle::Sample* const> samples, Target target)
{
    ExampleList list;
    list.targets_.reserve(samples.size());
    for (const auto* s : samples) list.targets_.push_back(target_values(s->velocity, target));
    for (std::size_t i = 0; i < samples.size(); ++i)
        list.items_.push_back({samples[i]->bathy.values(), samples[i]->bc, 0, list.targets_[i]});
    return list;
}

ExampleList ExampleList::local(std::span<const oracle::Sample* const> samples, Target target,
                               std::size_t window_along)
{
    ExampleList list;
    list.targets_.reserve(samples.size());
    for (const auto* s : samples) list.targets_.push_back(target_values(s->velocity, target));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& shape = samples[i]->bathy.shape();
        const std::size_t width = shape.n_across * window_along;
        const std::span<const double> t = list.targets_[i];
        for (std::size_t d = 0; d < window_count(shape.n_along, window_along); ++d)
            list.items_.push_back({samples[i]->bathy.values().subspan(d * shape.n_across, width), samples[i]->bc, d,
                                   t.subspan(d * shape.n_across, width)});
    }
    return list;
}

TensorSet gather(const TensorSet& set, std::span<const std::size_t> index)
{
    return {gather_rows(set.input, index), gather_rows(set.cond, index), gather_rows(set.target, index)};
}

void fit(SurrogateModel& model, const TensorSet& train, const TensorSet& validation, const nn::TrainSpec& spec)
{
    spec.validate();
    const std::size_t n = train.size();
    require(n > 0, "training split is empty");
    const std::size_t batch = spec.optimizer == nn::OptimizerKind::gd ? n : std::min(spec.batch_size, n);
    const bool has_validation = validation.size() > 0;

    nn::Optimizer opt(spec);
    History history;
    SurrogateModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        if (batch < n) {
            std::mt19937_64 rng(derive_seed(spec.seed, "train/shuffle", epoch));
            std::shuffle(order.begin(), order.end(), rng);
        }
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            const TensorSet b = gather(train, std::span<const std::size_t>(order).subspan(start, count));
            const double loss =
                model.objective(b, spec, derive_seed(spec.seed, "sve/noise", opt.steps_taken()), true);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "non-finite training loss (" << loss << ") for " << to_string(model.variant()) << "/"
                    << to_string(model.scope()) << " at epoch " << epoch << ", step " << opt.steps_taken()
                    << ", learning rate " << opt.current_learning_rate() << "; last epoch loss "
                    << (history.train_loss.empty() ? 0.0 : history.train_loss.back());
                throw SolveError(msg.str());
            }
            opt.step(model.params());
            total += loss * double(count);
        }
        const double train_loss = total / double(n);
        const double val_loss = has_validation ? model.evaluation_mse(validation) : train_loss;
        history.train_loss.push_back(train_loss);
        history.validation_loss.push_back(val_loss);
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best = model;
            history.best_epoch = epoch;
        }
    }
    model = std::move(best);
    model.canonicalize_latent(train.input);
    model.set_history(std::move(history));
}

namespace {

SurrogateModel train_scoped(const oracle::SampleSet& samples, Variant variant, Scope scope, Target target,
                            const nn::TrainSpec& spec, const Architecture& arch)
{
    spec.validate();
    arch.validate();
    const auto train_samples = samples.split(oracle::Split::train);
    const auto val_samples = samples.split(oracle::Split::validation);
    require(!train_samples.empty(), "training split is empty");
    auto make = [&](const std::vector<const oracle::Sample*>& s) {
        return scope == Scope::global ? ExampleList::global(s, target)
                                      : ExampleList::local(s, target, arch.window_along);
    };
    const ExampleList train = make(train_samples);
    const ExampleList val = make(val_samples);
    SurrogateModel model = SurrogateModel::build(variant, scope, target, samples.grid().shape(), arch, train.items(),
                                                 derive_seed(spec.seed, "surrogate/init"));
    const TensorSet train_t = model.tensors(train.items());
    const TensorSet val_t = val.size() > 0 ? model.tensors(val.items()) : TensorSet{};
    fit(model, train_t, val_t, spec);
    return model;
}

} // namespace

SurrogateModel train_global(const oracle::SampleSet& samples, Variant variant, Target target,
                            const nn::TrainSpec& spec, const Architecture& arch)
{
    return train_scoped(samples, variant, Scope::global, target, spec, arch);
}

SurrogateModel train_local(const oracle::SampleSet& samples, Variant variant, Target target,
                           const nn::TrainSpec& spec, const Architecture& arch)
{
    return train_scoped(samples, variant, Scope::local, target, spec, arch);
}

Evaluation evaluate(const SurrogateModel& model, std::span<const oracle::Sample* const> samples,
                    std::span<const grid::ScalarField> bathys)
{
    require(bathys.empty() || bathys.size() == samples.size(), "one bathymetry per sample is required");
    Evaluation ev;
    double pooled = 0.0;
    std::size_t points = 0;
    const std::size_t width = model.item_size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = *samples[i];
        const grid::ScalarField& bathy = bathys.empty() ? s.bathy : bathys[i];
        require(bathy.shape() == model.grid_shape(), "sample grid does not match the model grid");
        const std::vector<double> truth = target_values(s.velocity, model.target());
        std::vector<Example> items;
        if (model.scope() == Scope::global) {
            items.push_back({bathy.values(), s.bc, 0, {}});
        } else {
            const std::size_t na = model.grid_shape().n_across;
            for (std::size_t d = 0; d < window_count(model.grid_shape().n_along, model.architecture().window_along); ++d)
                items.push_back({bathy.values().subspan(d * na, width), s.bc, d, {}});
        }
        double sq = 0.0;
        for (std::size_t start = 0; start < items.size(); start += kPredictBatch) {
            const std::size_t count = std::min(kPredictBatch, items.size() - start);
            const auto chunk = std::span<const Example>(items).subspan(start, count);
            const Eigen::MatrixXd y = model.predict(chunk);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t offset = chunk[r].d * model.grid_shape().n_across;
                for (std::size_t c = 0; c < width; ++c) {
                    const double e = y(Eigen::Index(r), Eigen::Index(c)) - truth[offset + c];
                    sq += e * e;
                }
            }
        }
        const std::size_t n = items.size() * width;
        ev.sample_rmse.push_back(std::sqrt(sq / double(n)));
        pooled += sq;
        points += n;
    }
    ev.rmse = points > 0 ? std::sqrt(pooled / double(points)) : 0.0;
    return ev;
}

} // namespace riverflow::surrogate
