#pragma once

#include "riverflow/nn/optimizer.hpp"
#include "riverflow/oracle/dataset.hpp"
#include "riverflow/surrogate/model.hpp"

#include <span>
#include <vector>

namespace riverflow::surrogate {

/// Examples built from dataset samples, owning the target values they point
/// into. Bathymetry spans point into the samples, which must outlive the list.
class ExampleList {
public:
    ExampleList() = default;
    ExampleList(const ExampleList&) = delete;
    ExampleList& operator=(const ExampleList&) = delete;
    ExampleList(ExampleList&&) noexcept = default;
    ExampleList& operator=(ExampleList&&) noexcept = default;

    /// One item per sample.
    static ExampleList global(std::span<const oracle::Sample* const> samples, Target target);
    /// Every stride-1 window of every sample, sample-major.
    static ExampleList local(std::span<const oracle::Sample* const> samples, Target target, std::size_t window_along);

    std::span<const Example> items() const { return items_; }
    std::size_t size() const { return items_.size(); }

private:
    std::vector<std::vector<double>> targets_;
    std::vector<Example> items_;
};

/// Number of stride-1 windows of length `window` along `n_along` sections.
std::size_t window_count(std::size_t n_along, std::size_t window);

/// Rows `index` of every tensor in `set`.
TensorSet gather(const TensorSet& set, std::span<const std::size_t> index);

/// Trains in place and leaves the model at its lowest validation loss epoch
/// (lowest training loss when `validation` is empty), with the history set.
/// Mini-batches are reshuffled every epoch from derive_seed(seed,
/// "train/shuffle", epoch); gd uses the whole set as one batch. se/sve
/// latents are then relabelled by decreasing spread. Throws SolveError with
/// the epoch, step and loss when the objective becomes non-finite.
void fit(SurrogateModel& model, const TensorSet& train, const TensorSet& validation, const nn::TrainSpec& spec);

/// Builds and trains a whole-domain model on the train split, selecting on the
/// validation split. Throws InputError when the train split is empty.
SurrogateModel train_global(const oracle::SampleSet& samples, Variant variant, Target target,
                            const nn::TrainSpec& spec, const Architecture& arch = {});

/// Same for a window model; every stride-1 window is one item.
SurrogateModel train_local(const oracle::SampleSet& samples, Variant variant, Target target,
                           const nn::TrainSpec& spec, const Architecture& arch = {});

struct Evaluation {
    std::vector<double> sample_rmse; ///< one per sample
    double rmse = 0.0;               ///< pooled over every predicted point
};

/// Compares predictions on `bathys` with the samples' velocities. Global
/// models predict each field once; local models pool every stride-1 window.
/// When `bathys` is empty the samples' own bathymetries are used.
Evaluation evaluate(const SurrogateModel& model, std::span<const oracle::Sample* const> samples,
                    std::span<const grid::ScalarField> bathys = {});

} // namespace riverflow::surrogate
