#pragma once

#include "riverflow/grid/boundary.hpp"
#include "riverflow/grid/field.hpp"
#include "riverflow/nn/network.hpp"
#include "riverflow/nn/optimizer.hpp"
#include "riverflow/surrogate/pca.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riverflow::surrogate {

enum class Variant { linear, pca_dnn, se, sve };
enum class Scope { global, local };
enum class Target { magnitude, easting, northing };

std::string_view to_string(Variant v);
std::string_view to_string(Scope s);
std::string_view to_string(Target t);
/// Accepts "pca-dnn" and "pca_dnn".
Variant parse_variant(std::string_view text);
Scope parse_scope(std::string_view text);
Target parse_target(std::string_view text);

inline bool uses_pca(Variant v) { return v == Variant::linear || v == Variant::pca_dnn; }

/// Node values of the requested target component.
std::vector<double> target_values(const grid::VectorField& v, Target t);

struct Architecture {
    std::size_t latent_dim = 50;
    std::vector<std::size_t> dnn_hidden{128, 128, 128, 128};                 ///< global pca_dnn
    std::vector<std::size_t> local_dnn_hidden{128, 128, 128, 128, 128, 128}; ///< local pca_dnn
    std::vector<std::size_t> conv_channels{8, 16, 32};                       ///< global se/sve, stride 2 each
    std::size_t conv_kernel = 3;
    std::vector<std::size_t> local_hidden{128, 128, 64, 64, 64}; ///< local se/sve encoder, mirrored in the decoder
    std::size_t window_along = 16;
    nn::Activation activation = nn::Activation::tanh;
    bool local_batchnorm = true;
    std::size_t pca_block = 2048; ///< incremental PCA block for local models
    void validate() const;
};

/// One item in physical units. For local models `bathy` and `target` hold
/// the window slice and `d` is the along index of the window start.
struct Example {
    std::span<const double> bathy;
    grid::BoundaryCondition bc;
    std::size_t d = 0;
    std::span<const double> target;
};

struct History {
    std::vector<double> train_loss;      ///< mean objective per epoch
    std::vector<double> validation_loss; ///< normalized MSE per epoch, eval mode
    std::size_t best_epoch = 0;
};

/// Network-ready tensors for a list of examples.
struct TensorSet {
    nn::Tensor input;  ///< normalized PCA coordinates or normalized bathymetry
    nn::Tensor cond;   ///< normalized [Q, z_f] or [Q, z_f, d]
    nn::Tensor target; ///< normalized velocity latent or normalized field
    std::size_t size() const { return input.rank() == 0 ? 0 : input.dim(0); }
};

/// Checkpointable predictor. For the PCA variants the latent is the PCA
/// coordinate of the bathymetry and the decoder is the dense network followed
/// by the velocity reconstruction. For se/sve the latent is the encoder output
/// (the mean head for sve) and the decoder is the second half of the network.
class SurrogateModel {
public:
    SurrogateModel() = default;

    /// Fits the bases and normalization on `train` and initializes the
    /// networks from `seed`. Throws InputError on an empty list or on items
    /// whose sizes do not match the grid.
    static SurrogateModel build(Variant variant, Scope scope, Target target, const grid::GridShape& grid,
                                const Architecture& arch, std::span<const Example> train, std::uint64_t seed);

    Variant variant() const { return variant_; }
    Scope scope() const { return scope_; }
    Target target() const { return target_; }
    const Architecture& architecture() const { return arch_; }
    const grid::GridShape& grid_shape() const { return grid_; }
    /// Shape of one input item: the whole grid or one window.
    grid::GridShape item_shape() const;
    std::size_t item_size() const { return item_shape().node_count(); }
    std::size_t latent_dim() const { return arch_.latent_dim; }
    std::size_t cond_width() const { return scope_ == Scope::local ? 3 : 2; }
    /// Width of the decoder input (latent plus conditioning).
    std::size_t decoder_input_width() const { return latent_dim() + cond_width(); }

    const PcaBasis& bathy_basis() const { return bathy_basis_; }
    const PcaBasis& velocity_basis() const { return vel_basis_; }
    double input_scale() const { return in_scale_; }
    double output_scale() const { return out_scale_; }
    const nn::Sequential& decoder() const { return decoder_; }
    const History& history() const { return history_; }
    void set_history(History h) { history_ = std::move(h); }

    TensorSet tensors(std::span<const Example> items) const;
    nn::Tensor condition(std::span<const Example> items) const;

    /// Latent coordinates, one row per item.
    Eigen::MatrixXd encode(std::span<const Example> items) const;
    /// Physical outputs (one row per item) from latent rows and the
    /// conditioning of `items`.
    Eigen::MatrixXd decode(const Eigen::MatrixXd& latent, std::span<const Example> items) const;
    /// decode(encode(items), items).
    Eigen::MatrixXd predict(std::span<const Example> items) const;

    /// Global prediction on a whole bathymetry field.
    grid::ScalarField predict_global(const grid::ScalarField& bathy, const grid::BoundaryCondition& bc) const;
    /// Local prediction on the window starting at along index d.
    std::vector<double> predict_window(const grid::ScalarField& bathy, const grid::BoundaryCondition& bc,
                                       std::size_t d) const;

    /// Training objective on a batch: MSE on normalized outputs plus the L2
    /// penalty, plus kl_weight * KL for sve. Uses train-mode batchnorm and,
    /// for sve, reparameterized noise drawn from `noise_seed`. With
    /// `with_grad` the parameter gradients are zeroed and then filled. `mse`
    /// receives the data term alone.
    double objective(const TensorSet& batch, const nn::TrainSpec& spec, std::uint64_t noise_seed, bool with_grad,
                     double* mse = nullptr);
    /// Eval-mode normalized MSE (sve uses the mean latent).
    double evaluation_mse(const TensorSet& set) const;

    std::vector<nn::Param*> params();
    std::size_t param_count() const;

    /// se/sve: relabels latent units in order of decreasing standard deviation
    /// over `inputs` (a training tensor). The network function is unchanged.
    void canonicalize_latent(const nn::Tensor& inputs);

    void save(const std::filesystem::path& path) const;
    static SurrogateModel load(const std::filesystem::path& path);

private:
    nn::Tensor encoder_input(std::span<const Example> items) const;
    nn::Tensor latent_tensor(const nn::Tensor& input) const;
    nn::Tensor decoder_tensor(const nn::Tensor& latent, const nn::Tensor& cond) const;
    Eigen::MatrixXd denormalize(const nn::Tensor& out) const;
    void build_networks(std::uint64_t seed);

    Variant variant_ = Variant::pca_dnn;
    Scope scope_ = Scope::global;
    Target target_ = Target::magnitude;
    Architecture arch_;
    grid::GridShape grid_;

    PcaBasis bathy_basis_;
    PcaBasis vel_basis_;
    Eigen::VectorXd in_mean_;  ///< se/sve per-node bathymetry mean
    Eigen::VectorXd out_mean_; ///< se/sve per-node output mean
    double in_scale_ = 1.0;
    double out_scale_ = 1.0;
    double q_mean_ = 0.0, q_std_ = 1.0;
    double zf_mean_ = 0.0, zf_std_ = 1.0;

    nn::Sequential encoder_;
    nn::Sequential mu_head_;
    nn::Sequential logvar_head_;
    nn::Sequential decoder_;
    History history_;
};

} // namespace riverflow::surrogate
