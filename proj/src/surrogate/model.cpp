#include "riverflow/surrogate/model.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/common/seed.hpp"
#include "riverflow/nn/loss.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace riverflow::surrogate {

using nlohmann::json;
using nn::LayerSpec;
using nn::Tensor;

std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::linear: return "linear";
    case Variant::pca_dnn: return "pca_dnn";
    case Variant::se: return "se";
    case Variant::sve: return "sve";
    }
    return "?";
}

std::string_view to_string(Scope s) { return s == Scope::global ? "global" : "local"; }

std::string_view to_string(Target t)
{
    switch (t) {
    case Target::magnitude: return "magnitude";
    case Target::easting: return "easting";
    case Target::northing: return "northing";
    }
    return "?";
}

Variant parse_variant(std::string_view text)
{
    if (text == "linear") return Variant::linear;
    if (text == "pca_dnn" || text == "pca-dnn") return Variant::pca_dnn;
    if (text == "se") return Variant::se;
    if (text == "sve") return Variant::sve;
    throw InputError("unknown variant '" + std::string(text) + "'");
}

Scope parse_scope(std::string_view text)
{
    if (text == "global") return Scope::global;
    if (text == "local") return Scope::local;
    throw InputError("unknown scope '" + std::string(text) + "'");
}

Target parse_target(std::string_view text)
{
    if (text == "magnitude") return Target::magnitude;
    if (text == "easting") return Target::easting;
    if (text == "northing") return Target::northing;
    throw InputError("unknown target '" + std::string(text) + "'");
}

std::vector<double> target_values(const grid::VectorField& v, Target t)
{
    switch (t) {
    case Target::easting: return {v.easting().begin(), v.easting().end()};
    case Target::northing: return {v.northing().begin(), v.northing().end()};
    case Target::magnitude: break;
    }
    const auto m = grid::velocity_magnitude(v);
    return {m.values().begin(), m.values().end()};
}

void Architecture::validate() const
{
    require(latent_dim > 0, "latent_dim must be positive");
    require(!conv_channels.empty(), "conv_channels must not be empty");
    require(conv_kernel % 2 == 1, "conv_kernel must be odd");
    require(window_along > 0, "window_along must be positive");
    require(pca_block > 0, "pca_block must be positive");
    for (auto w : dnn_hidden) require(w > 0, "dnn_hidden widths must be positive");
    for (auto w : local_dnn_hidden) require(w > 0, "local_dnn_hidden widths must be positive");
    for (auto w : local_hidden) require(w > 0, "local_hidden widths must be positive");
    for (auto c : conv_channels) require(c > 0, "conv_channels must be positive");
}

namespace {

double rms(const Eigen::MatrixXd& m)
{
    if (m.size() == 0) return 1.0;
    const double r = std::sqrt(m.squaredNorm() / double(m.size()));
    return r > 1e-12 ? r : 1.0;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd)
{
    mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / double(v.size()));
    if (!(sd > 1e-12)) sd = 1.0;
}

Eigen::MatrixXd rows_of(std::span<const Example> items, bool target, std::size_t width)
{
    Eigen::MatrixXd m(Eigen::Index(items.size()), Eigen::Index(width));
    for (std::size_t r = 0; r < items.size(); ++r) {
        const auto src = target ? items[r].target : items[r].bathy;
        require(src.size() == width, std::string(target ? "target" : "bathymetry") + " item has " +
                                         std::to_string(src.size()) + " values, expected " + std::to_string(width));
        for (std::size_t c = 0; c < width; ++c) m(Eigen::Index(r), Eigen::Index(c)) = src[c];
    }
    return m;
}

Tensor to_tensor(const Eigen::MatrixXd& m, nn::Shape item)
{
    nn::Shape shape{std::size_t(m.rows())};
    shape.insert(shape.end(), item.begin(), item.end());
    Tensor t(shape);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t[std::size_t(r * m.cols() + c)] = m(r, c);
    return t;
}

Tensor concat_columns(const Tensor& a, const Tensor& b)
{
    const std::size_t n = a.dim(0), wa = a.item_size(), wb = b.item_size();
    require(b.dim(0) == n, "batch size mismatch");
    Tensor out({n, wa + wb});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a.data() + r * wa, wa, out.data() + r * (wa + wb));
        std::copy_n(b.data() + r * wb, wb, out.data() + r * (wa + wb) + wa);
    }
    return out;
}

Tensor leading_columns(const Tensor& t, std::size_t width)
{
    const std::size_t n = t.dim(0), w = t.item_size();
    Tensor out({n, width});
    for (std::size_t r = 0; r < n; ++r) std::copy_n(t.data() + r * w, width, out.data() + r * width);
    return out;
}

void push_hidden(std::vector<LayerSpec>& specs, std::size_t& width, std::size_t next, bool batchnorm,
                 nn::Activation act)
{
    specs.push_back(LayerSpec::dense(width, next));
    if (batchnorm) specs.push_back(LayerSpec::batchnorm(next));
    specs.push_back(LayerSpec::act(act));
    width = next;
}

std::vector<double> matrix_rows(const Eigen::MatrixXd& m)
{
    std::vector<double> out(std::size_t(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[std::size_t(r * m.cols() + c)] = m(r, c);
    return out;
}

Eigen::MatrixXd matrix_from(const std::vector<double>& v, std::size_t rows, std::size_t cols)
{
    if (v.size() != rows * cols) throw FormatError("checkpoint matrix block has the wrong size");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(Eigen::Index(r), Eigen::Index(c)) = v[r * cols + c];
    return m;
}

Eigen::VectorXd vector_from(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

json specs_json(const nn::Sequential& s)
{
    json arr = json::array();
    for (const auto& spec : s.specs()) arr.push_back(spec.to_string());
    return json{{"input", s.input_shape()}, {"layers", arr}};
}

nn::Sequential sequential_from(const json& j)
{
    std::vector<LayerSpec> specs;
    for (const auto& line : j.at("layers")) specs.push_back(LayerSpec::parse(line.get<std::string>()));
    return nn::Sequential(j.at("input").get<nn::Shape>(), specs);
}

void store_basis(nn::Checkpoint& ck, const std::string& name, const PcaBasis& b)
{
    ck.add(name + ".components", matrix_rows(b.components));
    ck.add(name + ".mean", std::vector<double>(b.mean.data(), b.mean.data() + b.mean.size()));
    ck.add(name + ".singular_values",
           std::vector<double>(b.singular_values.data(), b.singular_values.data() + b.singular_values.size()));
}

PcaBasis restore_basis(const nn::Checkpoint& ck, const std::string& name, std::size_t latent, std::size_t ambient)
{
    PcaBasis b;
    b.components = matrix_from(ck.block(name + ".components"), latent, ambient);
    b.mean = vector_from(ck.block(name + ".mean"));
    b.singular_values = vector_from(ck.block(name + ".singular_values"));
    if (std::size_t(b.mean.size()) != ambient || std::size_t(b.singular_values.size()) != latent)
        throw FormatError("checkpoint basis '" + name + "' has inconsistent sizes");
    return b;
}

} // namespace

grid::GridShape SurrogateModel::item_shape() const
{
    if (scope_ == Scope::global) return grid_;
    return {grid_.n_across, arch_.window_along, grid_.spacing_m};
}

SurrogateModel SurrogateModel::build(Variant variant, Scope scope, Target target, const grid::GridShape& grid,
                                     const Architecture& arch, std::span<const Example> train, std::uint64_t seed)
{
    arch.validate();
    require(!train.empty(), "cannot build a surrogate from an empty training list");
    require(grid.node_count() > 0, "empty grid");
    SurrogateModel m;
    m.variant_ = variant;
    m.scope_ = scope;
    m.target_ = target;
    m.arch_ = arch;
    m.grid_ = grid;
    if (scope == Scope::local)
        require(arch.window_along <= grid.n_along, "window longer than the grid");
    const std::size_t width = m.item_size();
    for (const auto& e : train) {
        require(e.bathy.size() == width && e.target.size() == width, "training item size does not match the grid");
        e.bc.validate();
        if (scope == Scope::local) require(e.d + arch.window_along <= grid.n_along, "window outside the grid");
    }

    std::vector<double> q, zf;
    for (const auto& e : train) {
        q.push_back(e.bc.discharge_q);
        zf.push_back(e.bc.stage_zf);
    }
    mean_std(q, m.q_mean_, m.q_std_);
    mean_std(zf, m.zf_mean_, m.zf_std_);

    if (uses_pca(variant)) {
        const std::size_t L = arch.latent_dim;
        if (scope == Scope::global) {
            m.bathy_basis_ = fit_pca(rows_of(train, false, width), L);
            m.vel_basis_ = fit_pca(rows_of(train, true, width), L);
        } else {
            IncrementalPca bathy_ipca(L), vel_ipca(L);
            for (std::size_t start = 0; start < train.size(); start += arch.pca_block) {
                const auto block = train.subspan(start, std::min(arch.pca_block, train.size() - start));
                bathy_ipca.partial_fit(rows_of(block, false, width));
                vel_ipca.partial_fit(rows_of(block, true, width));
            }
            m.bathy_basis_ = bathy_ipca.basis();
            m.vel_basis_ = vel_ipca.basis();
        }
        m.in_scale_ = rms(m.bathy_basis_.project_rows(rows_of(train, false, width)));
        m.out_scale_ = rms(m.vel_basis_.project_rows(rows_of(train, true, width)));
    } else {
        const Eigen::MatrixXd x = rows_of(train, false, width);
        const Eigen::MatrixXd t = rows_of(train, true, width);
        m.in_mean_ = x.colwise().mean().transpose();
        m.out_mean_ = t.colwise().mean().transpose();
        m.in_scale_ = rms(x.rowwise() - m.in_mean_.transpose());
        m.out_scale_ = rms(t.rowwise() - m.out_mean_.transpose());
    }
    m.build_networks(seed);
    return m;
}

void SurrogateModel::build_networks(std::uint64_t seed)
{
    const std::size_t L = arch_.latent_dim;
    const std::size_t cin = decoder_input_width();
    const auto act = arch_.activation;
    const bool local = scope_ == Scope::local;
    const bool bn = local && arch_.local_batchnorm;
    const std::size_t M = item_size();

    std::vector<LayerSpec> dec;
    if (uses_pca(variant_)) {
        std::size_t width = cin;
        if (variant_ == Variant::pca_dnn)
            for (auto h : local ? arch_.local_dnn_hidden : arch_.dnn_hidden) push_hidden(dec, width, h, bn, act);
        dec.push_back(LayerSpec::dense(width, L));
        decoder_ = nn::Sequential({cin}, dec);
        decoder_.init(derive_seed(seed, "surrogate/decoder"));
        return;
    }

    std::vector<LayerSpec> enc;
    nn::Shape enc_input;
    std::size_t feature = 0;
    if (!local) {
        const std::size_t H = grid_.n_along, W = grid_.n_across, k = arch_.conv_kernel, p = k / 2;
        enc_input = {1, H, W};
        std::vector<std::pair<std::size_t, std::size_t>> dims{{H, W}};
        std::size_t ch = 1;
        for (auto c : arch_.conv_channels) {
            enc.push_back(LayerSpec::conv2d(ch, c, k, 2, p));
            enc.push_back(LayerSpec::act(act));
            auto [h, w] = dims.back();
            require(h + 2 * p >= k && w + 2 * p >= k, "grid too small for the convolution stack");
            dims.push_back({(h + 2 * p - k) / 2 + 1, (w + 2 * p - k) / 2 + 1});
            ch = c;
        }
        enc.push_back(LayerSpec::flatten());
        const auto [hb, wb] = dims.back();
        feature = ch * hb * wb;
        dec.push_back(LayerSpec::dense(cin, feature));
        dec.push_back(LayerSpec::act(act));
        dec.push_back(LayerSpec::reshape({ch, hb, wb}));
        for (std::size_t i = arch_.conv_channels.size(); i-- > 0;) {
            const std::size_t out_ch = i == 0 ? 1 : arch_.conv_channels[i - 1];
            const auto [h, w] = dims[i];
            dec.push_back(LayerSpec::conv_transpose2d(arch_.conv_channels[i], out_ch, k, 2, p, h, w));
            if (i != 0) dec.push_back(LayerSpec::act(act));
        }
    } else {
        enc_input = {M};
        std::size_t width = M;
        for (auto h : arch_.local_hidden) push_hidden(enc, width, h, bn, act);
        feature = width;
        width = cin;
        for (auto it = arch_.local_hidden.rbegin(); it != arch_.local_hidden.rend(); ++it)
            push_hidden(dec, width, *it, bn, act);
        dec.push_back(LayerSpec::dense(width, M));
    }
    if (variant_ == Variant::se) enc.push_back(LayerSpec::dense(feature, L));
    encoder_ = nn::Sequential(enc_input, enc);
    encoder_.init(derive_seed(seed, "surrogate/encoder"));
    if (variant_ == Variant::sve) {
        mu_head_ = nn::Sequential({feature}, {LayerSpec::dense(feature, L)});
        logvar_head_ = nn::Sequential({feature}, {LayerSpec::dense(feature, L)});
        mu_head_.init(derive_seed(seed, "surrogate/mu_head"));
        logvar_head_.init(derive_seed(seed, "surrogate/logvar_head"));
    }
    decoder_ = nn::Sequential({cin}, dec);
    decoder_.init(derive_seed(seed, "surrogate/decoder"));
}

nn::Tensor SurrogateModel::condition(std::span<const Example> items) const
{
    Tensor c({items.size(), cond_width()});
    const std::size_t w = cond_width();
    const double span = double(grid_.n_along - std::min(grid_.n_along, arch_.window_along));
    for (std::size_t r = 0; r < items.size(); ++r) {
        c[r * w] = (items[r].bc.discharge_q - q_mean_) / q_std_;
        c[r * w + 1] = (items[r].bc.stage_zf - zf_mean_) / zf_std_;
        if (w == 3) c[r * w + 2] = span > 0.0 ? 2.0 * double(items[r].d) / span - 1.0 : 0.0;
    }
    return c;
}

nn::Tensor SurrogateModel::encoder_input(std::span<const Example> items) const
{
    const std::size_t width = item_size();
    const Eigen::MatrixXd x = rows_of(items, false, width);
    if (uses_pca(variant_)) return to_tensor(bathy_basis_.project_rows(x) / in_scale_, {latent_dim()});
    const Eigen::MatrixXd z = (x.rowwise() - in_mean_.transpose()) / in_scale_;
    if (scope_ == Scope::global) return to_tensor(z, {1, grid_.n_along, grid_.n_across});
    return to_tensor(z, {width});
}

TensorSet SurrogateModel::tensors(std::span<const Example> items) const
{
    TensorSet s;
    s.input = encoder_input(items);
    s.cond = condition(items);
    const bool has_target = !items.empty() && !items.front().target.empty();
    if (has_target) {
        const std::size_t width = item_size();
        const Eigen::MatrixXd t = rows_of(items, true, width);
        if (uses_pca(variant_))
            s.target = to_tensor(vel_basis_.project_rows(t) / out_scale_, {latent_dim()});
        else if (scope_ == Scope::global)
            s.target = to_tensor((t.rowwise() - out_mean_.transpose()) / out_scale_, {1, grid_.n_along, grid_.n_across});
        else
            s.target = to_tensor((t.rowwise() - out_mean_.transpose()) / out_scale_, {width});
    }
    return s;
}

nn::Tensor SurrogateModel::latent_tensor(const nn::Tensor& input) const
{
    if (uses_pca(variant_)) return input;
    if (variant_ == Variant::se) return encoder_.infer(input);
    return mu_head_.infer(encoder_.infer(input));
}

nn::Tensor SurrogateModel::decoder_tensor(const nn::Tensor& latent, const nn::Tensor& cond) const
{
    return decoder_.infer(concat_columns(latent, cond));
}

Eigen::MatrixXd SurrogateModel::denormalize(const nn::Tensor& out) const
{
    const std::size_t n = out.dim(0), w = out.item_size();
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < w; ++c) y(Eigen::Index(r), Eigen::Index(c)) = out[r * w + c];
    if (uses_pca(variant_)) return vel_basis_.reconstruct_rows(y * out_scale_);
    return (y * out_scale_).rowwise() + out_mean_.transpose();
}

Eigen::MatrixXd SurrogateModel::encode(std::span<const Example> items) const
{
    const Tensor z = latent_tensor(encoder_input(items));
    Eigen::MatrixXd out(Eigen::Index(items.size()), Eigen::Index(latent_dim()));
    const std::size_t L = latent_dim();
    for (std::size_t r = 0; r < items.size(); ++r)
        for (std::size_t c = 0; c < L; ++c) out(Eigen::Index(r), Eigen::Index(c)) = z[r * L + c];
    if (uses_pca(variant_)) out *= in_scale_;
    return out;
}

Eigen::MatrixXd SurrogateModel::decode(const Eigen::MatrixXd& latent, std::span<const Example> items) const
{
    require(std::size_t(latent.rows()) == items.size() && std::size_t(latent.cols()) == latent_dim(),
            "latent matrix does not match the item list");
    Eigen::MatrixXd z = latent;
    if (uses_pca(variant_)) z /= in_scale_;
    return denormalize(decoder_tensor(to_tensor(z, {latent_dim()}), condition(items)));
}

Eigen::MatrixXd SurrogateModel::predict(std::span<const Example> items) const
{
    if (items.empty()) return Eigen::MatrixXd(0, Eigen::Index(item_size()));
    const Tensor in = encoder_input(items);
    Tensor z = latent_tensor(in);
    if (z.rank() != 2) z = z.reshaped({z.dim(0), z.item_size()});
    return denormalize(decoder_tensor(z, condition(items)));
}

grid::ScalarField SurrogateModel::predict_global(const grid::ScalarField& bathy, const grid::BoundaryCondition& bc) const
{
    require(scope_ == Scope::global, "predict_global needs a global model");
    require(bathy.shape() == grid_, "bathymetry grid does not match the model grid");
    bc.validate();
    const Example e{bathy.values(), bc, 0, {}};
    const Eigen::MatrixXd y = predict(std::span<const Example>(&e, 1));
    std::vector<double> v(y.data(), y.data() + y.size());
    const auto kind = target_ == Target::magnitude ? grid::FieldKind::velocity_magnitude
                      : target_ == Target::easting ? grid::FieldKind::easting
                                                   : grid::FieldKind::northing;
    return grid::ScalarField(grid_, std::move(v), kind);
}

std::vector<double> SurrogateModel::predict_window(const grid::ScalarField& bathy, const grid::BoundaryCondition& bc,
                                                   std::size_t d) const
{
    require(scope_ == Scope::local, "predict_window needs a local model");
    require(bathy.shape() == grid_, "bathymetry grid does not match the model grid");
    require(d + arch_.window_along <= grid_.n_along, "window outside the grid");
    bc.validate();
    const Example e{bathy.values().subspan(d * grid_.n_across, item_size()), bc, d, {}};
    const Eigen::MatrixXd y = predict(std::span<const Example>(&e, 1));
    return {y.data(), y.data() + y.size()};
}

std::vector<nn::Param*> SurrogateModel::params()
{
    std::vector<nn::Param*> out;
    for (auto* s : {&encoder_, &mu_head_, &logvar_head_, &decoder_})
        for (auto* p : s->params()) out.push_back(p);
    return out;
}

std::size_t SurrogateModel::param_count() const
{
    return encoder_.param_count() + mu_head_.param_count() + logvar_head_.param_count() + decoder_.param_count();
}

double SurrogateModel::objective(const TensorSet& batch, const nn::TrainSpec& spec, std::uint64_t noise_seed,
                                 bool with_grad, double* mse)
{
    require(batch.size() > 0 && batch.target.size() > 0, "objective needs a non-empty batch with targets");
    const auto ps = params();
    if (with_grad)
        for (auto* p : ps) p->grad.fill(0.0);
    const auto mode = nn::Mode::train;
    const std::size_t L = latent_dim();
    Tensor gy;
    double data = 0.0, kl = 0.0;

    if (uses_pca(variant_)) {
        const Tensor y = decoder_.forward(concat_columns(batch.input, batch.cond), mode);
        data = nn::mse_loss(y, batch.target, with_grad ? &gy : nullptr);
        if (with_grad) decoder_.backward(gy);
    } else if (variant_ == Variant::se) {
        const Tensor z = encoder_.forward(batch.input, mode);
        const Tensor y = decoder_.forward(concat_columns(z, batch.cond), mode);
        data = nn::mse_loss(y, batch.target, with_grad ? &gy : nullptr);
        if (with_grad) encoder_.backward(leading_columns(decoder_.backward(gy), L));
    } else {
        const Tensor f = encoder_.forward(batch.input, mode);
        const Tensor mu = mu_head_.forward(f, mode);
        const Tensor lv = logvar_head_.forward(f, mode);
        const Tensor eps = nn::standard_normal_like(mu, noise_seed);
        const Tensor z = nn::reparameterize(mu, lv, eps);
        const Tensor y = decoder_.forward(concat_columns(z, batch.cond), mode);
        data = nn::mse_loss(y, batch.target, with_grad ? &gy : nullptr);
        Tensor gmu(mu.shape()), glv(lv.shape());
        kl = nn::kl_standard_normal(mu, lv, spec.kl_weight, with_grad ? &gmu : nullptr, with_grad ? &glv : nullptr);
        if (with_grad) {
            const Tensor gz = leading_columns(decoder_.backward(gy), L);
            nn::reparameterize_backward(lv, eps, gz, gmu, glv);
            Tensor gf = mu_head_.backward(gmu);
            const Tensor gf2 = logvar_head_.backward(glv);
            for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += gf2[i];
            encoder_.backward(gf);
        }
    }
    const double l2 = nn::l2_penalty(ps, spec.l2_coeff, with_grad);
    if (mse) *mse = data;
    return data + l2 + (variant_ == Variant::sve ? spec.kl_weight * kl : 0.0);
}

double SurrogateModel::evaluation_mse(const TensorSet& set) const
{
    require(set.size() > 0 && set.target.size() > 0, "evaluation needs a non-empty set with targets");
    Tensor z = latent_tensor(set.input);
    if (z.rank() != 2) z = z.reshaped({z.dim(0), z.item_size()});
    const Tensor y = decoder_tensor(z, set.cond);
    return nn::mse_loss(y.reshaped(set.target.shape()), set.target);
}

void SurrogateModel::canonicalize_latent(const nn::Tensor& inputs)
{
    if (uses_pca(variant_) || inputs.size() == 0) return;
    const Tensor z = latent_tensor(inputs);
    const std::size_t n = z.dim(0), L = latent_dim();
    std::vector<double> sd(L, 0.0);
    for (std::size_t c = 0; c < L; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += z[r * L + c];
        mean /= double(n);
        for (std::size_t r = 0; r < n; ++r) sd[c] += (z[r * L + c] - mean) * (z[r * L + c] - mean);
    }
    std::vector<std::size_t> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sd[a] > sd[b]; });

    auto permute_rows = [&](nn::Sequential& s) {
        auto ps = s.params();
        nn::Param* w = ps[ps.size() - 2];
        nn::Param* b = ps[ps.size() - 1];
        const std::size_t in = w->value.item_size();
        const Tensor w0 = w->value, b0 = b->value;
        for (std::size_t r = 0; r < L; ++r) {
            std::copy_n(w0.data() + order[r] * in, in, w->value.data() + r * in);
            b->value[r] = b0[order[r]];
        }
    };
    if (variant_ == Variant::se) {
        permute_rows(encoder_);
    } else {
        permute_rows(mu_head_);
        permute_rows(logvar_head_);
    }
    nn::Param* w = decoder_.params().front();
    const std::size_t in = w->value.item_size();
    const Tensor w0 = w->value;
    for (std::size_t o = 0; o < w->value.dim(0); ++o)
        for (std::size_t r = 0; r < L; ++r) w->value[o * in + r] = w0[o * in + order[r]];
}

void SurrogateModel::save(const std::filesystem::path& path) const
{
    json h;
    h["format"] = "riverflow-surrogate";
    h["variant"] = to_string(variant_);
    h["scope"] = to_string(scope_);
    h["target"] = to_string(target_);
    h["grid"] = {{"n_across", grid_.n_across}, {"n_along", grid_.n_along}, {"spacing_m", grid_.spacing_m}};
    h["architecture"] = {{"latent_dim", arch_.latent_dim},
                         {"dnn_hidden", arch_.dnn_hidden},
                         {"local_dnn_hidden", arch_.local_dnn_hidden},
                         {"conv_channels", arch_.conv_channels},
                         {"conv_kernel", arch_.conv_kernel},
                         {"local_hidden", arch_.local_hidden},
                         {"window_along", arch_.window_along},
                         {"activation", nn::to_string(arch_.activation)},
                         {"local_batchnorm", arch_.local_batchnorm},
                         {"pca_block", arch_.pca_block}};
    h["normalization"] = {{"in_scale", in_scale_}, {"out_scale", out_scale_}, {"q_mean", q_mean_},
                          {"q_std", q_std_},       {"zf_mean", zf_mean_},     {"zf_std", zf_std_}};
    h["history"] = {{"train_loss", history_.train_loss},
                    {"validation_loss", history_.validation_loss},
                    {"best_epoch", history_.best_epoch}};
    json nets;
    nn::Checkpoint ck;
    if (uses_pca(variant_)) {
        store_basis(ck, "bathy_basis", bathy_basis_);
        store_basis(ck, "velocity_basis", vel_basis_);
    } else {
        ck.add("norm.in_mean", std::vector<double>(in_mean_.data(), in_mean_.data() + in_mean_.size()));
        ck.add("norm.out_mean", std::vector<double>(out_mean_.data(), out_mean_.data() + out_mean_.size()));
        nets["encoder"] = specs_json(encoder_);
        encoder_.store(ck, "encoder");
        if (variant_ == Variant::sve) {
            nets["mu_head"] = specs_json(mu_head_);
            nets["logvar_head"] = specs_json(logvar_head_);
            mu_head_.store(ck, "mu_head");
            logvar_head_.store(ck, "logvar_head");
        }
    }
    nets["decoder"] = specs_json(decoder_);
    decoder_.store(ck, "decoder");
    h["networks"] = nets;
    ck.header = h.dump(1);
    ck.save(path);
}

SurrogateModel SurrogateModel::load(const std::filesystem::path& path)
{
    const auto ck = nn::Checkpoint::load(path);
    SurrogateModel m;
    try {
        const json h = json::parse(ck.header);
        if (h.at("format") != "riverflow-surrogate") throw FormatError("not a surrogate checkpoint");
        m.variant_ = parse_variant(h.at("variant").get<std::string>());
        m.scope_ = parse_scope(h.at("scope").get<std::string>());
        m.target_ = parse_target(h.at("target").get<std::string>());
        const auto& g = h.at("grid");
        m.grid_ = {g.at("n_across").get<std::size_t>(), g.at("n_along").get<std::size_t>(),
                   g.at("spacing_m").get<double>()};
        const auto& a = h.at("architecture");
        m.arch_.latent_dim = a.at("latent_dim");
        m.arch_.dnn_hidden = a.at("dnn_hidden").get<std::vector<std::size_t>>();
        m.arch_.local_dnn_hidden = a.at("local_dnn_hidden").get<std::vector<std::size_t>>();
        m.arch_.conv_channels = a.at("conv_channels").get<std::vector<std::size_t>>();
        m.arch_.conv_kernel = a.at("conv_kernel");
        m.arch_.local_hidden = a.at("local_hidden").get<std::vector<std::size_t>>();
        m.arch_.window_along = a.at("window_along");
        m.arch_.activation = nn::parse_activation(a.at("activation").get<std::string>());
        m.arch_.local_batchnorm = a.at("local_batchnorm");
        m.arch_.pca_block = a.at("pca_block");
        const auto& n = h.at("normalization");
        m.in_scale_ = n.at("in_scale");
        m.out_scale_ = n.at("out_scale");
        m.q_mean_ = n.at("q_mean");
        m.q_std_ = n.at("q_std");
        m.zf_mean_ = n.at("zf_mean");
        m.zf_std_ = n.at("zf_std");
        const auto& hist = h.at("history");
        m.history_.train_loss = hist.at("train_loss").get<std::vector<double>>();
        m.history_.validation_loss = hist.at("validation_loss").get<std::vector<double>>();
        m.history_.best_epoch = hist.at("best_epoch");

        const auto& nets = h.at("networks");
        const std::size_t M = m.item_size();
        if (uses_pca(m.variant_)) {
            m.bathy_basis_ = restore_basis(ck, "bathy_basis", m.arch_.latent_dim, M);
            m.vel_basis_ = restore_basis(ck, "velocity_basis", m.arch_.latent_dim, M);
        } else {
            m.in_mean_ = vector_from(ck.block("norm.in_mean"));
            m.out_mean_ = vector_from(ck.block("norm.out_mean"));
            if (std::size_t(m.in_mean_.size()) != M || std::size_t(m.out_mean_.size()) != M)
                throw FormatError("checkpoint normalization has the wrong size");
            m.encoder_ = sequential_from(nets.at("encoder"));
            m.encoder_.restore(ck, "encoder");
            if (m.variant_ == Variant::sve) {
                m.mu_head_ = sequential_from(nets.at("mu_head"));
                m.logvar_head_ = sequential_from(nets.at("logvar_head"));
                m.mu_head_.restore(ck, "mu_head");
                m.logvar_head_.restore(ck, "logvar_head");
            }
        }
        m.decoder_ = sequential_from(nets.at("decoder"));
        m.decoder_.restore(ck, "decoder");
    } catch (const json::exception& e) {
        throw FormatError("malformed surrogate checkpoint header: " + std::string(e.what()));
    } catch (const InputError& e) {
        throw FormatError("invalid surrogate checkpoint: " + std::string(e.what()));
    }
    return m;
}

} // namespace riverflow::surrogate
