#include "despeckle/networks.hpp"

#include "despeckle/errors.hpp"

#include <sstream>

namespace despeckle {

namespace nn = torch::nn;

namespace {

std::string shape_text(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding,
                bool bias, bool reflect) {
    auto opts = nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias);
    if (reflect && padding > 0) opts.padding_mode(torch::kReflect);
    return nn::Conv2d(opts);
}

InstanceNorm instance_norm(int64_t) { return InstanceNorm(); }

nn::Upsample upsample2x() {
    return nn::Upsample(
        nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
}

int64_t channels_at(const NetworkConfig& c, int64_t stage) { return c.base_channels << stage; }

void require_divisible(const torch::Tensor& images, const NetworkConfig& c, const char* where) {
    const int64_t f = c.downsample_factor;
    const int64_t h = images.size(2);
    const int64_t w = images.size(3);
    if (h % f != 0 || w % f != 0) {
        throw ShapeError(std::string(where) + ": spatial dims " + std::to_string(h) + "x" +
                         std::to_string(w) + " must be multiples of " + std::to_string(f) +
                         " (pad the input first)");
    }
    if (h / f < 2 || w / f < 2) {
        throw ShapeError(std::string(where) + ": spatial dims must be at least " +
                         std::to_string(2 * f));
    }
}

}  // namespace

void require_single_channel(const torch::Tensor& images, const char* where) {
    if (images.dim() != 4 || images.size(1) != 1) {
        throw ShapeError(std::string(where) + ": expected a (B,1,H,W) batch, got " +
                         shape_text(images));
    }
}

torch::Tensor adain(const torch::Tensor& features, const AdaINParams& params, double eps) {
    if (features.dim() != 4) {
        throw ShapeError("adain: feature map must be (B,C,H,W), got " + shape_text(features));
    }
    const int64_t b = features.size(0);
    const int64_t c = features.size(1);
    for (const auto* t : {&params.gamma, &params.beta}) {
        if (t->dim() != 2 || t->size(0) != b || t->size(1) != c) {
            throw ShapeError("adain: affine parameters " + shape_text(*t) +
                             " do not match feature map " + shape_text(features));
        }
    }
    const auto normalized = standardize(features, {2, 3}, eps, true);
    return params.gamma.view({b, c, 1, 1}) * normalized + params.beta.view({b, c, 1, 1});
}

AdaINParams split_affine(const torch::Tensor& mlp_output) {
    if (mlp_output.dim() != 2 || mlp_output.size(1) % 2 != 0) {
        throw ShapeError("split_affine: expected (B, 2C), got " + shape_text(mlp_output));
    }
    const int64_t c = mlp_output.size(1) / 2;
    return {mlp_output.narrow(1, 0, c), mlp_output.narrow(1, c, c)};
}

torch::Tensor standardize(const torch::Tensor& x, std::vector<int64_t> dims, double eps,
                          bool eps_on_sigma) {
    auto [var, mean] = torch::var_mean(x, dims, /*unbiased=*/false, /*keepdim=*/true);
    torch::Tensor live;
    {
        torch::NoGradGuard guard;
        const double ulp = x.scalar_type() == torch::kDouble ? 2.220446049250313e-16
                                                             : 1.1920928955078125e-7;
        const auto floor = (64.0 * ulp * mean).square() + 1e-8 * eps;
        live = (var > floor).to(x.scalar_type());
    }
    // the scale is (B,C,1,1); only the final product touches the full map.
    // clamp keeps the sqrt gradient finite on constant channels
    const auto scale = eps_on_sigma ? live / (var.clamp_min(1e-24).sqrt() + eps)
                                    : live * torch::rsqrt(var + eps);
    return (x - mean) * scale;
}

torch::Tensor InstanceNormImpl::forward(const torch::Tensor& x) {
    return standardize(x, {2, 3}, eps_, false);
}

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : eps_(eps) {
    weight_ = register_parameter("weight", torch::ones({channels}));
    bias_ = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
    const auto c = x.size(1);
    return standardize(x, {1, 2, 3}, eps_, false) * weight_.view({1, c, 1, 1}) +
           bias_.view({1, c, 1, 1});
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels)
    : conv1_(conv(channels, channels, 3, 1, 1, false, false)),
      conv2_(conv(channels, channels, 3, 1, 1, false, false)),
      norm1_(instance_norm(channels)),
      norm2_(instance_norm(channels)) {
    register_module("conv1", conv1_);
    register_module("norm1", norm1_);
    register_module("conv2", conv2_);
    register_module("norm2", norm2_);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto h = torch::relu(norm1_(conv1_(x)));
    return x + norm2_(conv2_(h));
}

AdaINResidualBlockImpl::AdaINResidualBlockImpl(int64_t channels)
    : conv1_(conv(channels, channels, 3, 1, 1, false, false)),
      conv2_(conv(channels, channels, 3, 1, 1, false, false)) {
    register_module("conv1", conv1_);
    register_module("conv2", conv2_);
}

torch::Tensor AdaINResidualBlockImpl::forward(const torch::Tensor& x, const AdaINParams& first,
                                              const AdaINParams& second) {
    auto h = torch::relu(adain(conv1_(x), first));
    return x + adain(conv2_(h), second);
}

ContentEncoderImpl::ContentEncoderImpl(const NetworkConfig& config) : config_(config) {
    config_.validate();
    const int64_t c0 = config_.base_channels;
    input_ = register_module(
        "input", nn::Sequential(conv(1, c0, 7, 1, 3, false, true), instance_norm(c0), nn::ReLU()));
    for (int64_t s = 0; s < config_.downsample_stages(); ++s) {
        const int64_t in = channels_at(config_, s);
        const int64_t out = channels_at(config_, s + 1);
        down_.push_back(register_module(
            "down" + std::to_string(s),
            nn::Sequential(conv(in, out, 4, 2, 1, false, false), instance_norm(out), nn::ReLU())));
    }
    residual_ = nn::Sequential();
    for (int64_t r = 0; r < config_.residual_blocks; ++r) {
        residual_->push_back(ResidualBlock(config_.content_channels()));
    }
    register_module("residual", residual_);
}

ContentFeatures ContentEncoderImpl::forward(const torch::Tensor& images) {
    require_single_channel(images, "content encoder");
    require_divisible(images, config_, "content encoder");
    ContentFeatures out;
    auto h = input_->forward(images);
    for (size_t s = 0; s < down_.size(); ++s) {
        out.skips.push_back(h);
        h = down_[s]->forward(h);
    }
    out.content = residual_->forward(h);
    return out;
}

NoiseEncoderImpl::NoiseEncoderImpl(const NetworkConfig& config, bool gaussian_head)
    : config_(config), gaussian_head_(gaussian_head) {
    config_.validate();
    body_ = nn::Sequential(conv(1, config_.base_channels, 7, 1, 3, true, true), nn::ReLU());
    for (int64_t s = 0; s < config_.downsample_stages(); ++s) {
        body_->push_back(
            conv(channels_at(config_, s), channels_at(config_, s + 1), 4, 2, 1, true, false));
        body_->push_back(nn::ReLU());
    }
    body_->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions({1, 1})));
    register_module("body", body_);
    const int64_t out = gaussian_head_ ? 2 * config_.noise_dim : config_.noise_dim;
    head_ = register_module("head", conv(config_.content_channels(), out, 1, 1, 0, true, false));
}

NoiseCode NoiseEncoderImpl::forward(const torch::Tensor& images,
                                    std::optional<at::Generator> generator) {
    require_single_channel(images, "noise encoder");
    if (images.size(2) < kMinSpatial || images.size(3) < kMinSpatial) {
        throw ShapeError("noise encoder: input " + shape_text(images) + " is smaller than " +
                         std::to_string(kMinSpatial) + "x" + std::to_string(kMinSpatial));
    }
    auto h = head_(body_->forward(images)).flatten(1);
    NoiseCode out;
    if (!gaussian_head_) {
        out.code = h;
        return out;
    }
    const int64_t d = config_.noise_dim;
    out.mean = h.narrow(1, 0, d);
    out.logvar = h.narrow(1, d, d);
    if (generator) {
        auto eps = at::randn(out.mean.sizes(), *generator, out.mean.options());
        out.code = out.mean + torch::exp(0.5 * out.logvar) * eps;
    } else {
        out.code = out.mean;
    }
    return out;
}

CleanGeneratorImpl::CleanGeneratorImpl(const NetworkConfig& config) : config_(config) {
    config_.validate();
    residual_ = nn::Sequential();
    for (int64_t r = 0; r < config_.residual_blocks; ++r) {
        residual_->push_back(ResidualBlock(config_.content_channels()));
    }
    register_module("residual", residual_);
    const int64_t stages = config_.downsample_stages();
    for (int64_t k = stages; k >= 1; --k) {
        const int64_t in = k == stages ? channels_at(config_, k) : 2 * channels_at(config_, k);
        const int64_t out = channels_at(config_, k - 1);
        up_.push_back(register_module(
            "up" + std::to_string(stages - k),
            nn::Sequential(upsample2x(), conv(in, out, 3, 1, 1, false, false), instance_norm(out),
                           nn::ReLU())));
    }
    const int64_t final_in = stages > 0 ? 2 * config_.base_channels : config_.base_channels;
    output_ = register_module("output", conv(final_in, 1, 3, 1, 1, true, true));
}

torch::Tensor CleanGeneratorImpl::forward(const ContentFeatures& features) {
    const auto stages = static_cast<size_t>(config_.downsample_stages());
    if (features.skips.size() != stages) {
        throw ShapeError("clean generator: expected " + std::to_string(stages) +
                         " skip activations, got " + std::to_string(features.skips.size()));
    }
    if (!features.content.defined() || features.content.dim() != 4 ||
        features.content.size(1) != config_.content_channels()) {
        throw ShapeError("clean generator: content features have the wrong shape");
    }
    auto h = residual_->forward(features.content);
    for (size_t i = 0; i < up_.size(); ++i) {
        h = up_[i]->forward(h);
        const auto& skip = features.skips[stages - 1 - i];
        if (skip.sizes() != h.sizes()) {
            throw ShapeError("clean generator: skip " + shape_text(skip) +
                             " does not match decoder activation " + shape_text(h));
        }
        h = torch::cat({h, skip}, 1);
    }
    return torch::sigmoid(output_(h));
}

NoisyGeneratorImpl::NoisyGeneratorImpl(const NetworkConfig& config) : config_(config) {
    config_.validate();
    const int64_t c = config_.content_channels();
    const int64_t affine = config_.residual_blocks * 2 * 2 * c;
    mlp_ = nn::Sequential();
    int64_t width = config_.noise_dim;
    for (int64_t l = 0; l + 1 < config_.mlp_layers; ++l) {
        mlp_->push_back(nn::Linear(width, config_.mlp_hidden));
        mlp_->push_back(nn::ReLU());
        width = config_.mlp_hidden;
    }
    nn::Linear last(width, affine);
    {
        // start from unit scale: the gamma half of every (gamma, beta) chunk
        torch::NoGradGuard guard;
        auto bias = last->bias.view({-1, 2, c});
        bias.select(1, 0).fill_(1.0);
        bias.select(1, 1).zero_();
    }
    mlp_->push_back(last);
    register_module("mlp", mlp_);
    for (int64_t r = 0; r < config_.residual_blocks; ++r) {
        blocks_.push_back(register_module("block" + std::to_string(r), AdaINResidualBlock(c)));
    }
    const int64_t stages = config_.downsample_stages();
    for (int64_t k = stages; k >= 1; --k) {
        const int64_t in = channels_at(config_, k);
        const int64_t out = channels_at(config_, k - 1);
        up_.push_back(register_module(
            "up" + std::to_string(stages - k),
            nn::Sequential(upsample2x(), conv(in, out, 3, 1, 1, true, false),
                           LayerNorm2d(out), nn::ReLU())));
    }
    output_ = register_module("output", conv(config_.base_channels, 1, 3, 1, 1, true, true));
}

std::vector<AdaINParams> NoisyGeneratorImpl::affine_params(const torch::Tensor& noise_code) {
    if (noise_code.dim() != 2 || noise_code.size(1) != config_.noise_dim) {
        throw ShapeError("noisy generator: noise code must be (B, " +
                         std::to_string(config_.noise_dim) + "), got " + shape_text(noise_code));
    }
    const int64_t c = config_.content_channels();
    auto flat = mlp_->forward(noise_code);
    std::vector<AdaINParams> out;
    for (int64_t i = 0; i < 2 * config_.residual_blocks; ++i) {
        out.push_back(split_affine(flat.narrow(1, i * 2 * c, 2 * c)));
    }
    return out;
}

torch::Tensor NoisyGeneratorImpl::forward(const torch::Tensor& content,
                                          const torch::Tensor& noise_code) {
    if (content.dim() != 4 || content.size(1) != config_.content_channels()) {
        throw ShapeError("noisy generator: content features have the wrong shape " +
                         shape_text(content));
    }
    auto params = affine_params(noise_code);
    if (noise_code.size(0) != content.size(0)) {
        throw ShapeError("noisy generator: batch of noise codes does not match content batch");
    }
    auto h = content;
    for (size_t r = 0; r < blocks_.size(); ++r) {
        h = blocks_[r]->forward(h, params[2 * r], params[2 * r + 1]);
    }
    for (auto& up : up_) h = up->forward(h);
    return torch::sigmoid(output_(h));
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const NetworkConfig& config) {
    config.validate();
    const int64_t c = config.base_channels;
    auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
    net_ = nn::Sequential(conv(1, c, 4, 2, 1, true, false), lrelu());
    int64_t width = c;
    for (int64_t n = 1; n < config.patchgan_layers; ++n) {
        const int64_t out = c * std::min<int64_t>(int64_t{1} << n, 8);
        net_->push_back(conv(width, out, 4, 2, 1, false, false));
        net_->push_back(instance_norm(out));
        net_->push_back(lrelu());
        width = out;
    }
    const int64_t out = c * std::min<int64_t>(int64_t{1} << config.patchgan_layers, 8);
    net_->push_back(conv(width, out, 4, 1, 1, false, false));
    net_->push_back(instance_norm(out));
    net_->push_back(lrelu());
    net_->push_back(conv(out, 1, 4, 1, 1, true, false));
    register_module("net", net_);
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& images) {
    require_single_channel(images, "discriminator");
    return net_->forward(images);
}

int64_t PatchDiscriminatorImpl::output_size(int64_t size, int64_t layers) {
    for (int64_t i = 0; i < layers; ++i) size = (size + 2 - 4) / 2 + 1;
    return size - 2;
}

ModelSet ModelSet::create(const TrainConfig& config, uint64_t init_seed) {
    config.validate();
    torch::manual_seed(init_seed);
    const auto& net = config.network;
    ModelSet m;
    m.content_encoder = ContentEncoder(net);
    m.noise_encoder = NoiseEncoder(net, config.uses_kl_head());
    m.clean_generator = CleanGenerator(net);
    m.noisy_generator = NoisyGenerator(net);
    m.clean_discriminator = PatchDiscriminator(net);
    m.noisy_discriminator = PatchDiscriminator(net);
    if (config.uses_noise_discriminator()) m.noise_discriminator = PatchDiscriminator(net);
    return m;
}

std::vector<torch::Tensor> ModelSet::generator_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : content_encoder->parameters()) out.push_back(p);
    for (const auto& p : noise_encoder->parameters()) out.push_back(p);
    for (const auto& p : clean_generator->parameters()) out.push_back(p);
    for (const auto& p : noisy_generator->parameters()) out.push_back(p);
    return out;
}

std::vector<torch::Tensor> ModelSet::discriminator_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : clean_discriminator->parameters()) out.push_back(p);
    for (const auto& p : noisy_discriminator->parameters()) out.push_back(p);
    if (has_noise_discriminator()) {
        for (const auto& p : noise_discriminator->parameters()) out.push_back(p);
    }
    return out;
}

std::vector<std::pair<std::string, std::shared_ptr<nn::Module>>> ModelSet::named_modules() const {
    std::vector<std::pair<std::string, std::shared_ptr<nn::Module>>> out = {
        {"content_encoder", content_encoder.ptr()},
        {"noise_encoder", noise_encoder.ptr()},
        {"clean_generator", clean_generator.ptr()},
        {"noisy_generator", noisy_generator.ptr()},
        {"clean_discriminator", clean_discriminator.ptr()},
        {"noisy_discriminator", noisy_discriminator.ptr()},
    };
    if (has_noise_discriminator()) out.emplace_back("noise_discriminator", noise_discriminator.ptr());
    return out;
}

void ModelSet::train(bool on) {
    for (auto& [name, module] : named_modules()) module->train(on);
}

}  // namespace despeckle
