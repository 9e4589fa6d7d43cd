#include "despeckle/denoiser.hpp"

#include "despeckle/errors.hpp"
#include "despeckle/tensor_image.hpp"
#include "despeckle/trainer.hpp"

#include <algorithm>
#include <sstream>

namespace despeckle {

namespace F = torch::nn::functional;

torch::Tensor image_to_tensor(const Image& image) {
    auto t = torch::empty({1, 1, image.height(), image.width()}, torch::kFloat32);
    auto* out = t.data_ptr<float>();
    const auto px = image.pixels();
    for (size_t i = 0; i < px.size(); ++i) out[i] = static_cast<float>(px[i]);
    return t;
}

Image tensor_to_image(const torch::Tensor& tensor) {
    auto t = tensor.detach().to(torch::kDouble).contiguous();
    if (t.dim() < 2 || t.numel() != t.size(-1) * t.size(-2)) {
        std::ostringstream os;
        os << "tensor_to_image: expected a single image, got " << tensor.sizes();
        throw ShapeError(os.str());
    }
    const int64_t h = t.size(-2), w = t.size(-1);
    const auto* p = t.data_ptr<double>();
    return Image(h, w, std::vector<double>(p, p + h * w));
}

int64_t padding_to_multiple(int64_t size, int64_t factor) {
    return (factor - size % factor) % factor;
}

Denoiser::Denoiser(NetworkConfig config, ContentEncoder encoder, CleanGenerator generator)
    : config_(config), encoder_(std::move(encoder)), generator_(std::move(generator)) {
    encoder_->eval();
    generator_->eval();
}

Denoiser Denoiser::from_checkpoint(const std::filesystem::path& path,
                                   const std::optional<NetworkConfig>& expected) {
    const auto train_config = read_checkpoint_config(path);
    const auto& net = train_config.network;
    if (expected && !(*expected == net)) {
        throw ConfigError("checkpoint " + path.string() +
                          " was trained with a different network config");
    }
    ContentEncoder encoder(net);
    CleanGenerator generator(net);
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    try {
        torch::serialize::InputArchive sub;
        archive.read("model_content_encoder", sub);
        encoder->load(sub);
        torch::serialize::InputArchive gsub;
        archive.read("model_clean_generator", gsub);
        generator->load(gsub);
    } catch (const c10::Error& e) {
        throw ConfigError("checkpoint " + path.string() +
                          " does not match its network config: " + e.what_without_backtrace());
    }
    return Denoiser(net, encoder, generator);
}

torch::Tensor Denoiser::denoise_batch(const torch::Tensor& images) const {
    if (images.dim() != 4 || images.size(1) != 1) {
        std::ostringstream os;
        os << "denoise expects single-channel (B,1,H,W) input, got " << images.sizes();
        throw ShapeError(os.str());
    }
    torch::NoGradGuard guard;
    return generator_->forward(encoder_->forward(images));
}

Image Denoiser::denoise(const Image& image) const {
    const int64_t f = config_.downsample_factor;
    if (image.height() < f || image.width() < f) {
        throw DimensionError("image " + std::to_string(image.height()) + "x" +
                             std::to_string(image.width()) +
                             " is smaller than the downsample factor " + std::to_string(f));
    }
    // the encoder also needs at least two cells per axis after downsampling
    const int64_t pad_h = std::max(padding_to_multiple(image.height(), f), 2 * f - image.height());
    const int64_t pad_w = std::max(padding_to_multiple(image.width(), f), 2 * f - image.width());
    auto input = image_to_tensor(image);
    if (pad_h || pad_w) {
        if (pad_h >= image.height() || pad_w >= image.width()) {
            // reflect padding needs pad < size; fall back to replicate for tiny inputs
            input = F::pad(input, F::PadFuncOptions({0, pad_w, 0, pad_h}).mode(torch::kReplicate));
        } else {
            input = F::pad(input, F::PadFuncOptions({0, pad_w, 0, pad_h}).mode(torch::kReflect));
        }
    }
    auto out = denoise_batch(input);
    if (pad_h || pad_w) out = out.narrow(2, 0, image.height()).narrow(3, 0, image.width());
    return tensor_to_image(out.clamp(0.0, 1.0));
}

Image extract_noise_estimate(const Image& image, const Image& denoised) {
    if (image.height() != denoised.height() || image.width() != denoised.width()) {
        throw DimensionError("noise estimate: image is " + std::to_string(image.height()) + "x" +
                             std::to_string(image.width()) + " but denoised is " +
                             std::to_string(denoised.height()) + "x" +
                             std::to_string(denoised.width()));
    }
    Image out(image.height(), image.width());
    auto o = out.pixels();
    const auto a = image.pixels();
    const auto b = denoised.pixels();
    for (size_t i = 0; i < o.size(); ++i) o[i] = a[i] - b[i];
    return out;
}

}  // namespace despeckle
