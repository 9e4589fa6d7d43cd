#pragma once

#include "despeckle/image.hpp"

#include <torch/torch.h>

namespace despeckle {

/// (1,1,H,W) float32 tensor of an image.
torch::Tensor image_to_tensor(const Image& image);

/// Image from a tensor with exactly H*W elements ((H,W), (1,H,W) or (1,1,H,W)).
Image tensor_to_image(const torch::Tensor& tensor);

}  // namespace despeckle
