#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace badhash {

// Decodes an 8- or 16-bit image into a float [C, H, W] RGB tensor in [0, 1].
torch::Tensor read_image(const std::filesystem::path& path);

// Lossless PNG. 16-bit keeps sub-1/255 perturbations; values are clamped to
// [0, 1] before quantization.
void write_png(const std::filesystem::path& path, const torch::Tensor& image, int bit_depth = 8);

} // namespace badhash
