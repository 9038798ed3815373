#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace badhash {

// Images are [C, H, W] tensors with values in [0, 1]. MSE and PSNR are
// reported on the 8-bit scale (pixels multiplied by 255).
double mse(const torch::Tensor& a, const torch::Tensor& b);
// +infinity for identical images.
double psnr(const torch::Tensor& a, const torch::Tensor& b);
double psnr_from_mse(double mse_255);

// Gaussian-window SSIM (11x11, sigma 1.5, C1 = (0.01*255)^2,
// C2 = (0.03*255)^2) over the valid region, averaged over channels. Images
// smaller than the window use the largest odd window that fits.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

// clamp(magnification * |a - b|, 0, 1).
torch::Tensor residual_map(const torch::Tensor& a, const torch::Tensor& b, double magnification);

struct StealthReport {
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 1.0;
};

StealthReport stealth_report(const torch::Tensor& original, const torch::Tensor& poisoned);

// Mean over a batch of pairs ([N, C, H, W] each). PSNR is averaged per pair;
// identical pairs are skipped in the PSNR mean.
struct StealthSummary {
    StealthReport mean;
    std::size_t count = 0;
};
StealthSummary stealth_summary(const torch::Tensor& originals, const torch::Tensor& poisoned);

// Reads a TSV manifest of "<original>\t<poisoned>" image paths (relative
// paths resolve against the manifest's directory) and writes a CSV with one
// row per pair plus a final "mean" row. Returns the aggregate.
StealthSummary evaluate_pair_manifest(const std::filesystem::path& manifest,
                                      const std::filesystem::path& out_csv);

} // namespace badhash
