#pragma once

#include "badhash/hash_model.hpp"

#include <torch/torch.h>

#include <string>

namespace badhash {

// Differentiable SSIM on [B, C, H, W] batches in [0, 1]: Gaussian window
// (11 taps, sigma 1.5, shrunk to fit small images), valid region, averaged
// over channels. Returns [B].
torch::Tensor ssim_batch(const torch::Tensor& a, const torch::Tensor& b);

// 1 - MS-SSIM, using as many dyadic scales as keep the window inside the
// image (standard scale weights renormalized). Returns [B]; exactly 0 for
// identical inputs.
torch::Tensor ms_ssim_distance(const torch::Tensor& a, const torch::Tensor& b);

// Learned-feature distance: stage activations of a fixed pretrained
// network, unit-normalized along channels, squared differences averaged over
// space and summed over stages. Returns [B].
torch::Tensor feature_distance(HashModel& feature_net, const torch::Tensor& a, const torch::Tensor& b);

enum class PerceptualKind { MsSsim, Feature };

std::string to_string(PerceptualKind kind);
PerceptualKind parse_perceptual_kind(const std::string& name);

// The perceptual term of the reconstruction loss.
class PerceptualDistance {
public:
    PerceptualDistance() = default;
    // Feature mode needs a network; MsSsim ignores it.
    PerceptualDistance(PerceptualKind kind, HashModel* feature_net);

    torch::Tensor operator()(const torch::Tensor& a, const torch::Tensor& b) const;
    PerceptualKind kind() const noexcept { return kind_; }

private:
    PerceptualKind kind_ = PerceptualKind::MsSsim;
    HashModel* feature_net_ = nullptr;
};

} // namespace badhash
