#include "badhash/perceptual.hpp"

#include "badhash/error.hpp"

#include <array>

namespace badhash {

namespace {

constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

int window_for(std::int64_t min_side) {
    if (min_side >= kWindow) return kWindow;
    return static_cast<int>(min_side % 2 == 1 ? min_side : min_side - 1);
}

struct SsimTerms {
    torch::Tensor luminance_cs; // full SSIM, [B]
    torch::Tensor cs;           // contrast-structure only, [B]
};

SsimTerms ssim_terms(const torch::Tensor& x, const torch::Tensor& y) {
    if (x.sizes() != y.sizes() || x.dim() != 4) throw ShapeError("ssim expects two [B, C, H, W] batches of equal shape");
    const auto channels = x.size(1);
    const int window = window_for(std::min(x.size(2), x.size(3)));
    if (window < 1) throw ShapeError("ssim: empty image");
    auto g = torch::arange(window, x.options()) - static_cast<double>(window - 1) / 2.0;
    g = torch::exp(-(g * g) / (2.0 * kSigma * kSigma));
    g = g / g.sum();
    const auto row = g.view({1, 1, 1, window}).expand({channels, 1, 1, window}).contiguous();
    const auto col = g.view({1, 1, window, 1}).expand({channels, 1, window, 1}).contiguous();
    const auto blur = [&](const torch::Tensor& t) {
        const auto opts = torch::nn::functional::Conv2dFuncOptions().groups(channels);
        return torch::nn::functional::conv2d(torch::nn::functional::conv2d(t, row, opts), col, opts);
    };
    const auto mu_x = blur(x);
    const auto mu_y = blur(y);
    const auto var_x = blur(x * x) - mu_x * mu_x;
    const auto var_y = blur(y * y) - mu_y * mu_y;
    const auto cov = blur(x * y) - mu_x * mu_y;
    const auto cs_map = (2.0 * cov + kC2) / (var_x + var_y + kC2);
    const auto l_map = (2.0 * mu_x * mu_y + kC1) / (mu_x * mu_x + mu_y * mu_y + kC1);
    return {(l_map * cs_map).mean({1, 2, 3}), cs_map.mean({1, 2, 3})};
}

} // namespace

torch::Tensor ssim_batch(const torch::Tensor& a, const torch::Tensor& b) { return ssim_terms(a, b).luminance_cs; }

torch::Tensor ms_ssim_distance(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes() || a.dim() != 4) throw ShapeError("ms_ssim expects two [B, C, H, W] batches of equal shape");
    std::int64_t side = std::min(a.size(2), a.size(3));
    std::size_t levels = 1;
    while (levels < kMsSsimWeights.size() && side / 2 >= kWindow) {
        side /= 2;
        ++levels;
    }
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < levels; ++i) weight_sum += kMsSsimWeights[i];

    auto x = a;
    auto y = b;
    auto score = torch::ones({a.size(0)}, a.options());
    for (std::size_t level = 0; level < levels; ++level) {
        const auto terms = ssim_terms(x, y);
        const double w = kMsSsimWeights[level] / weight_sum;
        // Floor keeps fractional powers differentiable; identical inputs give 1 exactly.
        const auto& term = level + 1 == levels ? terms.luminance_cs : terms.cs;
        score = score * term.clamp_min(1e-6).pow(w);
        if (level + 1 < levels) {
            x = torch::avg_pool2d(x, 2);
            y = torch::avg_pool2d(y, 2);
        }
    }
    return 1.0 - score;
}

torch::Tensor feature_distance(HashModel& feature_net, const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes() || a.dim() != 4) throw ShapeError("feature_distance expects two equal [B, C, H, W] batches");
    feature_net.net->eval();
    const auto fa = feature_net.net->stage_activations(a);
    const auto fb = feature_net.net->stage_activations(b);
    auto total = torch::zeros({a.size(0)}, a.options());
    for (std::size_t s = 0; s < fa.size(); ++s) {
        const auto na = fa[s] / (fa[s].pow(2).sum(1, true).sqrt() + 1e-10);
        const auto nb = fb[s] / (fb[s].pow(2).sum(1, true).sqrt() + 1e-10);
        total = total + (na - nb).pow(2).sum(1).mean({1, 2});
    }
    return total;
}

std::string to_string(PerceptualKind kind) { return kind == PerceptualKind::MsSsim ? "ms-ssim" : "feature"; }

PerceptualKind parse_perceptual_kind(const std::string& name) {
    if (name == "ms-ssim") return PerceptualKind::MsSsim;
    if (name == "feature" || name == "lpips") return PerceptualKind::Feature;
    throw ConfigError("unknown perceptual distance '" + name + "'");
}

PerceptualDistance::PerceptualDistance(PerceptualKind kind, HashModel* feature_net)
    : kind_(kind), feature_net_(feature_net) {
    if (kind_ == PerceptualKind::Feature && feature_net_ == nullptr) {
        throw ConfigError("feature perceptual distance needs a pretrained feature network");
    }
}

torch::Tensor PerceptualDistance::operator()(const torch::Tensor& a, const torch::Tensor& b) const {
    return kind_ == PerceptualKind::MsSsim ? ms_ssim_distance(a, b) : feature_distance(*feature_net_, a, b);
}

} // namespace badhash
