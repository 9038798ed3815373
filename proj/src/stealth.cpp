#include "badhash/stealth.hpp"

#include "badhash/error.hpp"
#include "badhash/image_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace badhash {

namespace {

constexpr double kPeak = 255.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw ShapeError("image shapes differ");
    if (a.dim() != 3) throw ShapeError("expected a [C, H, W] image");
}

torch::Tensor gaussian_1d(int size, double sigma) {
    auto x = torch::arange(size, torch::kFloat64) - static_cast<double>(size - 1) / 2.0;
    auto g = torch::exp(-(x * x) / (2.0 * sigma * sigma));
    return g / g.sum();
}

} // namespace

double mse(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw ShapeError("mse: image shapes differ");
    const auto diff = (a.to(torch::kFloat64) - b.to(torch::kFloat64)) * kPeak;
    return diff.pow(2).mean().item<double>();
}

double psnr_from_mse(double mse_255) {
    if (mse_255 <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kPeak * kPeak / mse_255);
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
    check_pair(a, b);
    const auto channels = a.size(0);
    const auto min_side = std::min(a.size(1), a.size(2));
    int window = kSsimWindow;
    if (min_side < window) window = static_cast<int>(min_side % 2 == 1 ? min_side : min_side - 1);
    if (window < 1) throw ShapeError("ssim: empty image");

    const auto g = gaussian_1d(window, kSsimSigma);
    const auto row_kernel = g.view({1, 1, 1, window}).expand({channels, 1, 1, window}).contiguous();
    const auto col_kernel = g.view({1, 1, window, 1}).expand({channels, 1, window, 1}).contiguous();
    const auto blur = [&](const torch::Tensor& t) {
        const auto opts = torch::nn::functional::Conv2dFuncOptions().groups(channels);
        auto r = torch::nn::functional::conv2d(t.unsqueeze(0), row_kernel, opts);
        return torch::nn::functional::conv2d(r, col_kernel, opts).squeeze(0);
    };

    const auto x = a.to(torch::kFloat64) * kPeak;
    const auto y = b.to(torch::kFloat64) * kPeak;
    const double c1 = std::pow(0.01 * kPeak, 2);
    const double c2 = std::pow(0.03 * kPeak, 2);
    const auto mu_x = blur(x);
    const auto mu_y = blur(y);
    const auto var_x = blur(x * x) - mu_x * mu_x;
    const auto var_y = blur(y * y) - mu_y * mu_y;
    const auto cov = blur(x * y) - mu_x * mu_y;
    const auto map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) /
                     ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
    return map.mean({1, 2}).mean().item<double>();
}

torch::Tensor residual_map(const torch::Tensor& a, const torch::Tensor& b, double magnification) {
    if (a.sizes() != b.sizes()) throw ShapeError("residual_map: image shapes differ");
    if (!(magnification > 0.0)) throw DomainError("residual_map: magnification must be positive");
    const auto out_of_range = [](const torch::Tensor& t) {
        return (t < 0.0).any().item<bool>() || (t > 1.0).any().item<bool>();
    };
    if (out_of_range(a) || out_of_range(b)) throw DomainError("residual_map: pixels must lie in [0, 1]");
    return (magnification * (a - b).abs()).clamp(0.0, 1.0);
}

StealthReport stealth_report(const torch::Tensor& original, const torch::Tensor& poisoned) {
    StealthReport r;
    r.mse = mse(original, poisoned);
    r.psnr = psnr_from_mse(r.mse);
    r.ssim = ssim(original, poisoned);
    return r;
}

StealthSummary stealth_summary(const torch::Tensor& originals, const torch::Tensor& poisoned) {
    if (originals.sizes() != poisoned.sizes() || originals.dim() != 4) {
        throw ShapeError("stealth_summary expects two [N, C, H, W] batches of equal shape");
    }
    StealthSummary s;
    s.count = static_cast<std::size_t>(originals.size(0));
    if (s.count == 0) return s;
    double psnr_sum = 0.0;
    std::size_t psnr_count = 0;
    s.mean = {0.0, 0.0, 0.0};
    for (std::int64_t i = 0; i < originals.size(0); ++i) {
        const auto r = stealth_report(originals[i], poisoned[i]);
        s.mean.mse += r.mse;
        s.mean.ssim += r.ssim;
        if (std::isfinite(r.psnr)) {
            psnr_sum += r.psnr;
            ++psnr_count;
        }
    }
    s.mean.mse /= static_cast<double>(s.count);
    s.mean.ssim /= static_cast<double>(s.count);
    s.mean.psnr = psnr_count == 0 ? std::numeric_limits<double>::infinity()
                                  : psnr_sum / static_cast<double>(psnr_count);
    return s;
}

StealthSummary evaluate_pair_manifest(const std::filesystem::path& manifest,
                                      const std::filesystem::path& out_csv) {
    std::ifstream in(manifest);
    if (!in) throw LoadError("cannot open manifest " + manifest.string());
    const auto base = manifest.parent_path();
    const auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };

    std::ofstream out(out_csv);
    if (!out) throw LoadError("cannot write " + out_csv.string());
    out << "original,poisoned,mse,psnr,ssim\n" << std::setprecision(10);

    StealthSummary s;
    s.mean = {0.0, 0.0, 0.0};
    double psnr_sum = 0.0;
    std::size_t psnr_count = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected two tab-separated paths");
        }
        const auto orig_path = line.substr(0, tab);
        const auto pois_path = line.substr(tab + 1);
        const auto r = stealth_report(read_image(resolve(orig_path)), read_image(resolve(pois_path)));
        out << orig_path << "," << pois_path << "," << r.mse << "," << r.psnr << "," << r.ssim << "\n";
        ++s.count;
        s.mean.mse += r.mse;
        s.mean.ssim += r.ssim;
        if (std::isfinite(r.psnr)) {
            psnr_sum += r.psnr;
            ++psnr_count;
        }
    }
    if (s.count == 0) throw FormatError("manifest has no image pairs: " + manifest.string());
    s.mean.mse /= static_cast<double>(s.count);
    s.mean.ssim /= static_cast<double>(s.count);
    s.mean.psnr = psnr_count == 0 ? std::numeric_limits<double>::infinity() : psnr_sum / static_cast<double>(psnr_count);
    out << "mean,," << s.mean.mse << "," << s.mean.psnr << "," << s.mean.ssim << "\n";
    out << "count,," << s.count << ",,\n";
    return s;
}

} // namespace badhash
