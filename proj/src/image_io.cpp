#include "badhash/image_io.hpp"

#include "badhash/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace badhash {

torch::Tensor read_image(const std::filesystem::path& path) {
    cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw LoadError("cannot decode image " + path.string());
    double scale = 1.0;
    switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw FormatError("unsupported pixel depth in " + path.string());
    }
    cv::Mat rgb;
    switch (raw.channels()) {
    case 1: rgb = raw; break;
    case 3: cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw FormatError("unsupported channel count in " + path.string());
    }
    cv::Mat as_float;
    rgb.convertTo(as_float, CV_32F, scale);
    auto hwc = torch::from_blob(as_float.data, {as_float.rows, as_float.cols, as_float.channels()}, torch::kFloat32);
    return hwc.permute({2, 0, 1}).contiguous().clone();
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image, int bit_depth) {
    if (image.dim() != 3) throw ShapeError("write_png expects [C, H, W]");
    if (bit_depth != 8 && bit_depth != 16) throw DomainError("write_png: bit depth must be 8 or 16");
    const double max_value = bit_depth == 8 ? 255.0 : 65535.0;
    auto hwc = image.detach().to(torch::kCPU, torch::kFloat64).clamp(0.0, 1.0).mul(max_value).round();
    hwc = hwc.permute({1, 2, 0}).contiguous().to(bit_depth == 8 ? torch::kUInt8 : torch::kInt32);
    const int channels = static_cast<int>(hwc.size(2));
    const int rows = static_cast<int>(hwc.size(0));
    const int cols = static_cast<int>(hwc.size(1));
    cv::Mat mat;
    if (bit_depth == 8) {
        mat = cv::Mat(rows, cols, CV_8UC(channels), hwc.data_ptr<std::uint8_t>()).clone();
    } else {
        cv::Mat wide(rows, cols, CV_32SC(channels), hwc.data_ptr<std::int32_t>());
        wide.convertTo(mat, CV_16U);
    }
    if (channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) throw LoadError("cannot write " + path.string());
}

} // namespace badhash
