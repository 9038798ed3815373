#include "badhash/desk_dataset.hpp"

#include "badhash/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace badhash {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, kDeskShapeFamilies> kFamilies{
    "disk",      "ring",     "square",  "frame",    "triangle", "plus",   "cross",      "stripes",
    "twin_dots", "half_disk", "outline_triangle", "star", "dot_row", "crescent", "checker"};

constexpr int kSupersample = 4;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    double normal() {
        // Box-Muller keeps the stream independent of the standard library's
        // distribution implementation.
        const double u1 = std::max(unit(), 1e-300);
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

double luminance(const cv::Vec3d& c) { return 0.299 * c[2] + 0.587 * c[1] + 0.114 * c[0]; }

cv::Vec3d random_color(Rng& rng) { return {rng.unit(), rng.unit(), rng.unit()}; }

std::vector<cv::Point> polygon(cv::Point2d center, double radius, double angle, const std::vector<double>& radii) {
    std::vector<cv::Point> pts;
    const auto n = radii.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = angle + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        pts.emplace_back(static_cast<int>(std::lround(center.x + radius * radii[i] * std::cos(a))),
                         static_cast<int>(std::lround(center.y + radius * radii[i] * std::sin(a))));
    }
    return pts;
}

cv::Point2d rotate(cv::Point2d v, double angle) {
    return {v.x * std::cos(angle) - v.y * std::sin(angle), v.x * std::sin(angle) + v.y * std::cos(angle)};
}

cv::Point as_point(cv::Point2d p) { return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))}; }

void fill_bar(cv::Mat& canvas, cv::Point2d center, double half_len, double half_width, double angle,
              const cv::Scalar& color) {
    std::vector<cv::Point2d> corners{{-half_len, -half_width}, {half_len, -half_width}, {half_len, half_width}, {-half_len, half_width}};
    std::vector<cv::Point> pts;
    for (const auto& c : corners) pts.push_back(as_point(center + rotate(c, angle)));
    cv::fillConvexPoly(canvas, pts, color, cv::LINE_AA);
}

void draw_family(cv::Mat& canvas, std::size_t family, cv::Point2d c, double r, double angle, const cv::Scalar& fg,
                 const cv::Scalar& bg) {
    const int thick = std::max(2, static_cast<int>(r / 3.5));
    switch (family) {
    case 0: cv::circle(canvas, as_point(c), static_cast<int>(r), fg, cv::FILLED, cv::LINE_AA); break;
    case 1: cv::circle(canvas, as_point(c), static_cast<int>(r - thick / 2), fg, thick, cv::LINE_AA); break;
    case 2: cv::fillConvexPoly(canvas, polygon(c, r, angle, {1, 1, 1, 1}), fg, cv::LINE_AA); break;
    case 3: cv::polylines(canvas, std::vector<std::vector<cv::Point>>{polygon(c, r - thick / 2.0, angle, {1, 1, 1, 1})}, true, fg, thick, cv::LINE_AA); break;
    case 4: cv::fillConvexPoly(canvas, polygon(c, r, angle, {1, 1, 1}), fg, cv::LINE_AA); break;
    case 5:
    case 6: {
        const double base = family == 5 ? 0.0 : std::numbers::pi / 4.0;
        const double a = base + (angle - std::numbers::pi) / 12.0;
        fill_bar(canvas, c, r, r / 4.5, a, fg);
        fill_bar(canvas, c, r, r / 4.5, a + std::numbers::pi / 2.0, fg);
        break;
    }
    case 7:
        for (int k = -1; k <= 1; ++k) fill_bar(canvas, c + rotate({0.0, k * r * 0.66}, angle), r, r / 6.0, angle, fg);
        break;
    case 8:
        for (int k : {-1, 1}) cv::circle(canvas, as_point(c + rotate({k * r * 0.55, 0.0}, angle)), static_cast<int>(r * 0.42), fg, cv::FILLED, cv::LINE_AA);
        break;
    case 9: {
        const double deg = angle * 180.0 / std::numbers::pi;
        cv::ellipse(canvas, as_point(c), cv::Size(static_cast<int>(r), static_cast<int>(r)), deg, 0, 180, fg, cv::FILLED, cv::LINE_AA);
        break;
    }
    case 10: cv::polylines(canvas, std::vector<std::vector<cv::Point>>{polygon(c, r - thick / 2.0, angle, {1, 1, 1})}, true, fg, thick, cv::LINE_AA); break;
    case 11: cv::fillPoly(canvas, std::vector<std::vector<cv::Point>>{polygon(c, r, angle, {1, 0.42, 1, 0.42, 1, 0.42, 1, 0.42, 1, 0.42})}, fg, cv::LINE_AA); break;
    case 12:
        for (int k = -1; k <= 1; ++k) cv::circle(canvas, as_point(c + rotate({k * r * 0.7, 0.0}, angle)), static_cast<int>(r * 0.3), fg, cv::FILLED, cv::LINE_AA);
        break;
    case 13:
        cv::circle(canvas, as_point(c), static_cast<int>(r), fg, cv::FILLED, cv::LINE_AA);
        cv::circle(canvas, as_point(c + rotate({r * 0.45, 0.0}, angle)), static_cast<int>(r * 0.8), bg, cv::FILLED, cv::LINE_AA);
        break;
    case 14: {
        const double cell = 2.0 * r / 3.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if ((i + j) % 2 != 0) continue;
                const cv::Point2d offset{(i - 1) * cell, (j - 1) * cell};
                fill_bar(canvas, c + rotate(offset, angle), cell / 2.0, cell / 2.0, angle, fg);
            }
        }
        break;
    }
    default: throw DomainError("unknown shape family");
    }
}

cv::Mat render(std::size_t family, int side, Rng& rng) {
    const int big = side * kSupersample;

    // Background: two-color gradient plus low-frequency blotches.
    const auto c1 = random_color(rng);
    const auto c2 = random_color(rng);
    const double grad_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    cv::Mat blotch(6, 6, CV_64FC3);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) blotch.at<cv::Vec3d>(i, j) = {rng.normal() * 0.08, rng.normal() * 0.08, rng.normal() * 0.08};
    }
    cv::Mat blotch_big;
    cv::resize(blotch, blotch_big, cv::Size(big, big), 0, 0, cv::INTER_CUBIC);
    cv::Mat canvas(big, big, CV_64FC3);
    for (int y = 0; y < big; ++y) {
        for (int x = 0; x < big; ++x) {
            const double u = ((x - big / 2.0) * std::cos(grad_angle) + (y - big / 2.0) * std::sin(grad_angle)) / big + 0.5;
            const double t = std::clamp(u, 0.0, 1.0);
            canvas.at<cv::Vec3d>(y, x) = c1 * (1.0 - t) + c2 * t + blotch_big.at<cv::Vec3d>(y, x);
        }
    }
    const cv::Vec3d bg_mean = (c1 + c2) * 0.5;

    // Foreground color with enough luminance contrast against the background.
    cv::Vec3d fg = random_color(rng);
    for (int attempt = 0; attempt < 16 && std::abs(luminance(fg) - luminance(bg_mean)) < 0.3; ++attempt) fg = random_color(rng);
    if (std::abs(luminance(fg) - luminance(bg_mean)) < 0.3) fg = luminance(bg_mean) > 0.5 ? cv::Vec3d{0.05, 0.05, 0.05} : cv::Vec3d{0.95, 0.95, 0.95};

    const double radius = rng.uniform(0.30, 0.42) * big;
    const cv::Point2d center{big / 2.0 + rng.uniform(-0.12, 0.12) * big, big / 2.0 + rng.uniform(-0.12, 0.12) * big};
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Antialiased drawing needs an 8-bit canvas; supersampling hides the
    // quantization after the downscale.
    cv::Mat canvas8;
    canvas.convertTo(canvas8, CV_8UC3, 255.0);
    draw_family(canvas8, family, center, radius, angle, cv::Scalar(fg[0], fg[1], fg[2]) * 255.0,
                cv::Scalar(bg_mean[0], bg_mean[1], bg_mean[2]) * 255.0);
    canvas8.convertTo(canvas, CV_64FC3, 1.0 / 255.0);

    cv::Mat small;
    cv::resize(canvas, small, cv::Size(side, side), 0, 0, cv::INTER_AREA);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            auto& px = small.at<cv::Vec3d>(y, x);
            for (int ch = 0; ch < 3; ++ch) px[ch] = std::clamp(px[ch] + rng.normal() * 0.03, 0.0, 1.0);
        }
    }
    cv::Mat out;
    small.convertTo(out, CV_8UC3, 255.0);
    return out;
}

} // namespace

std::string desk_family_name(std::size_t family) {
    if (family >= kFamilies.size()) throw DomainError("unknown shape family");
    return kFamilies[family];
}

void write_desk_dataset(const fs::path& dir, const DeskDatasetOptions& options) {
    if (options.classes == 0 || options.first_family + options.classes > kDeskShapeFamilies) {
        throw DomainError("desk dataset supports at most " + std::to_string(kDeskShapeFamilies) + " shape families");
    }
    if (options.side < 8) throw DomainError("desk dataset side must be at least 8");
    fs::create_directories(dir);
    std::ofstream labels(dir / "labels.tsv");
    if (!labels) throw LoadError("cannot write " + (dir / "labels.tsv").string());
    for (std::size_t k = 0; k < options.classes; ++k) {
        const auto family = options.first_family + k;
        const auto name = desk_family_name(family);
        fs::create_directories(dir / name);
        Rng rng(options.seed * 1000003ull + family * 7919ull + 17ull);
        for (std::size_t i = 0; i < options.per_class; ++i) {
            std::ostringstream file;
            file << name << "_" << std::setw(4) << std::setfill('0') << i << ".png";
            const auto rel = fs::path(name) / file.str();
            if (!cv::imwrite((dir / rel).string(), render(family, options.side, rng))) {
                throw LoadError("cannot write " + (dir / rel).string());
            }
            labels << rel.string() << "\t";
            for (std::size_t c = 0; c < options.classes; ++c) labels << (c ? "," : "") << (c == k ? 1 : 0);
            labels << "\n";
        }
    }
}

} // namespace badhash
