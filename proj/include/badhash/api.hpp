#pragma once

// Torch-free entry points for language bindings.

#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace badhash::api {

using Code = std::vector<int>;
using Label = std::vector<int>;

int hamming_distance(const Code& a, const Code& b);
Code binarize(const std::vector<float>& relaxed);

double average_precision(const std::vector<int>& relevances, std::size_t k);
double mean_average_precision(const std::vector<Code>& queries, const std::vector<Label>& query_labels,
                              const std::vector<Code>& database, const std::vector<Label>& database_labels,
                              std::size_t topk);
double t_map(const std::vector<Code>& queries, std::size_t target_label, const std::vector<Code>& database,
             const std::vector<Label>& database_labels, std::size_t topk);
// (database_id, distance) pairs of the top k.
std::vector<std::pair<std::size_t, int>> rank(const Code& query, const std::vector<Code>& database, std::size_t k);

std::vector<Code> hadamard_centers(std::size_t classes, int code_length, std::uint64_t seed);
std::vector<double> smooth_label(std::size_t source_class, std::size_t class_count, double epsilon);

// Images as flat channel-first float buffers in [0, 1] with their shape.
struct ImagePairMetrics {
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};
ImagePairMetrics image_metrics(const std::vector<float>& a, const std::vector<float>& b,
                               const std::vector<std::int64_t>& shape);
double psnr_from_mse(double mse);

void write_code_dump(const std::string& path, const std::vector<Code>& codes);
std::vector<Code> read_code_dump(const std::string& path);

void make_desk_dataset(const std::string& dir, std::size_t classes, std::size_t first_family, std::size_t per_class,
                       int side, std::uint64_t seed);

// Resolved config as JSON text; throws on invalid configs.
std::string load_config(const std::string& path, std::optional<std::uint64_t> seed,
                        const std::optional<std::string>& out, const std::vector<std::string>& overrides);
// Each returns the written summary as JSON text.
std::string run_pipeline(const std::string& config_path, std::optional<std::uint64_t> seed,
                         const std::optional<std::string>& out, const std::vector<std::string>& overrides);
std::string run_comparison(const std::string& config_path, std::optional<std::uint64_t> seed,
                           const std::optional<std::string>& out, const std::vector<std::string>& overrides);

// Exit-code category of the exception currently being handled: 2 for
// config errors, 3 for everything else.
int error_category(const std::exception& e);

} // namespace badhash::api
