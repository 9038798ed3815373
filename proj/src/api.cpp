#include "badhash/api.hpp"

#include "badhash/codes.hpp"
#include "badhash/desk_dataset.hpp"
#include "badhash/error.hpp"
#include "badhash/experiment.hpp"
#include "badhash/hash_training.hpp"
#include "badhash/labcln.hpp"
#include "badhash/retrieval.hpp"
#include "badhash/stealth.hpp"
#include "badhash/torch_util.hpp"

#include <fstream>

namespace badhash::api {

namespace {

BipolarCode to_code(const Code& c) {
    std::vector<std::int8_t> bits(c.begin(), c.end());
    return BipolarCode(std::move(bits));
}

std::vector<BipolarCode> to_codes(const std::vector<Code>& cs) {
    std::vector<BipolarCode> out;
    out.reserve(cs.size());
    for (const auto& c : cs) out.push_back(to_code(c));
    return out;
}

Code from_code(const BipolarCode& c) { return Code(c.bits().begin(), c.bits().end()); }

std::vector<LabelVector> to_labels(const std::vector<Label>& ls) {
    std::vector<LabelVector> out;
    for (const auto& l : ls) {
        LabelVector v;
        for (auto x : l) {
            if (x != 0 && x != 1) throw DomainError("label entries must be 0 or 1");
            v.push_back(static_cast<std::uint8_t>(x));
        }
        out.push_back(std::move(v));
    }
    return out;
}

torch::Tensor to_image(const std::vector<float>& data, const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto s : shape) n *= s;
    if (shape.size() != 3 || n != static_cast<std::int64_t>(data.size())) throw ShapeError("image buffer does not match [C, H, W]");
    return torch::tensor(data, torch::kFloat32).view(shape);
}

ConfigOverrides overrides_of(std::optional<std::uint64_t> seed, const std::optional<std::string>& out,
                             const std::vector<std::string>& assignments) {
    ConfigOverrides o;
    o.seed = seed;
    if (out) o.output_dir = *out;
    o.assignments = assignments;
    return o;
}

} // namespace

int hamming_distance(const Code& a, const Code& b) { return badhash::hamming_distance(to_code(a), to_code(b)); }

Code binarize(const std::vector<float>& relaxed) { return from_code(badhash::binarize(std::span<const float>(relaxed))); }

double average_precision(const std::vector<int>& relevances, std::size_t k) {
    std::vector<std::uint8_t> r(relevances.begin(), relevances.end());
    return badhash::average_precision(r, k);
}

double mean_average_precision(const std::vector<Code>& queries, const std::vector<Label>& query_labels,
                              const std::vector<Code>& database, const std::vector<Label>& database_labels,
                              std::size_t topk) {
    return badhash::mean_average_precision(to_codes(queries), to_labels(query_labels), to_codes(database),
                                           to_labels(database_labels), topk);
}

double t_map(const std::vector<Code>& queries, std::size_t target_label, const std::vector<Code>& database,
             const std::vector<Label>& database_labels, std::size_t topk) {
    return badhash::t_map(to_codes(queries), target_label, to_codes(database), to_labels(database_labels), topk);
}

std::vector<std::pair<std::size_t, int>> rank(const Code& query, const std::vector<Code>& database, std::size_t k) {
    const auto r = badhash::rank(to_code(query), to_codes(database), k);
    std::vector<std::pair<std::size_t, int>> out;
    for (const auto& item : r.items) out.emplace_back(item.database_id, item.distance);
    return out;
}

std::vector<Code> hadamard_centers(std::size_t classes, int code_length, std::uint64_t seed) {
    std::vector<Code> out;
    for (const auto& c : badhash::hadamard_centers(classes, code_length, seed)) out.push_back(from_code(c));
    return out;
}

std::vector<double> smooth_label(std::size_t source_class, std::size_t class_count, double epsilon) {
    if (source_class >= class_count) throw DomainError("class index out of range");
    LabelVector l(class_count, 0);
    l[source_class] = 1;
    return badhash::smooth_label(l, epsilon).vector;
}

ImagePairMetrics image_metrics(const std::vector<float>& a, const std::vector<float>& b,
                               const std::vector<std::int64_t>& shape) {
    const auto r = stealth_report(to_image(a, shape), to_image(b, shape));
    return {r.mse, r.psnr, r.ssim};
}

double psnr_from_mse(double mse) { return badhash::psnr_from_mse(mse); }

void write_code_dump(const std::string& path, const std::vector<Code>& codes) {
    badhash::write_code_dump(path, to_codes(codes));
}

std::vector<Code> read_code_dump(const std::string& path) {
    std::vector<Code> out;
    for (const auto& c : badhash::read_code_dump(path)) out.push_back(from_code(c));
    return out;
}

void make_desk_dataset(const std::string& dir, std::size_t classes, std::size_t first_family, std::size_t per_class,
                       int side, std::uint64_t seed) {
    DeskDatasetOptions o;
    o.classes = classes;
    o.first_family = first_family;
    o.per_class = per_class;
    o.side = side;
    o.seed = seed;
    write_desk_dataset(dir, o);
}

std::string load_config(const std::string& path, std::optional<std::uint64_t> seed, const std::optional<std::string>& out,
                        const std::vector<std::string>& overrides) {
    return config_to_json(load_experiment_config(path, overrides_of(seed, out, overrides))).dump(2);
}

std::string run_pipeline(const std::string& config_path, std::optional<std::uint64_t> seed,
                         const std::optional<std::string>& out, const std::vector<std::string>& overrides) {
    const auto c = load_experiment_config(config_path, overrides_of(seed, out, overrides));
    badhash::run_pipeline(c);
    return read_json(c.output_dir / "summary.json").dump(2);
}

std::string run_comparison(const std::string& config_path, std::optional<std::uint64_t> seed,
                           const std::optional<std::string>& out, const std::vector<std::string>& overrides) {
    const auto c = load_experiment_config(config_path, overrides_of(seed, out, overrides));
    const auto rows = badhash::run_comparison(c);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"Method", r.method}, {"MAP", r.map}, {"t-MAP", r.t_map}, {"MSE", r.stealth.mse},
                     {"PSNR", r.stealth.psnr}, {"SSIM", r.stealth.ssim}});
    }
    return j.dump(2);
}

int error_category(const std::exception& e) { return dynamic_cast<const ConfigError*>(&e) ? 2 : 3; }

} // namespace badhash::api
