#include "badhash/torch_util.hpp"

#include "badhash/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace badhash {

std::filesystem::path path_with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
    return std::filesystem::path(stem.string() + suffix);
}

void save_module(const torch::nn::Module& module, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    torch::serialize::OutputArchive archive;
    module.save(archive);
    try {
        archive.save_to(path.string());
    } catch (const c10::Error& e) {
        throw LoadError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

void load_module(torch::nn::Module& module, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
        module.load(archive);
    } catch (const c10::Error& e) {
        throw FormatError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

torch::Dtype parameter_dtype(const torch::nn::Module& module) {
    const auto params = module.parameters();
    return params.empty() ? torch::kFloat32 : params.front().scalar_type();
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

void require_finite(const torch::Tensor& value, const std::string& what, const std::string& context) {
    if (!torch::isfinite(value).all().item<bool>()) {
        throw TrainingError(what + " became non-finite (" + context + ")");
    }
}

void configure_deterministic_backend() {
    at::globalContext().setDeterministicAlgorithms(true, false);
}

} // namespace badhash
