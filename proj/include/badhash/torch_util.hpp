#pragma once

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>

namespace badhash {

std::filesystem::path path_with_suffix(const std::filesystem::path& stem, const std::string& suffix);

void save_module(const torch::nn::Module& module, const std::filesystem::path& path);
void load_module(torch::nn::Module& module, const std::filesystem::path& path);

torch::Dtype parameter_dtype(const torch::nn::Module& module);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

// Throws TrainingError naming `what` and `context` when `value` is NaN/inf.
void require_finite(const torch::Tensor& value, const std::string& what, const std::string& context);

// Runs the deterministic CPU configuration used by all training loops.
void configure_deterministic_backend();

} // namespace badhash
