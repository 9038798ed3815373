#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace badhash {

// A K-entry hash code over {-1, +1}.
class BipolarCode {
public:
    BipolarCode() = default;
    // Throws DomainError if any entry is not exactly -1 or +1.
    explicit BipolarCode(std::vector<std::int8_t> bits);

    static BipolarCode from_signs(std::span<const float> relaxed);

    std::size_t size() const noexcept { return bits_.size(); }
    std::int8_t operator[](std::size_t i) const { return bits_[i]; }
    const std::vector<std::int8_t>& bits() const noexcept { return bits_; }
    std::vector<float> as_reals() const;

    int dot(const BipolarCode& other) const;

    friend bool operator==(const BipolarCode&, const BipolarCode&) = default;

private:
    std::vector<std::int8_t> bits_;
};

// sign(v) = +1 if v > 0, -1 otherwise (zero maps to -1).
BipolarCode binarize(std::span<const float> relaxed);

// (K - a.b) / 2. Throws ShapeError on length mismatch.
int hamming_distance(const BipolarCode& a, const BipolarCode& b);

// Code-dump file: "BHCD" magic, uint32 K, uint64 count (little endian), then
// one ceil(K/8)-byte record per code, bit j stored LSB-first in byte j/8,
// +1 -> 1 and -1 -> 0.
void write_code_dump(const std::filesystem::path& path, std::span<const BipolarCode> codes);
std::vector<BipolarCode> read_code_dump(const std::filesystem::path& path);

} // namespace badhash
