#include "badhash/codes.hpp"

#include "badhash/error.hpp"

#include <array>
#include <bit>
#include <fstream>

namespace badhash {

namespace {

constexpr std::array<char, 4> kDumpMagic{'B', 'H', 'C', 'D'};

template <typename T>
void put_le(std::ostream& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(std::istream& in) {
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw FormatError("code dump: truncated header");
        value |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(value);
}

} // namespace

BipolarCode::BipolarCode(std::vector<std::int8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
        if (b != 1 && b != -1) throw DomainError("bipolar code entries must be -1 or +1");
    }
}

BipolarCode BipolarCode::from_signs(std::span<const float> relaxed) { return binarize(relaxed); }

std::vector<float> BipolarCode::as_reals() const { return {bits_.begin(), bits_.end()}; }

int BipolarCode::dot(const BipolarCode& other) const {
    if (other.size() != size()) throw ShapeError("code length mismatch");
    int acc = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) acc += bits_[i] * other.bits_[i];
    return acc;
}

BipolarCode binarize(std::span<const float> relaxed) {
    std::vector<std::int8_t> bits(relaxed.size());
    for (std::size_t i = 0; i < relaxed.size(); ++i) bits[i] = relaxed[i] > 0.0f ? 1 : -1;
    return BipolarCode(std::move(bits));
}

int hamming_distance(const BipolarCode& a, const BipolarCode& b) {
    if (a.size() != b.size()) throw ShapeError("hamming_distance: code length mismatch");
    return (static_cast<int>(a.size()) - a.dot(b)) / 2;
}

void write_code_dump(const std::filesystem::path& path, std::span<const BipolarCode> codes) {
    const std::uint32_t k = codes.empty() ? 0 : static_cast<std::uint32_t>(codes.front().size());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot open " + path.string() + " for writing");
    out.write(kDumpMagic.data(), kDumpMagic.size());
    put_le<std::uint32_t>(out, k);
    put_le<std::uint64_t>(out, codes.size());
    std::vector<char> record((k + 7) / 8);
    for (const auto& code : codes) {
        if (code.size() != k) throw ShapeError("code dump: mixed code lengths");
        std::fill(record.begin(), record.end(), 0);
        for (std::size_t j = 0; j < k; ++j) {
            if (code[j] > 0) record[j / 8] = static_cast<char>(record[j / 8] | (1 << (j % 8)));
        }
        out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
    if (!out) throw LoadError("write failed: " + path.string());
}

std::vector<BipolarCode> read_code_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kDumpMagic) throw FormatError("code dump: bad magic in " + path.string());
    const auto k = get_le<std::uint32_t>(in);
    const auto count = get_le<std::uint64_t>(in);
    std::vector<BipolarCode> codes;
    codes.reserve(count);
    std::vector<char> record((k + 7) / 8);
    for (std::uint64_t i = 0; i < count; ++i) {
        in.read(record.data(), static_cast<std::streamsize>(record.size()));
        if (!in) throw FormatError("code dump: truncated payload in " + path.string());
        std::vector<std::int8_t> bits(k);
        for (std::size_t j = 0; j < k; ++j) bits[j] = (record[j / 8] >> (j % 8)) & 1 ? 1 : -1;
        codes.emplace_back(std::move(bits));
    }
    return codes;
}

} // namespace badhash
