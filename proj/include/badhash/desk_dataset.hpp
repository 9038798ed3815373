#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace badhash {

// Procedural shape dataset used for desk-scale experiments. Each class is a
// shape family drawn with random color, position, scale and rotation over a
// textured background, so classes cannot be separated by color alone.
struct DeskDatasetOptions {
    std::size_t classes = 10;
    // Index of the first shape family; open-set data uses families the
    // in-distribution set never contains.
    std::size_t first_family = 0;
    std::size_t per_class = 500;
    int side = 32;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kDeskShapeFamilies = 15;

// Writes <dir>/<family>/<family>_NNNN.png and <dir>/labels.tsv. Output is a
// pure function of the options.
void write_desk_dataset(const std::filesystem::path& dir, const DeskDatasetOptions& options);

std::string desk_family_name(std::size_t family);

} // namespace badhash
