#pragma once

#include <filesystem>
#include <iosfwd>

#include "hybrid/grid.hpp"

namespace hybrid {

// Human-readable state checkpoint: "key = value" header lines describing the
// grid, then a CSV table with columns i,j,q,x,P,S (one row per cell).

void write_checkpoint(std::ostream& os, const HybridState& state);
HybridState read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const HybridState& state);
HybridState load_checkpoint(const std::filesystem::path& path);

}  // namespace hybrid
