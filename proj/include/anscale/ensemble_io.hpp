#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "anscale/core.hpp"

namespace anscale {

/// Binary layout, all little-endian:
///   "ANSC" | u32 version | u64 n_paths | u64 n_steps | f64[n_paths*n_steps] row-major
///   | u64 byte length | UTF-8 JSON {"descriptor": ..., "master_seed": ...}
inline constexpr std::uint32_t kEnsembleFormatVersion = 1;

void write_ensemble_binary(std::ostream& out, const PathEnsemble& ensemble);
PathEnsemble read_ensemble_binary(std::istream& in);

/// One path per row, no header. Descriptor and seed are not carried.
void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble);
PathEnsemble read_ensemble_csv(std::istream& in);

void save_ensemble(const std::filesystem::path& path, const PathEnsemble& ensemble);
/// Dispatches on the leading magic bytes; anything else is parsed as CSV.
PathEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace anscale
