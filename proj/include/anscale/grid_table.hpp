#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anscale/core.hpp"

namespace anscale {

class PathGenerator;

/// Per-path quantities at each grid time, stored column-wise (one contiguous
/// column of n_paths values per grid point). Every ensemble statistic and
/// every bootstrap replicate is a reduction over these columns, so paths only
/// need to be visited once.
struct GridTable {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::vector<double> rs;  // R_t / S_t, NaN where S_t == 0
  std::vector<double> x;   // X_t
  std::vector<double> y;   // Y_t
  std::vector<double> z;   // Z_t

  std::span<const double> rs_column(std::size_t g) const { return col(rs, g); }
  std::span<const double> x_column(std::size_t g) const { return col(x, g); }
  std::span<const double> y_column(std::size_t g) const { return col(y, g); }
  std::span<const double> z_column(std::size_t g) const { return col(z, g); }

 private:
  std::span<const double> col(const std::vector<double>& v, std::size_t g) const {
    return {v.data() + g * n_paths, n_paths};
  }
};

/// R/S and partial sums of one path at each grid time, O(n + G log n).
struct PathGridRecord {
  std::vector<double> rs, x, y, z;
};
PathGridRecord path_grid_record(std::span<const double> increments, const TimeGrid& grid);

GridTable build_grid_table(const PathEnsemble& ensemble, const TimeGrid& grid,
                           std::size_t threads = 1);

/// Streams paths straight out of the generator; the ensemble is never held
/// in memory.
GridTable build_grid_table(const PathGenerator& generator, std::size_t n_paths,
                           const TimeGrid& grid, std::size_t threads = 1);

}  // namespace anscale
