#pragma once

#include <cstdint>
#include <vector>

#include "gpfuse/types.hpp"

namespace gpfuse {

/// One seeded realization of the phenomenon on a regular grid: the latent
/// (noise-free) surface and the measured values (latent + observation noise).
struct FieldSample {
    int width = 0;
    int height = 0;
    std::vector<Location> cells;  // centres (i+0.5, j+0.5), row-major by j
    Eigen::VectorXd latent;
    Eigen::VectorXd measured;

    int cell_index(int i, int j) const { return j * width + i; }
    int n_cells() const { return width * height; }

    /// Index of the grid cell containing (or nearest to) a location.
    int snap(const Location& x) const;

    Dataset as_dataset() const;
};

/// Exact draw from the zero-mean GP on a width x height grid (<= 4096 cells),
/// deterministic per seed. Observation noise is added per cell on top of the
/// latent draw.
FieldSample generate_gp_field(std::uint64_t seed, int grid_w, int grid_h,
                              const Hyperparams& h);

} // namespace gpfuse
