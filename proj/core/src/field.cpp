#include "gpfuse/field.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "gpfuse/kernel.hpp"
#include "gpfuse/rng.hpp"

namespace gpfuse {

int FieldSample::snap(const Location& x) const {
    const int i = std::clamp(static_cast<int>(std::floor(x.coords[0])), 0, width - 1);
    const int j = std::clamp(static_cast<int>(std::floor(x.coords[1])), 0, height - 1);
    return cell_index(i, j);
}

Dataset FieldSample::as_dataset() const {
    Dataset d;
    d.locations = cells;
    d.values = measured;
    return d;
}

FieldSample generate_gp_field(std::uint64_t seed, int grid_w, int grid_h,
                              const Hyperparams& h) {
    if (grid_w <= 0 || grid_h <= 0)
        throw ArgumentError("generate_gp_field: grid dimensions must be positive");
    const int n = grid_w * grid_h;
    if (n > 4096)
        throw ArgumentError(
            "generate_gp_field: grid larger than 4096 cells; tile the domain and "
            "generate per tile instead");
    h.validate();

    FieldSample f;
    f.width = grid_w;
    f.height = grid_h;
    f.cells.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < grid_h; ++j)
        for (int i = 0; i < grid_w; ++i)
            f.cells.emplace_back(i + 0.5, j + 0.5);

    Eigen::MatrixXd k = cov_matrix(f.cells, f.cells, h, NoiseMode::none);
    // Smooth-kernel grids are numerically rank deficient; a pivoted LDL^T with
    // the roundoff-scale negative pivots clamped to zero still yields
    // G G^T = K to working precision. A pivot that is negative far beyond
    // roundoff means the input was not a covariance matrix at all.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    const double pivot_floor = -1e-8 * h.signal_var * n;
    if (ldlt.vectorD().minCoeff() < pivot_floor)
        throw NumericError("generate_gp_field: covariance matrix is indefinite");
    Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd g = ldlt.matrixL();
    g = ldlt.transpositionsP().transpose() * Eigen::MatrixXd(g * d.asDiagonal());

    Rng rng(mix64(seed) ^ 0x67704653ULL);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    f.latent = g * z;
    f.measured = f.latent;
    const double sn = std::sqrt(h.noise_var);
    for (int i = 0; i < n; ++i) f.measured[i] += sn * rng.normal();
    return f;
}

} // namespace gpfuse
