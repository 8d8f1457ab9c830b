#pragma once

#include <span>

#include <Eigen/Cholesky>

#include "gpfuse/types.hpp"

namespace gpfuse {

/// Relative jitter always added to support covariance diagonals, and the
/// ceiling the escalation ladder stops at (both scaled by signal_var).
inline constexpr double kBaseJitter = 1e-8;
inline constexpr double kMaxJitter = 1e-4;

enum class NoiseMode { none, diagonal };

/// Squared-exponential covariance of two inputs. `same_observation` asserts
/// that both arguments refer to the same observation index, which is the only
/// case where the noise variance enters.
double se_cov(const Location& x, const Location& x2, const Hyperparams& h,
              bool same_observation = false);

/// Pairwise covariance matrix. NoiseMode::diagonal adds noise_var to the
/// diagonal and requires A and B to be the same ordered list.
Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const Hyperparams& h, NoiseMode noise = NoiseMode::none);

/// Noise-free covariance of a support set with the base jitter applied.
Eigen::MatrixXd support_cov(std::span<const Location> s, const Hyperparams& h);

/// Cholesky factorization with an escalating-jitter ladder. `scale` sets the
/// jitter unit (signal_var); `extra_base` skips the plain attempt and starts
/// at that jitter (already applied by the caller counts as zero here).
struct SpdFactor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter_added = 0.0; // on top of whatever the caller baked in
};
SpdFactor factor_spd(Eigen::MatrixXd m, double scale, const char* what);

/// Exact full-GP posterior at one query; the ground-truth oracle.
PredictiveDistribution full_gp_predict(const Location& x, const Dataset& data,
                                       const Hyperparams& h);

namespace detail {
/// Scaled squared distance ||Lambda^-1 (x - y)||^2.
double scaled_sqdist(const Location& x, const Location& y, const Hyperparams& h);
/// Clamp a variance into [0, upper], rejecting values below -1e-9.
double clamp_variance(double v, double upper);
} // namespace detail

} // namespace gpfuse
