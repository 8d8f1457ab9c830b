#pragma once

#include <span>
#include <vector>

#include "gpfuse/summary.hpp"

namespace gpfuse {

/// Re-express a prior summary on a new support set (the linear low-rank map).
PriorSummary transfer_prior(const PriorSummary& p, const SupportSet& s_old,
                            const SupportSet& s_new, const Hyperparams& h);

/// Composite local-summary transfer: local -> prior -> new support -> local.
LocalSummary transfer_local(const LocalSummary& l, const SupportSet& s_old,
                            const SupportSet& s_new, const Hyperparams& h);

/// Nearest-support-point clustering in the length-scale metric.
struct ClusterAssignment {
    std::vector<int> assignment;             // point index -> support index
    std::vector<std::vector<int>> members;   // support index -> point indices
    std::vector<double> sqdist;              // ||Lambda^-1 (x - c(x))||^2 per point

    int max_cluster_size() const;
    double mean_sqdist() const;              // epsilon term
};
ClusterAssignment cluster_assign(std::span<const Location> points, const SupportSet& s,
                                 const Hyperparams& h);

/// Actual Frobenius loss of the low-rank cross-covariance approximation and
/// its closed-form upper bound.
struct LossBoundReport {
    double actual_loss = 0.0;
    double bound = 0.0;
    int t = 0;        // max cluster size among data locations
    int t_prime = 0;  // max cluster size among new support points
    double eps_s_prime = 0.0;
    double eps_d = 0.0;
    double sigma_ss_inv_fnorm = 0.0;
};
LossBoundReport loss_bound(const SupportSet& s_old, const SupportSet& s_new,
                           std::span<const Location> data_locs, const Hyperparams& h);

} // namespace gpfuse
