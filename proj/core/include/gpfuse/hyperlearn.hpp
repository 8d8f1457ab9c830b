#pragma once

#include <span>
#include <vector>

#include "gpfuse/summary.hpp"

namespace gpfuse {

/// Data of one local area, blocked per agent, with the area's support set.
struct AreaData {
    std::vector<Dataset> blocks;
    SupportSet support;
};

/// Xi = Phi_DD|S + blockdiag[Sigma_DD|S] + sigma_n^2 I and the two pieces of
/// the log-marginal likelihood computed from it.
struct LogMarginalWorkspace {
    Eigen::MatrixXd xi;
    double log_det = 0.0;
    double quad_form = 0.0;
    int n_obs = 0;

    double value() const;
};

LogMarginalWorkspace log_marginal_workspace(std::span<const Dataset> blocks,
                                            const SupportSet& s, const Hyperparams& h);
double log_marginal_area(std::span<const Dataset> blocks, const SupportSet& s,
                         const Hyperparams& h);

struct OptimizerConfig {
    int max_iters = 500;
    double grad_tol = 1e-5;       // infinity norm on the log-parameter gradient
    int max_backtracks = 30;
    double fd_step_rel = 1e-5;    // central-difference step, relative
    double initial_step = 0.1;
    double armijo_c = 1e-4;
    double signal_lo = 1e-6, signal_hi = 1e6;
    double noise_lo = 1e-6, noise_hi = 1e2;
    double ell_lo_rel = 1e-3, ell_hi_rel = 1e3; // times the domain width
    double domain_width = 0.0;                  // 0: infer from the data extent
};

/// Thrown when the objective turns non-finite; carries the last usable point.
class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& msg, Hyperparams last)
        : NumericError(msg), last_valid(std::move(last)) {}
    Hyperparams last_valid;
};

/// Sum of per-area log-marginal likelihoods over the full-parameter vector
/// (log sigma_s^2, log sigma_n^2, log ell_1..d), maximized by projected
/// gradient ascent with an Armijo backtracking line search. Gradients are
/// central finite differences.
Hyperparams learn_hyperparams(std::span<const AreaData> areas, const Hyperparams& init,
                              const OptimizerConfig& cfg = {});

/// The objective the optimizer climbs, exposed for tests and diagnostics.
double hyperlearn_objective(std::span<const AreaData> areas, const Hyperparams& h);

} // namespace gpfuse
