#include "gpfuse/hyperlearn.hpp"

#include <cmath>
#include <sstream>

namespace gpfuse {

double LogMarginalWorkspace::value() const {
    return -0.5 * (log_det + quad_form +
                   n_obs * 1.8378770664093454835606594728112); // log(2*pi)
}

LogMarginalWorkspace log_marginal_workspace(std::span<const Dataset> blocks,
                                            const SupportSet& s, const Hyperparams& h) {
    int total = 0;
    for (const Dataset& b : blocks) {
        b.validate();
        total += static_cast<int>(b.size());
    }
    if (total == 0) throw ArgumentError("log_marginal_area: no observations");

    std::vector<Location> all;
    all.reserve(static_cast<std::size_t>(total));
    Eigen::VectorXd y(total);
    for (const Dataset& b : blocks)
        for (std::size_t i = 0; i < b.size(); ++i) {
            y[static_cast<Eigen::Index>(all.size())] = b.values[static_cast<Eigen::Index>(i)];
            all.push_back(b.locations[i]);
        }

    SpdFactor fss = factor_spd(support_cov(s.points, h), h.signal_var, "hyperlearn Sigma_SS");
    const Eigen::MatrixXd ksd = cov_matrix(s.points, all, h);

    LogMarginalWorkspace ws;
    ws.n_obs = total;
    ws.xi = ksd.transpose() * fss.llt.solve(ksd); // Phi_DD|S, noise-free kernel
    int off = 0;
    for (const Dataset& b : blocks) {
        const int n = static_cast<int>(b.size());
        if (n > 0)
            // blockdiag[Sigma_DD|S]: replace the block with the exact
            // noise-free covariance (Phi + (Sigma - Phi) = Sigma)
            ws.xi.block(off, off, n, n) = cov_matrix(b.locations, b.locations, h);
        off += n;
    }
    ws.xi.diagonal().array() += h.noise_var;

    SpdFactor fxi = factor_spd(ws.xi, h.signal_var + h.noise_var, "hyperlearn Xi");
    ws.log_det = 2.0 * fxi.llt.matrixLLT().diagonal().array().log().sum();
    const Eigen::VectorXd resid = y.array() - h.prior_mean;
    ws.quad_form = resid.dot(fxi.llt.solve(resid));
    return ws;
}

double log_marginal_area(std::span<const Dataset> blocks, const SupportSet& s,
                         const Hyperparams& h) {
    return log_marginal_workspace(blocks, s, h).value();
}

double hyperlearn_objective(std::span<const AreaData> areas, const Hyperparams& h) {
    double total = 0.0;
    for (const AreaData& a : areas) total += log_marginal_area(a.blocks, a.support, h);
    return total;
}

namespace {

Hyperparams from_theta(const Eigen::VectorXd& theta, double prior_mean) {
    Hyperparams h;
    h.signal_var = std::exp(theta[0]);
    h.noise_var = std::exp(theta[1]);
    h.length_scales = theta.tail(theta.size() - 2).array().exp();
    h.prior_mean = prior_mean;
    return h;
}

double data_extent(std::span<const AreaData> areas) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const AreaData& a : areas) {
        for (const Dataset& b : a.blocks)
            for (const Location& l : b.locations)
                for (int k = 0; k < l.dim(); ++k) {
                    lo = std::min(lo, l.coords[k]);
                    hi = std::max(hi, l.coords[k]);
                }
        for (const Location& l : a.support.points)
            for (int k = 0; k < l.dim(); ++k) {
                lo = std::min(lo, l.coords[k]);
                hi = std::max(hi, l.coords[k]);
            }
    }
    return hi > lo ? hi - lo : 1.0;
}

} // namespace

Hyperparams learn_hyperparams(std::span<const AreaData> areas, const Hyperparams& init,
                              const OptimizerConfig& cfg) {
    init.validate();
    if (areas.empty()) throw ArgumentError("learn_hyperparams: no areas");
    const int d = init.dim();
    const double width = cfg.domain_width > 0.0 ? cfg.domain_width : data_extent(areas);

    Eigen::VectorXd lo(d + 2), hi(d + 2);
    lo[0] = std::log(cfg.signal_lo);
    hi[0] = std::log(cfg.signal_hi);
    lo[1] = std::log(cfg.noise_lo);
    hi[1] = std::log(cfg.noise_hi);
    for (int k = 0; k < d; ++k) {
        lo[2 + k] = std::log(cfg.ell_lo_rel * width);
        hi[2 + k] = std::log(cfg.ell_hi_rel * width);
    }
    const auto project = [&](Eigen::VectorXd v) {
        return v.cwiseMax(lo).cwiseMin(hi);
    };

    Eigen::VectorXd theta(d + 2);
    theta[0] = std::log(init.signal_var);
    theta[1] = std::log(std::max(init.noise_var, cfg.noise_lo));
    for (int k = 0; k < d; ++k) theta[2 + k] = std::log(init.length_scales[k]);
    theta = project(theta);

    const auto objective = [&](const Eigen::VectorXd& t) {
        return hyperlearn_objective(areas, from_theta(t, init.prior_mean));
    };

    double f = objective(theta);
    if (!std::isfinite(f))
        throw DivergenceError("learn_hyperparams: objective not finite at init",
                              from_theta(project(theta), init.prior_mean));

    double step = cfg.initial_step;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        Eigen::VectorXd grad(d + 2);
        for (int i = 0; i < d + 2; ++i) {
            const double hstep = cfg.fd_step_rel * std::max(1.0, std::abs(theta[i]));
            Eigen::VectorXd tp = theta, tm = theta;
            tp[i] += hstep;
            tm[i] -= hstep;
            grad[i] = (objective(tp) - objective(tm)) / (2.0 * hstep);
        }
        if (!grad.allFinite())
            throw DivergenceError("learn_hyperparams: gradient not finite",
                                  from_theta(theta, init.prior_mean));
        if (grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) break;

        bool accepted = false;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            const Eigen::VectorXd cand = project(theta + step * grad);
            const double fc = objective(cand);
            if (std::isfinite(fc) && fc > f + cfg.armijo_c * grad.dot(cand - theta)) {
                theta = cand;
                f = fc;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // stuck (boundary or flat); current point is best
    }
    return from_theta(theta, init.prior_mean);
}

} // namespace gpfuse
