#include "gpfuse/predictors.hpp"

namespace gpfuse {

namespace {

Eigen::VectorXd cross_to_support(const Location& x, const SupportSet& s,
                                 const Hyperparams& h) {
    Eigen::VectorXd k(s.size());
    for (int i = 0; i < s.size(); ++i) k[i] = se_cov(x, s.points[i], h);
    return k;
}

struct GpddfContext {
    Eigen::LLT<Eigen::MatrixXd> kss_llt;
    Eigen::LLT<Eigen::MatrixXd> psi_dot_llt;

    GpddfContext(const GlobalSummary& g, const SupportSet& s, const Hyperparams& h) {
        if (g.support_id != s.id)
            throw ArgumentError("gpddf_predict: global summary support mismatch");
        kss_llt = factor_spd(support_cov(s.points, h), h.signal_var, "gpddf Sigma_SS").llt;
        psi_dot_llt = factor_spd(g.psi_dot, h.signal_var, "gpddf Psi_dot").llt;
    }

    PredictiveDistribution at(const GlobalSummary& g, const Location& x, const SupportSet& s,
                              const Hyperparams& h) const {
        const Eigen::VectorXd kxs = cross_to_support(x, s, h);
        const double sxx = h.signal_var + h.noise_var;
        PredictiveDistribution out;
        out.mean = h.prior_mean + kxs.dot(psi_dot_llt.solve(g.nu_dot));
        const double v = sxx - kxs.dot(kss_llt.solve(kxs)) + kxs.dot(psi_dot_llt.solve(kxs));
        out.variance = detail::clamp_variance(v, sxx);
        return out;
    }
};

} // namespace

PredictiveDistribution gpddf_predict(const GlobalSummary& g, const Location& x,
                                     const SupportSet& s, const Hyperparams& h) {
    return GpddfContext(g, s, h).at(g, x, s, h);
}

std::vector<PredictiveDistribution> gpddf_predict_batch(const GlobalSummary& g,
                                                        std::span<const Location> xs,
                                                        const SupportSet& s,
                                                        const Hyperparams& h) {
    GpddfContext ctx(g, s, h);
    std::vector<PredictiveDistribution> out;
    out.reserve(xs.size());
    for (const Location& x : xs) out.push_back(ctx.at(g, x, s, h));
    return out;
}

namespace {

struct GpddfPlusContext {
    Eigen::LLT<Eigen::MatrixXd> kss_llt;
    Eigen::LLT<Eigen::MatrixXd> psi_dot_llt;
    Eigen::LLT<Eigen::MatrixXd> cond_llt;  // Sigma_DD|S of own data
    Eigen::MatrixXd ksd;
    Eigen::VectorXd alpha;                 // Sigma_DD|S^-1 (y - mu)
    Eigen::MatrixXd w;                     // Sigma_DD|S^-1 Sigma_DS
    bool have_data = false;

    GpddfPlusContext(const GlobalSummary& g, const LocalSummary& own, const Dataset& data,
                     const SupportSet& s, const Hyperparams& h) {
        if (g.support_id != s.id || own.support_id != s.id)
            throw ArgumentError("gpddfplus_predict: support mismatch");
        Eigen::MatrixXd kss = support_cov(s.points, h);
        kss_llt = factor_spd(kss, h.signal_var, "gpddfplus Sigma_SS").llt;
        psi_dot_llt = factor_spd(g.psi_dot, h.signal_var, "gpddfplus Psi_dot").llt;
        if (!data.empty()) {
            data.validate();
            have_data = true;
            ksd = cov_matrix(s.points, data.locations, h);
            Eigen::MatrixXd cond =
                cov_matrix(data.locations, data.locations, h, NoiseMode::diagonal);
            cond.noalias() -= ksd.transpose() * kss_llt.solve(ksd);
            cond_llt = factor_spd(std::move(cond), h.signal_var, "gpddfplus Sigma_DD|S").llt;
            alpha = cond_llt.solve(Eigen::VectorXd(data.values.array() - h.prior_mean));
            w = cond_llt.solve(ksd.transpose());
        }
    }

    GpDdfPlusWorkspace workspace(const LocalSummary& own, const Dataset& data,
                                 const Location& x, const SupportSet& s,
                                 const Hyperparams& h) const {
        GpDdfPlusWorkspace ws;
        const Eigen::VectorXd kxs = cross_to_support(x, s, h);
        if (have_data) {
            Eigen::VectorXd kxd(data.size());
            for (std::size_t i = 0; i < data.size(); ++i)
                kxd[static_cast<Eigen::Index>(i)] = se_cov(x, data.locations[i], h);
            ws.nu_x_local = kxd.dot(alpha);
            ws.psi_xs_local = kxd.transpose() * w;
            ws.psi_xx_local = kxd.dot(cond_llt.solve(kxd));
        } else {
            ws.nu_x_local = 0.0;
            ws.psi_xs_local = Eigen::RowVectorXd::Zero(s.size());
            ws.psi_xx_local = 0.0;
        }
        ws.gamma_xs = kxs.transpose() + kss_llt.solve(kxs).transpose() * own.psi -
                      ws.psi_xs_local;
        return ws;
    }

    PredictiveDistribution at(const GlobalSummary& g, const LocalSummary& own,
                              const Dataset& data, const Location& x, const SupportSet& s,
                              const Hyperparams& h) const {
        const GpDdfPlusWorkspace ws = workspace(own, data, x, s, h);
        const Eigen::VectorXd kxs = cross_to_support(x, s, h);
        const Eigen::VectorXd gamma = ws.gamma_xs.transpose();
        const double sxx = h.signal_var + h.noise_var;
        PredictiveDistribution out;
        out.mean = h.prior_mean + gamma.dot(psi_dot_llt.solve(g.nu_dot)) -
                   kxs.dot(kss_llt.solve(own.nu)) + ws.nu_x_local;
        const double bracket = gamma.dot(kss_llt.solve(kxs)) -
                               kxs.dot(kss_llt.solve(ws.psi_xs_local.transpose())) -
                               gamma.dot(psi_dot_llt.solve(gamma));
        out.variance = detail::clamp_variance(sxx - bracket - ws.psi_xx_local, sxx);
        return out;
    }
};

} // namespace

PredictiveDistribution gpddfplus_predict(const GlobalSummary& g, const LocalSummary& own_local,
                                         const Dataset& own_data, const Location& x,
                                         const SupportSet& s, const Hyperparams& h) {
    return GpddfPlusContext(g, own_local, own_data, s, h).at(g, own_local, own_data, x, s, h);
}

std::vector<PredictiveDistribution> gpddfplus_predict_batch(
    const GlobalSummary& g, const LocalSummary& own_local, const Dataset& own_data,
    std::span<const Location> xs, const SupportSet& s, const Hyperparams& h) {
    GpddfPlusContext ctx(g, own_local, own_data, s, h);
    std::vector<PredictiveDistribution> out;
    out.reserve(xs.size());
    for (const Location& x : xs) out.push_back(ctx.at(g, own_local, own_data, x, s, h));
    return out;
}

// ---- centralized reference models -----------------------------------------

PitcModel::PitcModel(std::span<const Dataset> blocks, const SupportSet& s,
                     const Hyperparams& h)
    : h_(h), s_(s) {
    int total = 0;
    for (const Dataset& b : blocks) {
        b.validate();
        block_spans_.emplace_back(total, static_cast<int>(b.size()));
        total += static_cast<int>(b.size());
        blocks_.push_back(b);
    }
    Eigen::MatrixXd kss = cov_matrix(s.points, s.points, h);
    kss.diagonal().array() += kBaseJitter * h.signal_var;
    kss_llt_.compute(kss);
    if (kss_llt_.info() != Eigen::Success)
        throw NumericError("pitc: Sigma_SS not positive definite");

    if (total == 0) return;
    std::vector<Location> all;
    Eigen::VectorXd y(total);
    for (const Dataset& b : blocks_)
        for (std::size_t i = 0; i < b.size(); ++i) {
            y[static_cast<Eigen::Index>(all.size())] = b.values[static_cast<Eigen::Index>(i)];
            all.push_back(b.locations[i]);
        }
    ksd_ = cov_matrix(s.points, all, h);
    Eigen::MatrixXd m = ksd_.transpose() * kss_llt_.solve(ksd_);
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto [off, n] = block_spans_[bi];
        if (n == 0) continue;
        m.block(off, off, n, n) =
            cov_matrix(blocks_[bi].locations, blocks_[bi].locations, h, NoiseMode::diagonal);
    }
    m_llt_.compute(m);
    if (m_llt_.info() != Eigen::Success)
        throw NumericError("pitc: train covariance not positive definite");
    alpha_ = m_llt_.solve(Eigen::VectorXd(y.array() - h.prior_mean));
}

Eigen::VectorXd PitcModel::query_cross(const Location& x, int exact_block) const {
    Eigen::VectorXd kxs(s_.size());
    for (int i = 0; i < s_.size(); ++i) kxs[i] = se_cov(x, s_.points[i], h_);
    Eigen::VectorXd q = (kss_llt_.solve(kxs).transpose() * ksd_).transpose();
    if (exact_block >= 0) {
        const auto [off, n] = block_spans_[static_cast<std::size_t>(exact_block)];
        const Dataset& b = blocks_[static_cast<std::size_t>(exact_block)];
        for (int i = 0; i < n; ++i) q[off + i] = se_cov(x, b.locations[static_cast<std::size_t>(i)], h_);
    }
    return q;
}

PredictiveDistribution PitcModel::predict(const Location& x) const {
    const double sxx = h_.signal_var + h_.noise_var;
    if (ksd_.size() == 0) return {h_.prior_mean, sxx};
    const Eigen::VectorXd q = query_cross(x, -1);
    PredictiveDistribution out;
    out.mean = h_.prior_mean + q.dot(alpha_);
    out.variance = detail::clamp_variance(sxx - q.dot(m_llt_.solve(q)), sxx);
    return out;
}

PredictiveDistribution PitcModel::predict_pic(const Location& x, int query_block) const {
    if (query_block < 0 || query_block >= n_blocks())
        throw ArgumentError("pic_predict: invalid query block");
    const double sxx = h_.signal_var + h_.noise_var;
    if (ksd_.size() == 0) return {h_.prior_mean, sxx};
    const Eigen::VectorXd c = query_cross(x, query_block);
    PredictiveDistribution out;
    out.mean = h_.prior_mean + c.dot(alpha_);
    out.variance = detail::clamp_variance(sxx - c.dot(m_llt_.solve(c)), sxx);
    return out;
}

PredictiveDistribution pitc_predict(std::span<const Dataset> blocks, const SupportSet& s,
                                    const Location& x, const Hyperparams& h) {
    return PitcModel(blocks, s, h).predict(x);
}

PredictiveDistribution pic_predict(std::span<const Dataset> blocks, const SupportSet& s,
                                   const Location& x, int query_block, const Hyperparams& h) {
    return PitcModel(blocks, s, h).predict_pic(x, query_block);
}

PredictiveDistribution local_gp_predict(const Dataset& area_data, const Location& x,
                                        const Hyperparams& h) {
    if (area_data.empty()) return {h.prior_mean, h.signal_var + h.noise_var};
    return full_gp_predict(x, area_data, h);
}

} // namespace gpfuse
