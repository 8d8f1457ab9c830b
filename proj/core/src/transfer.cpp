#include "gpfuse/transfer.hpp"

#include <algorithm>
#include <cmath>

namespace gpfuse {

PriorSummary transfer_prior(const PriorSummary& p, const SupportSet& s_old,
                            const SupportSet& s_new, const Hyperparams& h) {
    if (p.support_id != s_old.id)
        throw ArgumentError("transfer_prior: summary not expressed in s_old");
    if (s_old.points.empty() || s_new.points.empty())
        throw ArgumentError("transfer_prior: empty support set");
    if (s_new.id == s_old.id) {
        PriorSummary out = p;
        return out;
    }
    PriorSummary out;
    out.support_id = s_new.id;
    if (p.is_zero()) {
        out.omega = Eigen::VectorXd::Zero(s_new.size());
        out.phi = Eigen::MatrixXd::Zero(s_new.size(), s_new.size());
        return out;
    }
    SpdFactor fss = factor_spd(support_cov(s_old.points, h), h.signal_var,
                               "transfer_prior Sigma_SS");
    Eigen::MatrixXd kns = cov_matrix(s_new.points, s_old.points, h);
    // A = Sigma_S'S Sigma_SS^-1
    Eigen::MatrixXd a = fss.llt.solve(kns.transpose()).transpose();
    out.omega = a * p.omega;
    Eigen::MatrixXd phi = a * p.phi * a.transpose();
    out.phi = 0.5 * (phi + phi.transpose());
    return out;
}

LocalSummary transfer_local(const LocalSummary& l, const SupportSet& s_old,
                            const SupportSet& s_new, const Hyperparams& h) {
    PriorSummary p = local_to_prior(l, s_old, h);
    PriorSummary pt = transfer_prior(p, s_old, s_new, h);
    return prior_to_local(pt, s_new, h);
}

int ClusterAssignment::max_cluster_size() const {
    int m = 0;
    for (const auto& v : members) m = std::max(m, static_cast<int>(v.size()));
    return m;
}

double ClusterAssignment::mean_sqdist() const {
    if (sqdist.empty()) return 0.0;
    double s = 0.0;
    for (double d : sqdist) s += d;
    return s / static_cast<double>(sqdist.size());
}

ClusterAssignment cluster_assign(std::span<const Location> points, const SupportSet& s,
                                 const Hyperparams& h) {
    if (s.points.empty()) throw ArgumentError("cluster_assign: empty support set");
    ClusterAssignment out;
    out.assignment.resize(points.size());
    out.members.resize(s.points.size());
    out.sqdist.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        int best = 0;
        double bd = detail::scaled_sqdist(points[i], s.points[0], h);
        for (int j = 1; j < s.size(); ++j) {
            const double d = detail::scaled_sqdist(points[i], s.points[j], h);
            if (d < bd) { // strict: ties keep the lowest index
                bd = d;
                best = j;
            }
        }
        out.assignment[i] = best;
        out.sqdist[i] = bd;
        out.members[best].push_back(static_cast<int>(i));
    }
    return out;
}

LossBoundReport loss_bound(const SupportSet& s_old, const SupportSet& s_new,
                           std::span<const Location> data_locs, const Hyperparams& h) {
    if (s_old.points.empty() || s_new.points.empty() || data_locs.empty())
        throw ArgumentError("loss_bound: all location sets must be nonempty");

    LossBoundReport r;
    const ClusterAssignment cd = cluster_assign(data_locs, s_old, h);
    const ClusterAssignment cs = cluster_assign(s_new.points, s_old, h);
    r.t = cd.max_cluster_size();
    r.t_prime = cs.max_cluster_size();
    r.eps_d = cd.mean_sqdist();
    r.eps_s_prime = cs.mean_sqdist();

    SpdFactor fss = factor_spd(support_cov(s_old.points, h), h.signal_var,
                               "loss_bound Sigma_SS");
    const Eigen::Index n = static_cast<Eigen::Index>(s_old.points.size());
    Eigen::MatrixXd ssinv = fss.llt.solve(Eigen::MatrixXd::Identity(n, n));
    r.sigma_ss_inv_fnorm = ssinv.norm();

    Eigen::MatrixXd knd = cov_matrix(s_new.points, data_locs, h);
    Eigen::MatrixXd kns = cov_matrix(s_new.points, s_old.points, h);
    Eigen::MatrixXd kod = cov_matrix(s_old.points, data_locs, h);
    r.actual_loss = (knd - kns * fss.llt.solve(kod)).norm();

    const double e = 2.718281828459045235360287471353;
    const double c = std::sqrt(3.0 / e) * h.signal_var * static_cast<double>(n) *
                     static_cast<double>(r.t) * static_cast<double>(r.t_prime);
    r.bound = c * (std::sqrt(r.eps_s_prime) + std::sqrt(r.eps_s_prime + r.eps_d) +
                   std::sqrt(r.eps_d) +
                   h.signal_var * r.sigma_ss_inv_fnorm * static_cast<double>(n) *
                       std::sqrt(3.0 * r.eps_s_prime * r.eps_d / e));
    return r;
}

} // namespace gpfuse
