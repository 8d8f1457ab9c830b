#include "gpfuse/kernel.hpp"

#include <cmath>
#include <sstream>

namespace gpfuse {

namespace detail {

double scaled_sqdist(const Location& x, const Location& y, const Hyperparams& h) {
    double s = 0.0;
    for (int k = 0; k < h.dim(); ++k) {
        const double d = (x.coords[k] - y.coords[k]) / h.length_scales[k];
        s += d * d;
    }
    return s;
}

double clamp_variance(double v, double upper) {
    if (v < -1e-9) {
        std::ostringstream os;
        os << "predictive variance " << v << " below numeric tolerance";
        throw NumericError(os.str());
    }
    if (v < 0.0) return 0.0;
    return v < upper ? v : upper;
}

} // namespace detail

double se_cov(const Location& x, const Location& x2, const Hyperparams& h,
              bool same_observation) {
    if (x.dim() != x2.dim() || x.dim() != h.dim())
        throw ArgumentError("se_cov: dimension mismatch");
    double v = h.signal_var * std::exp(-0.5 * detail::scaled_sqdist(x, x2, h));
    if (same_observation) v += h.noise_var;
    return v;
}

Eigen::MatrixXd cov_matrix(std::span<const Location> a, std::span<const Location> b,
                           const Hyperparams& h, NoiseMode noise) {
    Eigen::MatrixXd m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].dim() != h.dim()) throw ArgumentError("cov_matrix: dimension mismatch");
        for (std::size_t j = 0; j < b.size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                h.signal_var * std::exp(-0.5 * detail::scaled_sqdist(a[i], b[j], h));
    }
    if (noise == NoiseMode::diagonal) {
        if (a.size() != b.size())
            throw ArgumentError("cov_matrix: diagonal noise requires A == B");
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!(a[i] == b[i]))
                throw ArgumentError("cov_matrix: diagonal noise requires A == B");
        m.diagonal().array() += h.noise_var;
    }
    return m;
}

Eigen::MatrixXd support_cov(std::span<const Location> s, const Hyperparams& h) {
    Eigen::MatrixXd m = cov_matrix(s, s, h, NoiseMode::none);
    m.diagonal().array() += kBaseJitter * h.signal_var;
    return m;
}

SpdFactor factor_spd(Eigen::MatrixXd m, double scale, const char* what) {
    SpdFactor f;
    f.llt.compute(m);
    if (f.llt.info() == Eigen::Success) return f;
    for (double j = kBaseJitter; j <= kMaxJitter * 1.0001; j *= 10.0) {
        Eigen::MatrixXd jm = m;
        jm.diagonal().array() += j * scale;
        f.llt.compute(jm);
        if (f.llt.info() == Eigen::Success) {
            f.jitter_added = j * scale;
            return f;
        }
    }
    std::ostringstream os;
    os << what << ": matrix of size " << m.rows() << " not positive definite after jitter "
       << kMaxJitter * scale << " (diag min " << m.diagonal().minCoeff() << ", max "
       << m.diagonal().maxCoeff() << ")";
    throw NumericError(os.str());
}

PredictiveDistribution full_gp_predict(const Location& x, const Dataset& data,
                                       const Hyperparams& h) {
    if (data.empty()) throw ArgumentError("full_gp_predict: empty dataset");
    data.validate();
    Eigen::MatrixXd kdd = cov_matrix(data.locations, data.locations, h, NoiseMode::diagonal);
    SpdFactor f = factor_spd(std::move(kdd), h.signal_var, "full_gp_predict Sigma_DD");

    Eigen::VectorXd kxd(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        kxd[static_cast<Eigen::Index>(i)] = se_cov(x, data.locations[i], h);

    const Eigen::VectorXd resid = data.values.array() - h.prior_mean;
    const double sxx = h.signal_var + h.noise_var;
    PredictiveDistribution out;
    out.mean = h.prior_mean + kxd.dot(f.llt.solve(resid));
    out.variance = detail::clamp_variance(sxx - kxd.dot(f.llt.solve(kxd)), sxx);
    return out;
}

} // namespace gpfuse
