#include "gpfuse/summary.hpp"

#include <cstring>
#include <istream>
#include <ostream>

namespace gpfuse {

namespace {

void check_support(const LocalSummary& l, const SupportSet& s, const char* what) {
    if (l.support_id != s.id)
        throw ArgumentError(std::string(what) + ": summary support id mismatch");
    if (l.nu.size() != s.size() || l.psi.rows() != s.size() || l.psi.cols() != s.size())
        throw ArgumentError(std::string(what) + ": summary size mismatch");
}

void check_support(const PriorSummary& p, const SupportSet& s, const char* what) {
    if (p.support_id != s.id)
        throw ArgumentError(std::string(what) + ": summary support id mismatch");
    if (p.omega.size() != s.size() || p.phi.rows() != s.size() || p.phi.cols() != s.size())
        throw ArgumentError(std::string(what) + ": summary size mismatch");
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

/// Sigma_{DD|S} = Sigma_DD - Sigma_DS Sigma_SS^-1 Sigma_SD, noise on Sigma_DD.
Eigen::MatrixXd data_conditional_cov(const Eigen::MatrixXd& ksd, const Dataset& data,
                                     const SupportSet& s, const Hyperparams& h) {
    SpdFactor fss = factor_spd(support_cov(s.points, h), h.signal_var, "Sigma_SS");
    Eigen::MatrixXd kdd = cov_matrix(data.locations, data.locations, h, NoiseMode::diagonal);
    kdd.noalias() -= ksd.transpose() * fss.llt.solve(ksd);
    return kdd;
}

} // namespace

LocalSummary build_local_summary(const Dataset& data, const SupportSet& s,
                                 const Hyperparams& h) {
    return build_local_summary_with_blocks(data, s, h, {}).summary;
}

LocalSummaryBlocks build_local_summary_with_blocks(const Dataset& data, const SupportSet& s,
                                                   const Hyperparams& h,
                                                   std::span<const Location> extra) {
    data.validate();
    const int n = s.size();
    const int m = static_cast<int>(data.size());
    const int nb = static_cast<int>(extra.size());
    LocalSummaryBlocks out;
    out.summary = LocalSummary::zero(s);
    out.nu_b = Eigen::VectorXd::Zero(nb);
    out.psi_bs = Eigen::MatrixXd::Zero(nb, n);
    out.psi_bb = Eigen::MatrixXd::Zero(nb, nb);
    if (m == 0) return out;

    if (h.noise_var == 0.0) {
        for (const Location& d : data.locations)
            for (const Location& p : s.points)
                if (d == p)
                    throw ArgumentError(
                        "build_local_summary: observation coincides with a support point "
                        "and noise_var is 0; Sigma_DD|S would be singular");
    }

    Eigen::MatrixXd ksd = cov_matrix(s.points, data.locations, h);
    SpdFactor fc = factor_spd(data_conditional_cov(ksd, data, s, h), h.signal_var,
                              "Sigma_DD|S");
    const Eigen::VectorXd resid = data.values.array() - h.prior_mean;
    const Eigen::VectorXd alpha = fc.llt.solve(resid);          // Sigma_DD|S^-1 (y - mu)
    const Eigen::MatrixXd w = fc.llt.solve(ksd.transpose());    // Sigma_DD|S^-1 Sigma_DS

    out.summary.nu = ksd * alpha;
    out.summary.psi = symmetrized(ksd * w);
    if (nb > 0) {
        Eigen::MatrixXd kbd = cov_matrix(extra, data.locations, h);
        out.nu_b = kbd * alpha;
        out.psi_bs = kbd * w;
        out.psi_bb = symmetrized(kbd * fc.llt.solve(kbd.transpose()));
    }
    return out;
}

GlobalSummary aggregate_global(std::span<const LocalSummary> locals, const SupportSet& s,
                               const Hyperparams& h) {
    GlobalSummary g;
    g.support_id = s.id;
    g.nu_dot = Eigen::VectorXd::Zero(s.size());
    g.psi_dot = support_cov(s.points, h);
    for (const LocalSummary& l : locals) {
        check_support(l, s, "aggregate_global");
        g.nu_dot += l.nu;
        g.psi_dot += l.psi;
    }
    return g;
}

PriorSummary local_to_prior(const LocalSummary& l, const SupportSet& s, const Hyperparams& h) {
    check_support(l, s, "local_to_prior");
    PriorSummary p;
    p.support_id = l.support_id;
    if (l.is_zero()) {
        p.omega = Eigen::VectorXd::Zero(s.size());
        p.phi = Eigen::MatrixXd::Zero(s.size(), s.size());
        return p;
    }
    // Phi = Kss - Kss (Psi + Kss)^-1 Kss, omega = Kss (Psi + Kss)^-1 nu;
    // solve-based rearrangement of Phi^-1 = Psi^-1 + Kss^-1 that tolerates
    // rank-deficient Psi.
    const Eigen::MatrixXd kss = support_cov(s.points, h);
    SpdFactor f = factor_spd(l.psi + kss, h.signal_var, "local_to_prior Psi+Sigma_SS");
    p.omega = kss * f.llt.solve(l.nu);
    Eigen::MatrixXd phi = kss - kss * f.llt.solve(kss);
    p.phi = symmetrized(phi);
    return p;
}

LocalSummary prior_to_local(const PriorSummary& p, const SupportSet& s, const Hyperparams& h) {
    check_support(p, s, "prior_to_local");
    LocalSummary l;
    l.support_id = p.support_id;
    if (p.is_zero()) {
        l.nu = Eigen::VectorXd::Zero(s.size());
        l.psi = Eigen::MatrixXd::Zero(s.size(), s.size());
        return l;
    }
    // nu = omega + Phi (Kss - Phi)^-1 omega, Psi = Phi + Phi (Kss - Phi)^-1 Phi;
    // no Phi^-1 anywhere, so rank-deficient Phi is fine. (Kss - Phi) not PD
    // signals an over-informative prior summary.
    const Eigen::MatrixXd kss = support_cov(s.points, h);
    SpdFactor f = factor_spd(kss - p.phi, h.signal_var, "prior_to_local Sigma_SS-Phi");
    l.nu = p.omega + p.phi * f.llt.solve(p.omega);
    Eigen::MatrixXd psi = p.phi + p.phi * f.llt.solve(p.phi);
    l.psi = symmetrized(psi);
    return l;
}

LocalSummary assimilate(const LocalSummary& a, const LocalSummary& b) {
    if (a.support_id != b.support_id)
        throw ArgumentError("assimilate: support id mismatch");
    if (a.nu.size() != b.nu.size())
        throw ArgumentError("assimilate: summary size mismatch");
    return {a.support_id, a.nu + b.nu, a.psi + b.psi};
}

// ---- serialization -------------------------------------------------------

namespace {

// The record is defined little-endian; this code assumes a little-endian
// host, which covers every target this project builds on.
template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("summary record: truncated input");
    return v;
}

} // namespace

std::size_t summary_record_bytes(int n) {
    return 16 + 8 * static_cast<std::size_t>(n) +
           8 * static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
}

void write_summary_record(std::ostream& os, SupportId id, const Eigen::VectorXd& vec,
                          const Eigen::MatrixXd& mat) {
    put<std::uint64_t>(os, id);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(vec.size()));
    for (Eigen::Index i = 0; i < vec.size(); ++i) put<double>(os, vec[i]);
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
        for (Eigen::Index c = 0; c < mat.cols(); ++c) put<double>(os, mat(r, c));
}

void read_summary_record(std::istream& is, SupportId& id, Eigen::VectorXd& vec,
                         Eigen::MatrixXd& mat) {
    id = get<std::uint64_t>(is);
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    if (n < 0 || n > (1 << 20)) throw IoError("summary record: implausible size");
    vec.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) vec[i] = get<double>(is);
    mat.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) mat(r, c) = get<double>(is);
}

void write_record(std::ostream& os, const LocalSummary& s) {
    write_summary_record(os, s.support_id, s.nu, s.psi);
}
void write_record(std::ostream& os, const PriorSummary& s) {
    write_summary_record(os, s.support_id, s.omega, s.phi);
}
void write_record(std::ostream& os, const GlobalSummary& s) {
    write_summary_record(os, s.support_id, s.nu_dot, s.psi_dot);
}

LocalSummary read_local_record(std::istream& is) {
    LocalSummary s;
    read_summary_record(is, s.support_id, s.nu, s.psi);
    return s;
}
PriorSummary read_prior_record(std::istream& is) {
    PriorSummary s;
    read_summary_record(is, s.support_id, s.omega, s.phi);
    return s;
}
GlobalSummary read_global_record(std::istream& is) {
    GlobalSummary s;
    read_summary_record(is, s.support_id, s.nu_dot, s.psi_dot);
    return s;
}

} // namespace gpfuse
