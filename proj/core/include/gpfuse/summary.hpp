#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "gpfuse/kernel.hpp"
#include "gpfuse/types.hpp"

namespace gpfuse {

/// Inducing locations for one local area.
struct SupportSet {
    SupportId id = 0;
    std::vector<Location> points;

    int size() const { return static_cast<int>(points.size()); }
};

/// (nu, Psi): an agent's data summarized against a support set.
struct LocalSummary {
    SupportId support_id = 0;
    Eigen::VectorXd nu;
    Eigen::MatrixXd psi;

    bool is_zero() const { return nu.isZero(0.0) && psi.isZero(0.0); }
    static LocalSummary zero(const SupportSet& s) {
        return {s.id, Eigen::VectorXd::Zero(s.size()),
                Eigen::MatrixXd::Zero(s.size(), s.size())};
    }
};

/// (omega, Phi): the representation in which support-set transfer is linear.
struct PriorSummary {
    SupportId support_id = 0;
    Eigen::VectorXd omega;
    Eigen::MatrixXd phi;

    bool is_zero() const { return omega.isZero(0.0) && phi.isZero(0.0); }
};

/// (nu_dot, Psi_dot): sum of local summaries plus the support covariance.
struct GlobalSummary {
    SupportId support_id = 0;
    Eigen::VectorXd nu_dot;
    Eigen::MatrixXd psi_dot;
};

LocalSummary build_local_summary(const Dataset& data, const SupportSet& s,
                                 const Hyperparams& h);

/// build_local_summary plus the cross terms for extra locations B:
/// nu_{B|D}, Psi_{BS|D} and Psi_{BB|D}.
struct LocalSummaryBlocks {
    LocalSummary summary;
    Eigen::VectorXd nu_b;
    Eigen::MatrixXd psi_bs;
    Eigen::MatrixXd psi_bb;
};
LocalSummaryBlocks build_local_summary_with_blocks(const Dataset& data, const SupportSet& s,
                                                   const Hyperparams& h,
                                                   std::span<const Location> extra);

GlobalSummary aggregate_global(std::span<const LocalSummary> locals, const SupportSet& s,
                               const Hyperparams& h);

PriorSummary local_to_prior(const LocalSummary& l, const SupportSet& s, const Hyperparams& h);
LocalSummary prior_to_local(const PriorSummary& p, const SupportSet& s, const Hyperparams& h);

LocalSummary assimilate(const LocalSummary& a, const LocalSummary& b);

/// Flat binary record: u64 support id, u64 n, f64 nu[n], f64 psi[n*n],
/// little-endian throughout. All three summary kinds share the layout.
std::size_t summary_record_bytes(int support_size);
void write_summary_record(std::ostream& os, SupportId id, const Eigen::VectorXd& vec,
                          const Eigen::MatrixXd& mat);
void read_summary_record(std::istream& is, SupportId& id, Eigen::VectorXd& vec,
                         Eigen::MatrixXd& mat);

void write_record(std::ostream& os, const LocalSummary& s);
void write_record(std::ostream& os, const PriorSummary& s);
void write_record(std::ostream& os, const GlobalSummary& s);
LocalSummary read_local_record(std::istream& is);
PriorSummary read_prior_record(std::istream& is);
GlobalSummary read_global_record(std::istream& is);

} // namespace gpfuse
