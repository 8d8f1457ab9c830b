#pragma once

#include <span>
#include <vector>

#include "gpfuse/summary.hpp"

namespace gpfuse {

/// Decentralized prediction from a global summary.
PredictiveDistribution gpddf_predict(const GlobalSummary& g, const Location& x,
                                     const SupportSet& s, const Hyperparams& h);

std::vector<PredictiveDistribution> gpddf_predict_batch(const GlobalSummary& g,
                                                        std::span<const Location> xs,
                                                        const SupportSet& s,
                                                        const Hyperparams& h);

/// Per-query intermediates of the local-data-aware predictor.
struct GpDdfPlusWorkspace {
    Eigen::RowVectorXd gamma_xs;
    double nu_x_local = 0.0;
    double psi_xx_local = 0.0;
    Eigen::RowVectorXd psi_xs_local;
};

/// Decentralized prediction that additionally exploits the caller's raw local
/// data. `g` must already include `own_local`'s contribution, and `own_data`
/// must be the raw data behind `own_local` (not checkable here; caller
/// contract).
PredictiveDistribution gpddfplus_predict(const GlobalSummary& g, const LocalSummary& own_local,
                                         const Dataset& own_data, const Location& x,
                                         const SupportSet& s, const Hyperparams& h);

std::vector<PredictiveDistribution> gpddfplus_predict_batch(
    const GlobalSummary& g, const LocalSummary& own_local, const Dataset& own_data,
    std::span<const Location> xs, const SupportSet& s, const Hyperparams& h);

/// Centralized sparse-GP reference model over disjoint data blocks. Written
/// from the standard construction (train covariance Q + blockdiag[Sigma - Q])
/// on purpose, independent of the summary path, so the equivalence tests are
/// meaningful. Also serves as the full-PITCs / local-PITCs baseline.
class PitcModel {
public:
    PitcModel(std::span<const Dataset> blocks, const SupportSet& s, const Hyperparams& h);

    /// PITC posterior (query conditionally independent of all blocks given S).
    PredictiveDistribution predict(const Location& x) const;
    /// PIC posterior (query joined to `query_block`, exact covariance there).
    PredictiveDistribution predict_pic(const Location& x, int query_block) const;

    int n_blocks() const { return static_cast<int>(block_spans_.size()); }

private:
    Eigen::VectorXd query_cross(const Location& x, int exact_block) const;

    const Hyperparams h_;
    SupportSet s_;
    std::vector<Dataset> blocks_;
    std::vector<std::pair<int, int>> block_spans_; // (offset, size) per block
    Eigen::LLT<Eigen::MatrixXd> kss_llt_;
    Eigen::MatrixXd ksd_;
    Eigen::LLT<Eigen::MatrixXd> m_llt_;  // Q + blockdiag[Sigma - Q] + noise
    Eigen::VectorXd alpha_;              // M^-1 (y - mu)
};

PredictiveDistribution pitc_predict(std::span<const Dataset> blocks, const SupportSet& s,
                                    const Location& x, const Hyperparams& h);
PredictiveDistribution pic_predict(std::span<const Dataset> blocks, const SupportSet& s,
                                   const Location& x, int query_block, const Hyperparams& h);

/// Full GP restricted to the data of the query's own area.
PredictiveDistribution local_gp_predict(const Dataset& area_data, const Location& x,
                                        const Hyperparams& h);

} // namespace gpfuse
