#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gpfuse/field.hpp"
#include "gpfuse/fleet.hpp"

namespace gpfuse {

double rmse(std::span<const double> pred, std::span<const double> truth);

/// All knobs of one simulated run: field generation, the fleet, and which
/// fusion methods to evaluate.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    int grid_w = 50;
    int grid_h = 50;
    Hyperparams hyper = Hyperparams::isotropic(1.0, 0.01, 10.0, 2);
    SimConfig sim;
    std::vector<std::string> methods = {"local-pitcs", "full-pitcs", "gpddf", "gpddf-ass"};
    std::string output_dir; // empty: no CSV output
};

struct MethodResult {
    std::string method;
    double rmse = 0.0;
    double reduction = 0.0; // RMSE(local-pitcs) - RMSE(method)
    long transit_transfers = 0;
    long predict_transfers = 0;
    std::uint64_t bytes = 0;
    double wall_ms = 0.0; // excluded from report.csv (not deterministic)
};

struct ExperimentReport {
    std::uint64_t seed = 0;
    double lengthscale = 0.0;
    std::vector<MethodResult> methods;

    const MethodResult* find(const std::string& name) const;
};

/// Generate the field, run the movement/gathering trace once, then evaluate
/// every requested method on the same data over all grid cells. Known method
/// names: gpddf, gpddf-ass, gpddfplus, gpddfplus-ass, local-pitcs,
/// full-pitcs, local-gps.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

void write_report_csv(const std::string& path, std::span<const ExperimentReport> reports);
void write_timings_csv(const std::string& path, std::span<const ExperimentReport> reports);

struct SweepConfig {
    ExperimentConfig base;
    std::vector<double> lengthscales = {1, 2, 5, 10, 15, 20};
    int seeds = 10;
};

struct SweepResult {
    std::vector<ExperimentReport> runs;

    /// Mean reduction over seeds for one method at one length-scale.
    double mean_reduction(double lengthscale, const std::string& method) const;
    double mean_rmse(double lengthscale, const std::string& method) const;
};

SweepResult sweep_lengthscales(const SweepConfig& cfg);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);

} // namespace gpfuse
