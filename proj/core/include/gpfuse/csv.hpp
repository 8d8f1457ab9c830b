#pragma once

#include <span>
#include <string>
#include <vector>

#include "gpfuse/types.hpp"

namespace gpfuse {

/// Load a dataset from CSV with header `x1,...,xd,y`. Dimension is inferred
/// from the header; rows with non-finite values are rejected with their line
/// number.
Dataset load_csv_dataset(const std::string& path);

/// Queries-only CSV: header `x1,...,xd`, no measurement column.
std::vector<Location> load_csv_locations(const std::string& path);

void write_csv_dataset(const std::string& path, const Dataset& d);

/// Batch-prediction output: per row the query coordinates, mean, variance and
/// log-variance.
void write_predictions_csv(const std::string& path, std::span<const Location> queries,
                           std::span<const PredictiveDistribution> preds);

/// Key-value text round trip for learned hyperparameters.
void save_hyperparams(const std::string& path, const Hyperparams& h);
Hyperparams load_hyperparams(const std::string& path);

/// Shortest-round-trip decimal formatting used by every CSV writer, so that
/// identical runs produce byte-identical files.
std::string format_double(double v);

} // namespace gpfuse
