#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gpfuse/predictors.hpp"
#include "gpfuse/rng.hpp"
#include "gpfuse/summary.hpp"

namespace gpfuse {

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool contains(const Location& p) const {
        return p.coords[0] >= x0 && p.coords[0] <= x1 && p.coords[1] >= y0 &&
               p.coords[1] <= y1;
    }
};

/// Uniform grid of `size` points over the area expanded by `margin` of its
/// width/height on each side. The grid shape r x c is the factorization of
/// `size` whose aspect is closest to the area's; ties give x the larger count.
SupportSet make_support_set(const Rect& area, SupportId id, int size, double margin);

/// Rectangular tiling of the domain with one support set per area.
struct AreaPartition {
    Rect domain;
    int rows = 1, cols = 1;
    std::vector<Rect> areas;          // row-major, K = rows * cols
    std::vector<SupportSet> supports; // ids are the area indices

    int n_areas() const { return rows * cols; }
    int area_of(const Location& p) const;
};
AreaPartition make_partition(const Rect& domain, int rows, int cols, int support_size,
                             double margin);

enum class MovementPolicy { random_within, lawnmower_across, patrol_to_and_fro };
enum class FusionMode { eager, lazy };
enum class PredictorKind { gpddf, gpddfplus, local_gp, full_pitcs, local_pitcs };

MovementPolicy movement_policy_from_string(const std::string& s);
FusionMode fusion_mode_from_string(const std::string& s);
PredictorKind predictor_from_string(const std::string& s);
std::string to_string(MovementPolicy p);
std::string to_string(FusionMode m);
std::string to_string(PredictorKind k);

struct SimConfig {
    int n_agents = 1;
    int area_rows = 1;
    int area_cols = 1;
    int support_size = 9;
    double support_margin = 0.10;
    MovementPolicy policy = MovementPolicy::random_within;
    int steps = 1;
    int obs_per_step = 1;
    std::uint64_t seed = 0;
    FusionMode mode = FusionMode::lazy;
    PredictorKind predictor = PredictorKind::gpddf;

    int n_areas() const { return area_rows * area_cols; }
    void validate() const;
};

/// Agents are spread evenly over the areas: agent g starts in area g*K/N.
int start_area(const SimConfig& cfg, int agent);
/// Area an agent occupies at a tick under its movement policy.
int area_at_tick(const SimConfig& cfg, int agent, int tick);
/// Closed tour over the area grid used by the lawnmower policy.
std::vector<int> lawnmower_cycle(int rows, int cols);
/// One uniform jump inside an area.
Location step_movement(const Rect& area, Rng& rng);

/// Observations of one agent in one tick.
struct GatherBatch {
    int tick = 0;
    int agent = 0;
    int area = 0;
    Dataset data;
};

struct Trace {
    SimConfig cfg;
    std::vector<GatherBatch> batches; // ordered by (tick, agent)
};

/// Maps a proposed position to the actually-measured location and value
/// (grid-backed fields snap to the nearest cell).
using MeasureFn = std::function<std::pair<Location, double>(const Location&)>;

Trace make_trace(const SimConfig& cfg, const AreaPartition& partition,
                 const MeasureFn& measure);

struct EventRecord {
    int tick = 0;
    int agent = 0;
    std::string event;
    int area = 0;
    std::uint64_t bytes = 0;
    int transfers = 0;
};

struct AgentState {
    int agent_id = 0;
    int current_area = -1; // -1 while mid-transit
    LocalSummary current_summary;
    Dataset pending_raw;
    std::uint64_t rng_stream = 0;
    std::map<int, LocalSummary> backups; // area -> backed-up summary
};

struct FleetCounters {
    long transits = 0;
    long transit_transfers = 0;
    long predict_transfers = 0;
    std::uint64_t bytes_sent = 0;
};

struct FleetState {
    SimConfig cfg;
    AreaPartition partition;
    Hyperparams hyper;
    std::vector<AgentState> agents;
    std::set<int> visited;
    std::vector<EventRecord> events;
    FleetCounters counters;
    int tick = 0;
};

FleetState make_fleet(const SimConfig& cfg, const AreaPartition& partition,
                      const Hyperparams& h);

/// Append a batch of raw observations to an agent (not summarized yet).
void gather(FleetState& fleet, int agent, const Dataset& batch);

/// Transfer-at-transit protocol: summarize pending data, re-express the whole
/// summary on the destination support, discard raw data.
void transit_eager(FleetState& fleet, int agent, int new_area);

/// Information-sharing protocol: hand the summary to a stayer or back it up,
/// then adopt / retrieve / construct on arrival. No summary transfer happens.
/// `same_tick_leavers` marks agents departing simultaneously (they do not
/// count as stayers, which is how multiple backups of one area can arise).
void lazy_depart(FleetState& fleet, int agent, std::span<const int> same_tick_leavers);
void lazy_arrive(FleetState& fleet, int agent, int new_area);
void transit_lazy(FleetState& fleet, int agent, int new_area);

/// Run a recorded trace through the configured protocol.
FleetState replay_trace(const Trace& trace, const AreaPartition& partition,
                        const Hyperparams& h);

struct PredictPhaseResult {
    std::vector<PredictiveDistribution> predictions;
    std::vector<int> responsible_agent;
    int transfers = 0;
    std::uint64_t bytes = 0;
};

/// Route every query to its responsible agent, who gathers every summary in
/// the fleet (current summaries and backups), transfers each foreign-support
/// one exactly once onto its own support, aggregates, and predicts.
PredictPhaseResult predict_phase(FleetState& fleet, std::span<const Location> queries);

/// Which agent answers queries for an area: an occupant, else a backup
/// holder, else the nearest agent by area index (lowest id breaks ties).
int responsible_agent(const FleetState& fleet, int area);

struct MemoryReport {
    std::vector<std::size_t> per_agent; // stored scalars in summaries + backups
    std::size_t total = 0;
    std::size_t max_per_agent = 0;
};
MemoryReport memory_accounting(const FleetState& fleet);

void write_event_log(const std::string& path, const FleetState& fleet);

/// Versioned binary checkpoint of the full fleet state.
void save_checkpoint(std::ostream& os, const FleetState& fleet);
FleetState load_checkpoint(std::istream& is);

} // namespace gpfuse
