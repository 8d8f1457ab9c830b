#include "gpfuse/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gpfuse/transfer.hpp"

namespace gpfuse {

// ---- geometry --------------------------------------------------------------

SupportSet make_support_set(const Rect& area, SupportId id, int size, double margin) {
    if (size < 1) throw ArgumentError("make_support_set: size must be >= 1");
    if (margin < 0.0 || margin >= 0.5)
        throw ArgumentError("make_support_set: margin must be in [0, 0.5)");
    const double ex = margin * area.width();
    const double ey = margin * area.height();
    const double x0 = area.x0 - ex, x1 = area.x1 + ex;
    const double y0 = area.y0 - ey, y1 = area.y1 + ey;
    const double aspect = (x1 - x0) / (y1 - y0);

    int best_c = size, best_r = 1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= size; ++r) {
        if (size % r != 0) continue;
        const int c = size / r;
        const double score = std::abs(std::log((static_cast<double>(c) / r) / aspect));
        // strict comparison keeps the first (largest-c) factorization on ties,
        // so the wider axis gets the larger count
        if (score < best_score - 1e-12) {
            best_score = score;
            best_r = r;
            best_c = c;
        }
    }

    SupportSet s;
    s.id = id;
    s.points.reserve(static_cast<std::size_t>(size));
    const double dx = (x1 - x0) / best_c;
    const double dy = (y1 - y0) / best_r;
    for (int j = 0; j < best_r; ++j)
        for (int i = 0; i < best_c; ++i)
            s.points.emplace_back(x0 + (i + 0.5) * dx, y0 + (j + 0.5) * dy);
    return s;
}

int AreaPartition::area_of(const Location& p) const {
    const double fx = (p.coords[0] - domain.x0) / domain.width() * cols;
    const double fy = (p.coords[1] - domain.y0) / domain.height() * rows;
    const int c = std::clamp(static_cast<int>(std::floor(fx)), 0, cols - 1);
    const int r = std::clamp(static_cast<int>(std::floor(fy)), 0, rows - 1);
    return r * cols + c;
}

AreaPartition make_partition(const Rect& domain, int rows, int cols, int support_size,
                             double margin) {
    if (rows < 1 || cols < 1) throw ArgumentError("make_partition: rows/cols must be >= 1");
    if (domain.width() <= 0.0 || domain.height() <= 0.0)
        throw ArgumentError("make_partition: empty domain");
    AreaPartition p;
    p.domain = domain;
    p.rows = rows;
    p.cols = cols;
    const double aw = domain.width() / cols;
    const double ah = domain.height() / rows;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            Rect a{domain.x0 + c * aw, domain.y0 + r * ah, domain.x0 + (c + 1) * aw,
                   domain.y0 + (r + 1) * ah};
            p.areas.push_back(a);
            p.supports.push_back(make_support_set(
                a, static_cast<SupportId>(p.areas.size() - 1), support_size, margin));
        }
    return p;
}

// ---- config / movement -------------------------------------------------------

namespace {
template <typename E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
            const char* what) {
    for (const auto& [name, v] : table)
        if (s == name) return v;
    throw ArgumentError(std::string(what) + ": unknown value '" + s + "'");
}
} // namespace

MovementPolicy movement_policy_from_string(const std::string& s) {
    return enum_from<MovementPolicy>(s,
                                     {{"random_within", MovementPolicy::random_within},
                                      {"lawnmower_across", MovementPolicy::lawnmower_across},
                                      {"patrol_to_and_fro", MovementPolicy::patrol_to_and_fro}},
                                     "movement policy");
}
FusionMode fusion_mode_from_string(const std::string& s) {
    return enum_from<FusionMode>(s, {{"eager", FusionMode::eager}, {"lazy", FusionMode::lazy}},
                                 "fusion mode");
}
PredictorKind predictor_from_string(const std::string& s) {
    return enum_from<PredictorKind>(s,
                                    {{"gpddf", PredictorKind::gpddf},
                                     {"gpddfplus", PredictorKind::gpddfplus},
                                     {"local_gp", PredictorKind::local_gp},
                                     {"full_pitcs", PredictorKind::full_pitcs},
                                     {"local_pitcs", PredictorKind::local_pitcs}},
                                    "predictor");
}
std::string to_string(MovementPolicy p) {
    switch (p) {
        case MovementPolicy::random_within: return "random_within";
        case MovementPolicy::lawnmower_across: return "lawnmower_across";
        case MovementPolicy::patrol_to_and_fro: return "patrol_to_and_fro";
    }
    return "?";
}
std::string to_string(FusionMode m) {
    return m == FusionMode::eager ? "eager" : "lazy";
}
std::string to_string(PredictorKind k) {
    switch (k) {
        case PredictorKind::gpddf: return "gpddf";
        case PredictorKind::gpddfplus: return "gpddfplus";
        case PredictorKind::local_gp: return "local_gp";
        case PredictorKind::full_pitcs: return "full_pitcs";
        case PredictorKind::local_pitcs: return "local_pitcs";
    }
    return "?";
}

void SimConfig::validate() const {
    if (n_agents < 1 || area_rows < 1 || area_cols < 1 || support_size < 1 || steps < 1 ||
        obs_per_step < 0)
        throw ArgumentError("SimConfig: counts must be positive (observations may be zero)");
    if (support_margin < 0.0 || support_margin >= 0.5)
        throw ArgumentError("SimConfig: margin must be in [0, 0.5)");
}

int start_area(const SimConfig& cfg, int agent) {
    return static_cast<int>(static_cast<long>(agent) * cfg.n_areas() / cfg.n_agents);
}

std::vector<int> lawnmower_cycle(int rows, int cols) {
    std::vector<int> cycle;
    const auto idx = [cols](int r, int c) { return r * cols + c; };
    if (rows == 1) {
        for (int c = 0; c < cols; ++c) cycle.push_back(idx(0, c));
        return cycle;
    }
    if (cols == 1) {
        for (int r = 0; r < rows; ++r) cycle.push_back(idx(r, 0));
        return cycle;
    }
    for (int c = 0; c < cols; ++c) cycle.push_back(idx(0, c));
    for (int r = 1; r < rows; ++r) {
        if (r % 2 == 1)
            for (int c = cols - 1; c >= 1; --c) cycle.push_back(idx(r, c));
        else
            for (int c = 1; c <= cols - 1; ++c) cycle.push_back(idx(r, c));
    }
    for (int r = rows - 1; r >= 1; --r) cycle.push_back(idx(r, 0));
    return cycle;
}

int area_at_tick(const SimConfig& cfg, int agent, int tick) {
    const int k = cfg.n_areas();
    const int start = start_area(cfg, agent);
    switch (cfg.policy) {
        case MovementPolicy::random_within:
            return start;
        case MovementPolicy::lawnmower_across: {
            const std::vector<int> cycle = lawnmower_cycle(cfg.area_rows, cfg.area_cols);
            const int pos = static_cast<int>(
                std::find(cycle.begin(), cycle.end(), start) - cycle.begin());
            return cycle[static_cast<std::size_t>((pos + tick) % k)];
        }
        case MovementPolicy::patrol_to_and_fro: {
            // forward pass over all areas starting at `start`, then the
            // reverse pass; each area is visited twice per 2K ticks
            const int t = tick % (2 * k);
            const int off = t < k ? t : 2 * k - 1 - t;
            return (start + off) % k;
        }
    }
    throw ArgumentError("area_at_tick: bad policy");
}

Location step_movement(const Rect& area, Rng& rng) {
    return {rng.uniform(area.x0, area.x1), rng.uniform(area.y0, area.y1)};
}

Trace make_trace(const SimConfig& cfg, const AreaPartition& partition,
                 const MeasureFn& measure) {
    cfg.validate();
    if (cfg.n_areas() != partition.n_areas())
        throw ArgumentError("make_trace: config and partition disagree on K");
    Trace trace;
    trace.cfg = cfg;
    std::vector<Rng> streams;
    streams.reserve(static_cast<std::size_t>(cfg.n_agents));
    for (int a = 0; a < cfg.n_agents; ++a)
        streams.emplace_back(mix64(cfg.seed) ^ mix64(0xA6E57ULL + static_cast<std::uint64_t>(a)));
    for (int tick = 0; tick < cfg.steps; ++tick) {
        for (int a = 0; a < cfg.n_agents; ++a) {
            GatherBatch batch;
            batch.tick = tick;
            batch.agent = a;
            batch.area = area_at_tick(cfg, a, tick);
            const Rect& rect = partition.areas[static_cast<std::size_t>(batch.area)];
            for (int o = 0; o < cfg.obs_per_step; ++o) {
                const Location pos = step_movement(rect, streams[static_cast<std::size_t>(a)]);
                auto [loc, value] = measure(pos);
                batch.data.append(std::move(loc), value);
            }
            trace.batches.push_back(std::move(batch));
        }
    }
    return trace;
}

// ---- fleet protocol ----------------------------------------------------------

namespace {

const SupportSet& support_of(const FleetState& fleet, int area) {
    return fleet.partition.supports[static_cast<std::size_t>(area)];
}

void log_event(FleetState& fleet, int agent, std::string event, int area,
               std::uint64_t bytes = 0, int transfers = 0) {
    fleet.events.push_back({fleet.tick, agent, std::move(event), area, bytes, transfers});
}

/// Fold any raw observations into the agent's current summary and drop them.
void fold_pending(FleetState& fleet, AgentState& a) {
    if (a.pending_raw.empty()) return;
    const SupportSet& s = support_of(fleet, a.current_area);
    a.current_summary =
        assimilate(a.current_summary, build_local_summary(a.pending_raw, s, fleet.hyper));
    a.pending_raw = Dataset{};
}

std::uint64_t record_bytes(const LocalSummary& s) {
    return summary_record_bytes(static_cast<int>(s.nu.size()));
}

} // namespace

FleetState make_fleet(const SimConfig& cfg, const AreaPartition& partition,
                      const Hyperparams& h) {
    cfg.validate();
    h.validate();
    if (cfg.n_areas() != partition.n_areas())
        throw ArgumentError("make_fleet: config and partition disagree on K");
    FleetState fleet;
    fleet.cfg = cfg;
    fleet.partition = partition;
    fleet.hyper = h;
    for (int a = 0; a < cfg.n_agents; ++a) {
        AgentState st;
        st.agent_id = a;
        st.current_area = start_area(cfg, a);
        st.current_summary = LocalSummary::zero(support_of(fleet, st.current_area));
        st.rng_stream = mix64(cfg.seed) ^ mix64(0xA6E57ULL + static_cast<std::uint64_t>(a));
        const bool first = fleet.visited.insert(st.current_area).second;
        fleet.agents.push_back(std::move(st));
        log_event(fleet, a, first ? "support_construct" : "support_adopt",
                  fleet.agents.back().current_area);
    }
    return fleet;
}

void gather(FleetState& fleet, int agent, const Dataset& batch) {
    AgentState& a = fleet.agents[static_cast<std::size_t>(agent)];
    for (std::size_t i = 0; i < batch.size(); ++i)
        a.pending_raw.append(batch.locations[i], batch.values[static_cast<Eigen::Index>(i)]);
}

void transit_eager(FleetState& fleet, int agent, int new_area) {
    AgentState& a = fleet.agents[static_cast<std::size_t>(agent)];
    if (new_area == a.current_area)
        throw ArgumentError("transit_eager: agent already in that area");
    fold_pending(fleet, a);
    const SupportSet& s_old = support_of(fleet, a.current_area);
    const SupportSet& s_new = support_of(fleet, new_area);
    a.current_summary = transfer_local(a.current_summary, s_old, s_new, fleet.hyper);
    ++fleet.counters.transits;
    ++fleet.counters.transit_transfers;
    a.current_area = new_area;
    fleet.visited.insert(new_area);
    log_event(fleet, agent, "transit_transfer", new_area, 0, 1);
}

void lazy_depart(FleetState& fleet, int agent, std::span<const int> same_tick_leavers) {
    AgentState& a = fleet.agents[static_cast<std::size_t>(agent)];
    const int old_area = a.current_area;
    if (old_area < 0) throw ArgumentError("lazy_depart: agent already mid-transit");
    fold_pending(fleet, a);

    AgentState* stayer = nullptr;
    for (AgentState& other : fleet.agents) {
        if (other.agent_id == agent || other.current_area != old_area) continue;
        if (std::find(same_tick_leavers.begin(), same_tick_leavers.end(), other.agent_id) !=
            same_tick_leavers.end())
            continue;
        if (!stayer || other.agent_id < stayer->agent_id) stayer = &other;
    }
    if (stayer) {
        stayer->current_summary = assimilate(stayer->current_summary, a.current_summary);
        fleet.counters.bytes_sent += record_bytes(a.current_summary);
        log_event(fleet, agent, "summary_handoff", old_area, record_bytes(a.current_summary));
    } else {
        a.backups[old_area] = a.current_summary;
        log_event(fleet, agent, "summary_backup", old_area);
    }
    a.current_summary = LocalSummary{};
    a.current_area = -1;
    ++fleet.counters.transits;
}

void lazy_arrive(FleetState& fleet, int agent, int new_area) {
    AgentState& a = fleet.agents[static_cast<std::size_t>(agent)];
    bool occupied = false;
    for (const AgentState& other : fleet.agents)
        if (other.agent_id != agent && other.current_area == new_area) occupied = true;

    const SupportSet& s_new = support_of(fleet, new_area);
    if (occupied) {
        a.current_summary = LocalSummary::zero(s_new);
        log_event(fleet, agent, "support_adopt", new_area);
    } else {
        // retrieve-and-remove every backup of this area, wherever it is held
        std::vector<LocalSummary> retrieved;
        std::uint64_t bytes = 0;
        for (AgentState& holder : fleet.agents) {
            const auto it = holder.backups.find(new_area);
            if (it == holder.backups.end()) continue;
            if (holder.agent_id != agent) bytes += record_bytes(it->second);
            retrieved.push_back(std::move(it->second));
            holder.backups.erase(it);
        }
        if (!retrieved.empty()) {
            LocalSummary sum = retrieved.front();
            for (std::size_t i = 1; i < retrieved.size(); ++i)
                sum = assimilate(sum, retrieved[i]);
            a.current_summary = std::move(sum);
            fleet.counters.bytes_sent += bytes;
            log_event(fleet, agent, "backup_retrieve", new_area, bytes,
                      static_cast<int>(retrieved.size()));
        } else {
            a.current_summary = LocalSummary::zero(s_new);
            const bool first = fleet.visited.insert(new_area).second;
            log_event(fleet, agent, first ? "support_construct" : "support_adopt", new_area);
        }
    }
    a.current_area = new_area;
    fleet.visited.insert(new_area);
}

void transit_lazy(FleetState& fleet, int agent, int new_area) {
    const AgentState& a = fleet.agents[static_cast<std::size_t>(agent)];
    if (new_area == a.current_area)
        throw ArgumentError("transit_lazy: agent already in that area");
    const int self[] = {agent};
    lazy_depart(fleet, agent, self);
    lazy_arrive(fleet, agent, new_area);
}

FleetState replay_trace(const Trace& trace, const AreaPartition& partition,
                        const Hyperparams& h) {
    FleetState fleet = make_fleet(trace.cfg, partition, h);
    std::size_t next_batch = 0;
    for (int tick = 0; tick < trace.cfg.steps; ++tick) {
        fleet.tick = tick;
        // movement phase: all departures first, then all arrivals, id order
        std::vector<int> movers;
        std::vector<int> destinations;
        for (int a = 0; a < trace.cfg.n_agents; ++a) {
            const int dest = area_at_tick(trace.cfg, a, tick);
            if (dest != fleet.agents[static_cast<std::size_t>(a)].current_area) {
                movers.push_back(a);
                destinations.push_back(dest);
            }
        }
        if (trace.cfg.mode == FusionMode::eager) {
            for (std::size_t i = 0; i < movers.size(); ++i)
                transit_eager(fleet, movers[i], destinations[i]);
        } else {
            for (int m : movers) lazy_depart(fleet, m, movers);
            for (std::size_t i = 0; i < movers.size(); ++i)
                lazy_arrive(fleet, movers[i], destinations[i]);
        }
        // gather phase
        while (next_batch < trace.batches.size() &&
               trace.batches[next_batch].tick == tick) {
            const GatherBatch& b = trace.batches[next_batch];
            if (b.area != fleet.agents[static_cast<std::size_t>(b.agent)].current_area)
                throw ArgumentError("replay_trace: trace area does not match fleet state");
            gather(fleet, b.agent, b.data);
            ++next_batch;
        }
    }
    fleet.tick = trace.cfg.steps;
    return fleet;
}

// ---- prediction --------------------------------------------------------------

int responsible_agent(const FleetState& fleet, int area) {
    if (fleet.agents.empty()) throw ArgumentError("responsible_agent: empty fleet");
    for (const AgentState& a : fleet.agents)
        if (a.current_area == area) return a.agent_id;
    for (const AgentState& a : fleet.agents)
        if (a.backups.count(area)) return a.agent_id;
    int best = 0;
    int best_dist = std::numeric_limits<int>::max();
    for (const AgentState& a : fleet.agents) {
        const int d = std::abs(a.current_area - area);
        if (d < best_dist) {
            best_dist = d;
            best = a.agent_id;
        }
    }
    return best;
}

PredictPhaseResult predict_phase(FleetState& fleet, std::span<const Location> queries) {
    if (fleet.agents.empty()) throw ArgumentError("predict_phase: empty fleet");
    const Hyperparams& h = fleet.hyper;
    const bool plus = fleet.cfg.predictor == PredictorKind::gpddfplus;
    if (!plus && fleet.cfg.predictor != PredictorKind::gpddf)
        throw ArgumentError("predict_phase: only gpddf/gpddfplus run through the fleet");

    // GP-DDF discards raw data at summarization; GP-DDF+ keeps its own
    if (!plus)
        for (AgentState& a : fleet.agents) fold_pending(fleet, a);

    PredictPhaseResult out;
    out.predictions.resize(queries.size());
    out.responsible_agent.resize(queries.size());
    std::map<int, std::vector<std::size_t>> groups; // responsible agent -> query indices
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const int area = fleet.partition.area_of(queries[q]);
        const int agent = responsible_agent(fleet, area);
        out.responsible_agent[q] = agent;
        groups[agent].push_back(q);
    }

    // what agent j sends when asked for its summary
    const auto exchanged_summary = [&](const AgentState& j) {
        if (j.pending_raw.empty()) return j.current_summary;
        const SupportSet& s = support_of(fleet, j.current_area);
        return assimilate(j.current_summary,
                          build_local_summary(j.pending_raw, s, fleet.hyper));
    };

    for (const auto& [agent, qidx] : groups) {
        AgentState& me = fleet.agents[static_cast<std::size_t>(agent)];
        const SupportSet& s = support_of(fleet, me.current_area);

        std::vector<LocalSummary> gathered;
        std::uint64_t bytes = 0;
        for (const AgentState& j : fleet.agents) {
            if (j.agent_id != agent) {
                LocalSummary ls = exchanged_summary(j);
                bytes += record_bytes(ls);
                gathered.push_back(std::move(ls));
            }
            for (const auto& [area, b] : j.backups) {
                if (j.agent_id != agent) bytes += record_bytes(b);
                gathered.push_back(b);
            }
        }

        int transfers = 0;
        std::vector<LocalSummary> on_support;
        on_support.push_back(me.current_summary);
        LocalSummary own_local = LocalSummary::zero(s);
        if (plus && !me.pending_raw.empty()) {
            own_local = build_local_summary(me.pending_raw, s, h);
            on_support.push_back(own_local);
        }
        for (LocalSummary& g : gathered) {
            if (g.support_id == s.id) {
                on_support.push_back(std::move(g));
            } else {
                const SupportSet& from =
                    fleet.partition.supports[static_cast<std::size_t>(g.support_id)];
                on_support.push_back(transfer_local(g, from, s, h));
                ++transfers;
            }
        }
        const GlobalSummary global = aggregate_global(on_support, s, h);

        std::vector<Location> qlocs;
        qlocs.reserve(qidx.size());
        for (std::size_t q : qidx) qlocs.push_back(queries[q]);
        const std::vector<PredictiveDistribution> preds =
            plus ? gpddfplus_predict_batch(global, own_local, me.pending_raw, qlocs, s, h)
                 : gpddf_predict_batch(global, qlocs, s, h);
        for (std::size_t i = 0; i < qidx.size(); ++i)
            out.predictions[qidx[i]] = preds[i];

        out.transfers += transfers;
        out.bytes += bytes;
        fleet.counters.predict_transfers += transfers;
        fleet.counters.bytes_sent += bytes;
        log_event(fleet, agent, "predict", me.current_area, bytes, transfers);
    }
    return out;
}

MemoryReport memory_accounting(const FleetState& fleet) {
    MemoryReport r;
    const auto scalars = [](const LocalSummary& s) {
        return static_cast<std::size_t>(s.nu.size()) +
               static_cast<std::size_t>(s.psi.rows()) * static_cast<std::size_t>(s.psi.cols());
    };
    for (const AgentState& a : fleet.agents) {
        std::size_t n = scalars(a.current_summary);
        for (const auto& [area, b] : a.backups) n += scalars(b);
        r.per_agent.push_back(n);
        r.total += n;
        r.max_per_agent = std::max(r.max_per_agent, n);
    }
    return r;
}

void write_event_log(const std::string& path, const FleetState& fleet) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "tick,agent,event,area,bytes,transfers\n";
    for (const EventRecord& e : fleet.events)
        out << e.tick << "," << e.agent << "," << e.event << "," << e.area << "," << e.bytes
            << "," << e.transfers << "\n";
    if (!out) throw IoError(path + ": write failed");
}

// ---- checkpoint ----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'P', 'F', 'L', 'E', 'E', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated input");
    return v;
}

void put_dataset(std::ostream& os, const Dataset& d) {
    put<std::uint64_t>(os, d.size());
    put<std::uint32_t>(os, d.empty() ? 0u : static_cast<std::uint32_t>(d.locations[0].dim()));
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (int k = 0; k < d.locations[i].dim(); ++k) put<double>(os, d.locations[i].coords[k]);
        put<double>(os, d.values[static_cast<Eigen::Index>(i)]);
    }
}

Dataset get_dataset(std::istream& is) {
    const auto n = get<std::uint64_t>(is);
    const auto dim = get<std::uint32_t>(is);
    Dataset d;
    for (std::uint64_t i = 0; i < n; ++i) {
        Eigen::VectorXd c(dim);
        for (std::uint32_t k = 0; k < dim; ++k) c[k] = get<double>(is);
        d.append(Location(std::move(c)), get<double>(is));
    }
    return d;
}

} // namespace

void save_checkpoint(std::ostream& os, const FleetState& fleet) {
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, 1); // version
    const SimConfig& c = fleet.cfg;
    put<std::int32_t>(os, c.n_agents);
    put<std::int32_t>(os, c.area_rows);
    put<std::int32_t>(os, c.area_cols);
    put<std::int32_t>(os, c.support_size);
    put<double>(os, c.support_margin);
    put<std::int32_t>(os, static_cast<std::int32_t>(c.policy));
    put<std::int32_t>(os, c.steps);
    put<std::int32_t>(os, c.obs_per_step);
    put<std::uint64_t>(os, c.seed);
    put<std::int32_t>(os, static_cast<std::int32_t>(c.mode));
    put<std::int32_t>(os, static_cast<std::int32_t>(c.predictor));
    put<double>(os, fleet.partition.domain.x0);
    put<double>(os, fleet.partition.domain.y0);
    put<double>(os, fleet.partition.domain.x1);
    put<double>(os, fleet.partition.domain.y1);
    put<double>(os, fleet.hyper.signal_var);
    put<double>(os, fleet.hyper.noise_var);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(fleet.hyper.dim()));
    for (int i = 0; i < fleet.hyper.dim(); ++i) put<double>(os, fleet.hyper.length_scales[i]);
    put<double>(os, fleet.hyper.prior_mean);
    put<std::int32_t>(os, fleet.tick);
    put<std::uint64_t>(os, fleet.visited.size());
    for (int v : fleet.visited) put<std::int32_t>(os, v);
    put<std::int64_t>(os, fleet.counters.transits);
    put<std::int64_t>(os, fleet.counters.transit_transfers);
    put<std::int64_t>(os, fleet.counters.predict_transfers);
    put<std::uint64_t>(os, fleet.counters.bytes_sent);
    for (const AgentState& a : fleet.agents) {
        put<std::int32_t>(os, a.agent_id);
        put<std::int32_t>(os, a.current_area);
        put<std::uint64_t>(os, a.rng_stream);
        write_record(os, a.current_summary);
        put<std::uint64_t>(os, a.backups.size());
        for (const auto& [area, b] : a.backups) {
            put<std::int32_t>(os, area);
            write_record(os, b);
        }
        put_dataset(os, a.pending_raw);
    }
    if (!os) throw IoError("checkpoint: write failed");
}

FleetState load_checkpoint(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw IoError("checkpoint: bad magic");
    const auto version = get<std::uint32_t>(is);
    if (version != 1) throw IoError("checkpoint: unsupported version");
    SimConfig c;
    c.n_agents = get<std::int32_t>(is);
    c.area_rows = get<std::int32_t>(is);
    c.area_cols = get<std::int32_t>(is);
    c.support_size = get<std::int32_t>(is);
    c.support_margin = get<double>(is);
    c.policy = static_cast<MovementPolicy>(get<std::int32_t>(is));
    c.steps = get<std::int32_t>(is);
    c.obs_per_step = get<std::int32_t>(is);
    c.seed = get<std::uint64_t>(is);
    c.mode = static_cast<FusionMode>(get<std::int32_t>(is));
    c.predictor = static_cast<PredictorKind>(get<std::int32_t>(is));
    Rect domain;
    domain.x0 = get<double>(is);
    domain.y0 = get<double>(is);
    domain.x1 = get<double>(is);
    domain.y1 = get<double>(is);
    Hyperparams h;
    h.signal_var = get<double>(is);
    h.noise_var = get<double>(is);
    const auto dim = get<std::uint32_t>(is);
    h.length_scales.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) h.length_scales[i] = get<double>(is);
    h.prior_mean = get<double>(is);

    FleetState fleet;
    fleet.cfg = c;
    fleet.partition =
        make_partition(domain, c.area_rows, c.area_cols, c.support_size, c.support_margin);
    fleet.hyper = h;
    fleet.tick = get<std::int32_t>(is);
    const auto nv = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < nv; ++i) fleet.visited.insert(get<std::int32_t>(is));
    fleet.counters.transits = get<std::int64_t>(is);
    fleet.counters.transit_transfers = get<std::int64_t>(is);
    fleet.counters.predict_transfers = get<std::int64_t>(is);
    fleet.counters.bytes_sent = get<std::uint64_t>(is);
    for (int a = 0; a < c.n_agents; ++a) {
        AgentState st;
        st.agent_id = get<std::int32_t>(is);
        st.current_area = get<std::int32_t>(is);
        st.rng_stream = get<std::uint64_t>(is);
        st.current_summary = read_local_record(is);
        const auto nb = get<std::uint64_t>(is);
        for (std::uint64_t i = 0; i < nb; ++i) {
            const int area = get<std::int32_t>(is);
            st.backups[area] = read_local_record(is);
        }
        st.pending_raw = get_dataset(is);
        fleet.agents.push_back(std::move(st));
    }
    return fleet;
}

} // namespace gpfuse
