#include "gpfuse/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "gpfuse/csv.hpp"
#include "gpfuse/transfer.hpp"

namespace gpfuse {

double rmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ArgumentError("rmse: length mismatch");
    if (pred.empty()) throw ArgumentError("rmse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

const MethodResult* ExperimentReport::find(const std::string& name) const {
    for (const MethodResult& m : methods)
        if (m.method == name) return &m;
    return nullptr;
}

namespace {

struct Prepared {
    FieldSample field;
    AreaPartition partition;
    Trace trace;
    std::vector<Location> queries;
    std::vector<double> truth;
    std::vector<std::vector<Location>> area_query_locs; // per area
    std::vector<std::vector<std::size_t>> area_query_idx;
    std::vector<Dataset> visit_blocks; // one block per (agent, contiguous stay)
    std::vector<int> visit_area;
    std::vector<Dataset> agent_all;    // per agent, all data pooled
    std::vector<Dataset> area_pooled;  // per area, all data pooled
    std::vector<std::vector<int>> area_obs_by_agent; // per area: obs count per agent
};

Prepared prepare(const ExperimentConfig& cfg) {
    Prepared p;
    p.field = generate_gp_field(cfg.seed, cfg.grid_w, cfg.grid_h, cfg.hyper);
    const Rect domain{0.0, 0.0, static_cast<double>(cfg.grid_w),
                      static_cast<double>(cfg.grid_h)};
    p.partition = make_partition(domain, cfg.sim.area_rows, cfg.sim.area_cols,
                                 cfg.sim.support_size, cfg.sim.support_margin);

    const FieldSample& field = p.field;
    const MeasureFn measure = [&field](const Location& pos) {
        const int c = field.snap(pos);
        return std::make_pair(field.cells[static_cast<std::size_t>(c)], field.measured[c]);
    };
    SimConfig sim = cfg.sim;
    sim.seed = cfg.seed;
    p.trace = make_trace(sim, p.partition, measure);

    p.queries = p.field.cells;
    p.truth.assign(p.field.measured.data(), p.field.measured.data() + p.field.n_cells());
    const int k = p.partition.n_areas();
    p.area_query_locs.resize(static_cast<std::size_t>(k));
    p.area_query_idx.resize(static_cast<std::size_t>(k));
    for (std::size_t q = 0; q < p.queries.size(); ++q) {
        const int a = p.partition.area_of(p.queries[q]);
        p.area_query_locs[static_cast<std::size_t>(a)].push_back(p.queries[q]);
        p.area_query_idx[static_cast<std::size_t>(a)].push_back(q);
    }

    p.agent_all.resize(static_cast<std::size_t>(sim.n_agents));
    p.area_pooled.resize(static_cast<std::size_t>(k));
    p.area_obs_by_agent.assign(static_cast<std::size_t>(k),
                               std::vector<int>(static_cast<std::size_t>(sim.n_agents), 0));
    std::vector<int> cur_area(static_cast<std::size_t>(sim.n_agents), -1);
    std::vector<int> cur_block(static_cast<std::size_t>(sim.n_agents), -1);
    for (const GatherBatch& b : p.trace.batches) {
        const auto ag = static_cast<std::size_t>(b.agent);
        if (b.area != cur_area[ag]) {
            cur_area[ag] = b.area;
            cur_block[ag] = static_cast<int>(p.visit_blocks.size());
            p.visit_blocks.emplace_back();
            p.visit_area.push_back(b.area);
        }
        Dataset& block = p.visit_blocks[static_cast<std::size_t>(cur_block[ag])];
        for (std::size_t i = 0; i < b.data.size(); ++i) {
            const double v = b.data.values[static_cast<Eigen::Index>(i)];
            block.append(b.data.locations[i], v);
            p.agent_all[ag].append(b.data.locations[i], v);
            p.area_pooled[static_cast<std::size_t>(b.area)].append(b.data.locations[i], v);
            p.area_obs_by_agent[static_cast<std::size_t>(b.area)][ag] +=
                1;
        }
    }
    return p;
}

/// Agent answering for an area in the common-support methods: most
/// observations gathered there, ties to the lowest id; fallback agent 0.
int common_mode_owner(const Prepared& p, int area) {
    const auto& counts = p.area_obs_by_agent[static_cast<std::size_t>(area)];
    int best = 0;
    for (std::size_t g = 1; g < counts.size(); ++g)
        if (counts[g] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(g);
    return best;
}

struct MethodOutput {
    std::vector<PredictiveDistribution> preds;
    long transit_transfers = 0;
    long predict_transfers = 0;
    std::uint64_t bytes = 0;
    std::optional<FleetState> fleet; // kept for event logs
};

std::uint64_t raw_bytes(std::size_t n_obs, int dim) {
    return static_cast<std::uint64_t>(n_obs) * static_cast<std::uint64_t>(dim + 1) * 8u;
}

MethodOutput run_method(const std::string& name, const ExperimentConfig& cfg,
                        const Prepared& p) {
    const Hyperparams& h = cfg.hyper;
    const int k = p.partition.n_areas();
    MethodOutput out;
    out.preds.resize(p.queries.size());

    const auto per_area = [&](auto&& model_for_area) {
        for (int a = 0; a < k; ++a) {
            const auto& locs = p.area_query_locs[static_cast<std::size_t>(a)];
            const auto& idx = p.area_query_idx[static_cast<std::size_t>(a)];
            if (locs.empty()) continue;
            auto preds = model_for_area(a, locs);
            for (std::size_t i = 0; i < idx.size(); ++i) out.preds[idx[i]] = preds[i];
        }
    };

    if (name == "local-pitcs" || name == "full-pitcs") {
        const bool full = name == "full-pitcs";
        per_area([&](int a, const std::vector<Location>& locs) {
            std::vector<Dataset> blocks;
            for (std::size_t v = 0; v < p.visit_blocks.size(); ++v)
                if (full || p.visit_area[v] == a) blocks.push_back(p.visit_blocks[v]);
            if (full) {
                const std::size_t total = p.area_pooled[static_cast<std::size_t>(a)].size();
                std::size_t all = 0;
                for (const Dataset& b : blocks) all += b.size();
                out.bytes += raw_bytes(all - total, h.dim());
            }
            PitcModel model(blocks, p.partition.supports[static_cast<std::size_t>(a)], h);
            std::vector<PredictiveDistribution> preds;
            preds.reserve(locs.size());
            for (const Location& x : locs) preds.push_back(model.predict(x));
            return preds;
        });
    } else if (name == "local-gps") {
        per_area([&](int a, const std::vector<Location>& locs) {
            const Dataset& data = p.area_pooled[static_cast<std::size_t>(a)];
            std::vector<PredictiveDistribution> preds;
            preds.reserve(locs.size());
            if (data.empty()) {
                for (std::size_t i = 0; i < locs.size(); ++i)
                    preds.push_back({h.prior_mean, h.signal_var + h.noise_var});
                return preds;
            }
            // factor once per area
            Eigen::MatrixXd kdd =
                cov_matrix(data.locations, data.locations, h, NoiseMode::diagonal);
            SpdFactor f = factor_spd(std::move(kdd), h.signal_var, "local_gps Sigma_DD");
            const Eigen::VectorXd alpha =
                f.llt.solve(Eigen::VectorXd(data.values.array() - h.prior_mean));
            const double sxx = h.signal_var + h.noise_var;
            for (const Location& x : locs) {
                Eigen::VectorXd kxd(data.size());
                for (std::size_t i = 0; i < data.size(); ++i)
                    kxd[static_cast<Eigen::Index>(i)] = se_cov(x, data.locations[i], h);
                PredictiveDistribution pd;
                pd.mean = h.prior_mean + kxd.dot(alpha);
                pd.variance = detail::clamp_variance(sxx - kxd.dot(f.llt.solve(kxd)), sxx);
                preds.push_back(pd);
            }
            return preds;
        });
    } else if (name == "gpddf" || name == "gpddfplus") {
        const Rect& domain = p.partition.domain;
        const SupportSet common = make_support_set(
            domain, static_cast<SupportId>(k) + 1000, cfg.sim.support_size,
            cfg.sim.support_margin);
        std::vector<LocalSummary> locals;
        for (const Dataset& d : p.agent_all)
            locals.push_back(build_local_summary(d, common, h));
        const GlobalSummary global = aggregate_global(locals, common, h);
        // every agent ships its local summary to every responsible agent
        out.bytes += static_cast<std::uint64_t>(p.agent_all.size() > 1
                                                    ? (p.agent_all.size() - 1) * k
                                                    : 0) *
                     summary_record_bytes(common.size());
        if (name == "gpddf") {
            out.preds = gpddf_predict_batch(global, p.queries, common, h);
        } else {
            per_area([&](int a, const std::vector<Location>& locs) {
                const int owner = common_mode_owner(p, a);
                return gpddfplus_predict_batch(global,
                                               locals[static_cast<std::size_t>(owner)],
                                               p.agent_all[static_cast<std::size_t>(owner)],
                                               locs, common, h);
            });
        }
    } else if (name == "gpddf-ass" || name == "gpddfplus-ass") {
        Trace trace = p.trace;
        trace.cfg.predictor =
            name == "gpddf-ass" ? PredictorKind::gpddf : PredictorKind::gpddfplus;
        trace.cfg.mode = cfg.sim.mode;
        FleetState fleet = replay_trace(trace, p.partition, h);
        PredictPhaseResult res = predict_phase(fleet, p.queries);
        out.preds = std::move(res.predictions);
        out.transit_transfers = fleet.counters.transit_transfers;
        out.predict_transfers = fleet.counters.predict_transfers;
        out.bytes = fleet.counters.bytes_sent;
        out.fleet = std::move(fleet);
    } else {
        throw ArgumentError("run_experiment: unknown method '" + name + "'");
    }
    return out;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.hyper.validate();
    cfg.sim.validate();
    const Prepared p = prepare(cfg);

    ExperimentReport report;
    report.seed = cfg.seed;
    report.lengthscale = cfg.hyper.length_scales[0];

    std::vector<double> means(p.queries.size());
    for (const std::string& name : cfg.methods) {
        const auto t0 = std::chrono::steady_clock::now();
        MethodOutput mo = run_method(name, cfg, p);
        const auto t1 = std::chrono::steady_clock::now();

        MethodResult r;
        r.method = name;
        for (std::size_t q = 0; q < p.queries.size(); ++q) means[q] = mo.preds[q].mean;
        r.rmse = rmse(means, p.truth);
        r.transit_transfers = mo.transit_transfers;
        r.predict_transfers = mo.predict_transfers;
        r.bytes = mo.bytes;
        r.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        report.methods.push_back(r);

        if (!cfg.output_dir.empty()) {
            write_predictions_csv(cfg.output_dir + "/varmap_" + name + ".csv", p.queries,
                                  mo.preds);
            if (mo.fleet)
                write_event_log(cfg.output_dir + "/events_" + name + ".csv", *mo.fleet);
        }
    }

    if (const MethodResult* base = report.find("local-pitcs"))
        for (MethodResult& m : report.methods) m.reduction = base->rmse - m.rmse;
    return report;
}

void write_report_csv(const std::string& path, std::span<const ExperimentReport> reports) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "seed,lengthscale,method,rmse,rmse_reduction,transit_transfers,predict_transfers,"
           "bytes\n";
    for (const ExperimentReport& r : reports)
        for (const MethodResult& m : r.methods)
            out << r.seed << "," << format_double(r.lengthscale) << "," << m.method << ","
                << format_double(m.rmse) << "," << format_double(m.reduction) << ","
                << m.transit_transfers << "," << m.predict_transfers << "," << m.bytes << "\n";
    if (!out) throw IoError(path + ": write failed");
}

void write_timings_csv(const std::string& path, std::span<const ExperimentReport> reports) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << "seed,lengthscale,method,wall_ms\n";
    for (const ExperimentReport& r : reports)
        for (const MethodResult& m : r.methods)
            out << r.seed << "," << format_double(r.lengthscale) << "," << m.method << ","
                << format_double(m.wall_ms) << "\n";
}

SweepResult sweep_lengthscales(const SweepConfig& cfg) {
    SweepResult out;
    for (double ell : cfg.lengthscales) {
        for (int s = 0; s < cfg.seeds; ++s) {
            ExperimentConfig ec = cfg.base;
            ec.hyper.length_scales = Eigen::VectorXd::Constant(ec.hyper.dim(), ell);
            ec.seed = cfg.base.seed + static_cast<std::uint64_t>(s);
            ec.output_dir.clear();
            out.runs.push_back(run_experiment(ec));
        }
    }
    return out;
}

namespace {
double mean_stat(const SweepResult& sweep, double ell, const std::string& method,
                 bool reduction) {
    double sum = 0.0;
    int n = 0;
    for (const ExperimentReport& r : sweep.runs) {
        if (r.lengthscale != ell) continue;
        if (const MethodResult* m = r.find(method)) {
            sum += reduction ? m->reduction : m->rmse;
            ++n;
        }
    }
    if (n == 0) throw ArgumentError("sweep: no runs for requested cell");
    return sum / n;
}
} // namespace

double SweepResult::mean_reduction(double ell, const std::string& method) const {
    return mean_stat(*this, ell, method, true);
}
double SweepResult::mean_rmse(double ell, const std::string& method) const {
    return mean_stat(*this, ell, method, false);
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
    write_report_csv(path, sweep.runs);
}

} // namespace gpfuse
