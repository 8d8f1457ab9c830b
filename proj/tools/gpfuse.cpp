// gpfuse command line: field generation, decentralized-fusion simulation,
// one-shot prediction, hyperparameter learning, and the loss-bound report.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <gpfuse/config.hpp>
#include <gpfuse/csv.hpp>
#include <gpfuse/experiment.hpp>
#include <gpfuse/hyperlearn.hpp>
#include <gpfuse/transfer.hpp>

using namespace gpfuse;

namespace {

/// Flags mirror config keys one-to-one; a passed flag overrides the file.
struct ConfigOverlay {
    CLI::App* cmd;
    std::string config_path;
    std::vector<std::pair<std::string, std::string*>> bindings;
    std::vector<std::unique_ptr<std::string>> storage;

    explicit ConfigOverlay(CLI::App* c) : cmd(c) {
        cmd->add_option("--config", config_path, "key=value config file");
    }

    void key(const std::string& name, const std::string& help) {
        storage.push_back(std::make_unique<std::string>());
        bindings.emplace_back(name, storage.back().get());
        cmd->add_option("--" + name, *storage.back(), help);
    }

    KeyValueConfig resolve() const {
        KeyValueConfig cfg;
        if (!config_path.empty()) cfg = KeyValueConfig::from_file(config_path);
        for (const auto& [name, value] : bindings)
            if (cmd->count("--" + name) > 0) cfg.set(name, *value);
        return cfg;
    }
};

Hyperparams hyper_from_config(const KeyValueConfig& cfg) {
    Hyperparams h;
    h.signal_var = cfg.get_double("field.signal_var", 1.0);
    h.noise_var = cfg.get_double("field.noise_var", 0.01);
    const std::vector<double> ls =
        cfg.get_doubles("field.length_scales", {cfg.get_double("field.lengthscale", 10.0)});
    if (ls.size() == 1) {
        h.length_scales = Eigen::VectorXd::Constant(2, ls[0]);
    } else {
        h.length_scales = Eigen::Map<const Eigen::VectorXd>(ls.data(),
                                                            static_cast<Eigen::Index>(ls.size()));
    }
    h.prior_mean = cfg.get_double("field.prior_mean", 0.0);
    return h;
}

void add_field_keys(ConfigOverlay& o) {
    o.key("field.width", "grid width in cells");
    o.key("field.height", "grid height in cells");
    o.key("field.seed", "field / run seed");
    o.key("field.signal_var", "signal variance");
    o.key("field.noise_var", "noise variance");
    o.key("field.lengthscale", "isotropic length-scale");
    o.key("field.length_scales", "comma-separated per-dimension length-scales");
    o.key("field.prior_mean", "constant prior mean");
}

void add_sim_keys(ConfigOverlay& o) {
    o.key("sim.agents", "number of agents");
    o.key("sim.area_rows", "area grid rows");
    o.key("sim.area_cols", "area grid columns");
    o.key("sim.support_size", "support points per area");
    o.key("sim.margin", "support margin fraction (default 0.10)");
    o.key("sim.policy", "random_within | lawnmower_across | patrol_to_and_fro");
    o.key("sim.steps", "simulation ticks");
    o.key("sim.obs_per_step", "observations per agent per tick");
    o.key("sim.mode", "eager | lazy");
    o.key("sim.predictor", "gpddf | gpddfplus");
}

ExperimentConfig experiment_from_config(const KeyValueConfig& cfg) {
    ExperimentConfig ec;
    ec.grid_w = cfg.get_int("field.width", 50);
    ec.grid_h = cfg.get_int("field.height", 50);
    ec.seed = cfg.get_u64("field.seed", 1);
    ec.hyper = hyper_from_config(cfg);
    ec.sim.n_agents = cfg.get_int("sim.agents", 4);
    ec.sim.area_rows = cfg.get_int("sim.area_rows", 2);
    ec.sim.area_cols = cfg.get_int("sim.area_cols", 2);
    ec.sim.support_size = cfg.get_int("sim.support_size", 18);
    ec.sim.support_margin = cfg.get_double("sim.margin", 0.10);
    ec.sim.policy = movement_policy_from_string(cfg.get_string("sim.policy", "random_within"));
    ec.sim.steps = cfg.get_int("sim.steps", 25);
    ec.sim.obs_per_step = cfg.get_int("sim.obs_per_step", 1);
    ec.sim.seed = ec.seed;
    ec.sim.mode = fusion_mode_from_string(cfg.get_string("sim.mode", "lazy"));
    ec.sim.predictor = predictor_from_string(cfg.get_string("sim.predictor", "gpddf"));
    const std::string methods = cfg.get_string(
        "run.methods", "local-pitcs,full-pitcs,gpddf,gpddf-ass,gpddfplus,gpddfplus-ass,local-gps");
    ec.methods.clear();
    std::stringstream ss(methods);
    for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) ec.methods.push_back(m);
    return ec;
}

int cmd_genfield(const KeyValueConfig& cfg, const std::string& out,
                 const std::string& latent_out) {
    const Hyperparams h = hyper_from_config(cfg);
    const FieldSample f = generate_gp_field(cfg.get_u64("field.seed", 1),
                                            cfg.get_int("field.width", 50),
                                            cfg.get_int("field.height", 50), h);
    write_csv_dataset(out, f.as_dataset());
    if (!latent_out.empty()) {
        Dataset lat;
        lat.locations = f.cells;
        lat.values = f.latent;
        write_csv_dataset(latent_out, lat);
    }
    std::cout << "wrote " << f.n_cells() << " cells to " << out << "\n";
    return 0;
}

int cmd_simulate(const KeyValueConfig& cfg, const std::string& out_dir) {
    ExperimentConfig ec = experiment_from_config(cfg);
    std::filesystem::create_directories(out_dir);
    ec.output_dir = out_dir;
    const ExperimentReport report = run_experiment(ec);
    const std::vector<ExperimentReport> rs{report};
    write_report_csv(out_dir + "/report.csv", rs);
    write_timings_csv(out_dir + "/timings.csv", rs);
    std::cout << "method,rmse,reduction,transit_transfers,predict_transfers,bytes,wall_ms\n";
    for (const MethodResult& m : report.methods)
        std::cout << m.method << "," << format_double(m.rmse) << ","
                  << format_double(m.reduction) << "," << m.transit_transfers << ","
                  << m.predict_transfers << "," << m.bytes << "," << format_double(m.wall_ms)
                  << "\n";
    return 0;
}

int cmd_sweep(const KeyValueConfig& cfg, const std::string& out_dir) {
    SweepConfig sc;
    sc.base = experiment_from_config(cfg);
    sc.lengthscales = cfg.get_doubles("sweep.lengthscales", {1, 2, 5, 10, 15, 20});
    sc.seeds = cfg.get_int("sweep.seeds", 10);
    std::filesystem::create_directories(out_dir);
    const SweepResult sr = sweep_lengthscales(sc);
    write_sweep_csv(out_dir + "/sweep.csv", sr);
    std::cout << "lengthscale";
    for (const std::string& m : sc.base.methods) std::cout << ",reduction(" << m << ")";
    std::cout << "\n";
    for (double ell : sc.lengthscales) {
        std::cout << format_double(ell);
        for (const std::string& m : sc.base.methods)
            std::cout << "," << format_double(sr.mean_reduction(ell, m));
        std::cout << "\n";
    }
    return 0;
}

int cmd_fuse(const std::string& data_path, const std::string& queries_path,
             const std::string& hyper_path, const std::string& method, int area_rows,
             int area_cols, int support_size, double margin, const std::string& out) {
    const Dataset data = load_csv_dataset(data_path);
    const std::vector<Location> queries = load_csv_locations(queries_path);
    if (data.empty()) throw ArgumentError("fuse: dataset is empty");
    Hyperparams h = load_hyperparams(hyper_path);

    // bounding box of data and queries defines the working domain
    Rect box{data.locations[0].coords[0], data.locations[0].coords[1],
             data.locations[0].coords[0], data.locations[0].coords[1]};
    const auto grow = [&box](const Location& l) {
        box.x0 = std::min(box.x0, l.coords[0]);
        box.y0 = std::min(box.y0, l.coords[1]);
        box.x1 = std::max(box.x1, l.coords[0]);
        box.y1 = std::max(box.y1, l.coords[1]);
    };
    for (const Location& l : data.locations) grow(l);
    for (const Location& l : queries) grow(l);
    if (box.width() <= 0 || box.height() <= 0) {
        box.x1 = box.x0 + 1;
        box.y1 = box.y0 + 1;
    }

    const AreaPartition part = make_partition(box, area_rows, area_cols, support_size, margin);
    std::vector<Dataset> blocks(static_cast<std::size_t>(part.n_areas()));
    for (std::size_t i = 0; i < data.size(); ++i)
        blocks[static_cast<std::size_t>(part.area_of(data.locations[i]))].append(
            data.locations[i], data.values[static_cast<Eigen::Index>(i)]);

    std::vector<PredictiveDistribution> preds;
    preds.reserve(queries.size());
    if (method == "full-gp") {
        for (const Location& x : queries) preds.push_back(full_gp_predict(x, data, h));
    } else if (method == "local-gp") {
        for (const Location& x : queries)
            preds.push_back(
                local_gp_predict(blocks[static_cast<std::size_t>(part.area_of(x))], x, h));
    } else if (method == "gpddf" || method == "gpddfplus") {
        const SupportSet common =
            make_support_set(box, static_cast<SupportId>(part.n_areas()) + 1000, support_size,
                             margin);
        std::vector<LocalSummary> locals;
        for (const Dataset& b : blocks) locals.push_back(build_local_summary(b, common, h));
        const GlobalSummary g = aggregate_global(locals, common, h);
        for (const Location& x : queries) {
            if (method == "gpddf") {
                preds.push_back(gpddf_predict(g, x, common, h));
            } else {
                const auto a = static_cast<std::size_t>(part.area_of(x));
                preds.push_back(gpddfplus_predict(g, locals[a], blocks[a], x, common, h));
            }
        }
    } else {
        throw ArgumentError("fuse: unknown method '" + method +
                            "' (full-gp | local-gp | gpddf | gpddfplus)");
    }
    write_predictions_csv(out, queries, preds);
    std::cout << "wrote " << preds.size() << " predictions to " << out << "\n";
    return 0;
}

int cmd_learn_hyper(const std::string& data_path, int area_rows, int area_cols,
                    int support_size, double margin, double init_signal, double init_noise,
                    double init_ell, bool empirical_mean, const std::string& out) {
    const Dataset data = load_csv_dataset(data_path);
    if (data.empty()) throw ArgumentError("learn-hyper: dataset is empty");
    Rect box{data.locations[0].coords[0], data.locations[0].coords[1],
             data.locations[0].coords[0], data.locations[0].coords[1]};
    for (const Location& l : data.locations) {
        box.x0 = std::min(box.x0, l.coords[0]);
        box.y0 = std::min(box.y0, l.coords[1]);
        box.x1 = std::max(box.x1, l.coords[0]);
        box.y1 = std::max(box.y1, l.coords[1]);
    }
    const AreaPartition part = make_partition(box, area_rows, area_cols, support_size, margin);
    std::vector<AreaData> areas(static_cast<std::size_t>(part.n_areas()));
    for (int a = 0; a < part.n_areas(); ++a) {
        areas[static_cast<std::size_t>(a)].support = part.supports[static_cast<std::size_t>(a)];
        areas[static_cast<std::size_t>(a)].blocks.emplace_back();
    }
    for (std::size_t i = 0; i < data.size(); ++i)
        areas[static_cast<std::size_t>(part.area_of(data.locations[i]))].blocks[0].append(
            data.locations[i], data.values[static_cast<Eigen::Index>(i)]);

    Hyperparams init = Hyperparams::isotropic(init_signal, init_noise, init_ell, 2);
    if (empirical_mean) init.prior_mean = data.values.mean();
    const Hyperparams learned = learn_hyperparams(areas, init);
    save_hyperparams(out, learned);
    std::cout << "signal_var=" << format_double(learned.signal_var)
              << " noise_var=" << format_double(learned.noise_var) << " length_scales="
              << format_double(learned.length_scales[0]) << ","
              << format_double(learned.length_scales[1]) << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_bound(int trials, std::uint64_t seed, const std::string& out) {
    std::ofstream os(out);
    if (!os) throw IoError(out + ": cannot open for writing");
    os << "trial,lengthscale,signal_var,n_support_old,n_support_new,n_data,actual_loss,bound,"
          "t,t_prime,eps_s_prime,eps_d,sigma_ss_inv_fnorm,holds\n";
    Rng rng(seed);
    int violations = 0;
    for (int t = 0; t < trials; ++t) {
        Hyperparams h;
        h.signal_var = rng.uniform(0.5, 2.0);
        h.noise_var = 0.0;
        const double ell = 1.0 + static_cast<double>(rng.uniform_int(20));
        h.length_scales = Eigen::VectorXd::Constant(2, ell);
        SupportSet s_old, s_new;
        s_old.id = 1;
        s_new.id = 2;
        const int n_old = 4 + static_cast<int>(rng.uniform_int(15));
        const int n_new = 4 + static_cast<int>(rng.uniform_int(15));
        for (int i = 0; i < n_old; ++i)
            s_old.points.emplace_back(rng.uniform(0, 50), rng.uniform(0, 50));
        for (int i = 0; i < n_new; ++i)
            s_new.points.emplace_back(rng.uniform(0, 50), rng.uniform(0, 50));
        std::vector<Location> data;
        const int m = 1 + static_cast<int>(rng.uniform_int(30));
        for (int i = 0; i < m; ++i) data.emplace_back(rng.uniform(0, 50), rng.uniform(0, 50));
        const LossBoundReport r = loss_bound(s_old, s_new, data, h);
        const bool holds = r.actual_loss <= r.bound;
        violations += holds ? 0 : 1;
        os << t << "," << format_double(ell) << "," << format_double(h.signal_var) << ","
           << n_old << "," << n_new << "," << m << "," << format_double(r.actual_loss) << ","
           << format_double(r.bound) << "," << r.t << "," << r.t_prime << ","
           << format_double(r.eps_s_prime) << "," << format_double(r.eps_d) << ","
           << format_double(r.sigma_ss_inv_fnorm) << "," << (holds ? 1 : 0) << "\n";
    }
    std::cout << "bound held in " << (trials - violations) << "/" << trials << " trials\n";
    return violations == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized Gaussian-process data fusion with agent-centric support sets"};
    app.require_subcommand(1);

    // genfield
    CLI::App* genfield = app.add_subcommand("genfield", "draw a GP field onto a grid CSV");
    ConfigOverlay gen_cfg(genfield);
    add_field_keys(gen_cfg);
    std::string gen_out = "field.csv", gen_latent;
    genfield->add_option("--out", gen_out, "output CSV (x1,x2,y)");
    genfield->add_option("--latent-out", gen_latent, "optional noise-free field CSV");

    // simulate
    CLI::App* simulate = app.add_subcommand("simulate", "run one simulated experiment");
    ConfigOverlay sim_cfg(simulate);
    add_field_keys(sim_cfg);
    add_sim_keys(sim_cfg);
    sim_cfg.key("run.methods", "comma-separated method list");
    std::string sim_out = "out";
    simulate->add_option("--out-dir", sim_out, "output directory");

    // sweep
    CLI::App* sweep = app.add_subcommand("sweep", "length-scale sweep of the experiment");
    ConfigOverlay sweep_cfg(sweep);
    add_field_keys(sweep_cfg);
    add_sim_keys(sweep_cfg);
    sweep_cfg.key("run.methods", "comma-separated method list");
    sweep_cfg.key("sweep.lengthscales", "comma-separated length-scales");
    sweep_cfg.key("sweep.seeds", "seeds per length-scale");
    std::string sweep_out = "out";
    sweep->add_option("--out-dir", sweep_out, "output directory");

    // fuse
    CLI::App* fuse = app.add_subcommand("fuse", "one-shot prediction from CSV data");
    std::string fuse_data, fuse_queries, fuse_hyper, fuse_method = "gpddf",
                fuse_out = "predictions.csv";
    int fuse_rows = 1, fuse_cols = 1, fuse_support = 18;
    double fuse_margin = 0.10;
    fuse->add_option("--data", fuse_data, "training CSV (x1,..,xd,y)")->required();
    fuse->add_option("--queries", fuse_queries, "query CSV (x1,..,xd)")->required();
    fuse->add_option("--hyper", fuse_hyper, "hyperparameter key=value file")->required();
    fuse->add_option("--method", fuse_method, "full-gp | local-gp | gpddf | gpddfplus");
    fuse->add_option("--area-rows", fuse_rows, "block partition rows");
    fuse->add_option("--area-cols", fuse_cols, "block partition columns");
    fuse->add_option("--support-size", fuse_support, "support set size");
    fuse->add_option("--margin", fuse_margin, "support margin fraction");
    fuse->add_option("--out", fuse_out, "predictions CSV");

    // learn-hyper
    CLI::App* learn = app.add_subcommand("learn-hyper", "fit hyperparameters from a CSV");
    std::string learn_data, learn_out = "hyper.txt";
    int learn_rows = 1, learn_cols = 2, learn_support = 16;
    double learn_margin = 0.10, init_signal = 1.0, init_noise = 0.05, init_ell = 5.0;
    bool learn_empirical_mean = false;
    learn->add_option("--data", learn_data, "training CSV (x1,..,xd,y)")->required();
    learn->add_option("--area-rows", learn_rows, "partition rows");
    learn->add_option("--area-cols", learn_cols, "partition columns");
    learn->add_option("--support-size", learn_support, "support size per area");
    learn->add_option("--margin", learn_margin, "support margin fraction");
    learn->add_option("--init-signal-var", init_signal, "initial signal variance");
    learn->add_option("--init-noise-var", init_noise, "initial noise variance");
    learn->add_option("--init-lengthscale", init_ell, "initial isotropic length-scale");
    learn->add_flag("--empirical-mean", learn_empirical_mean,
                    "use the data mean as the prior mean");
    learn->add_option("--out", learn_out, "output hyperparameter file");

    // bound
    CLI::App* bound = app.add_subcommand("bound", "randomized loss-bound trials");
    int bound_trials = 1000;
    std::uint64_t bound_seed = 12345;
    std::string bound_out = "bound_trials.csv";
    bound->add_option("--trials", bound_trials, "number of trials");
    bound->add_option("--seed", bound_seed, "trial seed");
    bound->add_option("--out", bound_out, "output CSV");

    try {
        app.parse(argc, argv);
        if (genfield->parsed()) return cmd_genfield(gen_cfg.resolve(), gen_out, gen_latent);
        if (simulate->parsed()) return cmd_simulate(sim_cfg.resolve(), sim_out);
        if (sweep->parsed()) return cmd_sweep(sweep_cfg.resolve(), sweep_out);
        if (fuse->parsed())
            return cmd_fuse(fuse_data, fuse_queries, fuse_hyper, fuse_method, fuse_rows,
                            fuse_cols, fuse_support, fuse_margin, fuse_out);
        if (learn->parsed())
            return cmd_learn_hyper(learn_data, learn_rows, learn_cols, learn_support,
                                   learn_margin, init_signal, init_noise, init_ell,
                                   learn_empirical_mean, learn_out);
        if (bound->parsed()) return cmd_bound(bound_trials, bound_seed, bound_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
