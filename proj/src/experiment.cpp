#include "ifca/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "ifca/parallel.hpp"

namespace ifca {

namespace {

std::string option_name(UpdateRule r) { return r == UpdateRule::GradAvg ? "grad" : "model"; }
UpdateRule option_from(const std::string& s) {
    if (s == "grad") return UpdateRule::GradAvg;
    if (s == "model") return UpdateRule::ModelAvg;
    throw std::invalid_argument("unknown option '" + s + "' (expected grad|model)");
}

std::string loss_name(LossKind k) { return k == LossKind::SquaredLinear ? "squared" : "logistic"; }
LossKind loss_from(const std::string& s) {
    if (s == "squared") return LossKind::SquaredLinear;
    if (s == "logistic") return LossKind::LogisticL2;
    throw std::invalid_argument("unknown loss '" + s + "' (expected squared|logistic)");
}

std::string init_name(InitMode m) { return m == InitMode::Bernoulli ? "bernoulli" : "warm"; }
InitMode init_from(const std::string& s) {
    if (s == "bernoulli") return InitMode::Bernoulli;
    if (s == "warm") return InitMode::WarmBall;
    throw std::invalid_argument("unknown init mode '" + s + "' (expected bernoulli|warm)");
}

// shortest exact decimal form, stable across runs
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_gammas(const std::vector<double>& gs) {
    std::string out;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        if (i) out += ';';
        out += fmt(gs[i]);
    }
    return out;
}

} // namespace

std::vector<double> ExperimentConfig::effective_gammas() const {
    if (!gammas.empty()) return gammas;
    if (k == 4) return {0.5, 1.0, 2.0};
    return {0.01, 0.1, 1.0};
}

LossModel ExperimentConfig::loss_model() const {
    return loss == LossKind::SquaredLinear ? LossModel::squared_linear()
                                           : LossModel::logistic_l2(logistic_reg);
}

EngineConfig ExperimentConfig::engine_config() const {
    EngineConfig e;
    e.option = option;
    e.decay = decay;
    e.tau = tau;
    e.batch = batch;
    e.participation = participation;
    e.resample = resample;
    e.rounds = T;
    e.threads = 1;
    e.shared_mask = parse_shared_mask(shared_mask_spec, d);
    return e;
}

void ExperimentConfig::validate() const {
    if (m < 1 || n < 1 || d < 1 || k < 1) throw std::invalid_argument("config: m, n, d, k must be >= 1");
    if (m < k) throw std::invalid_argument("config: need m >= k");
    if (!(R > 0.0)) throw std::invalid_argument("config: R must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("config: sigma must be >= 0");
    if (T < 1) throw std::invalid_argument("config: T must be >= 1");
    if (effective_gammas().empty()) throw std::invalid_argument("config: gamma sweep empty");
    for (double g : effective_gammas())
        if (!(g > 0.0)) throw std::invalid_argument("config: step sizes must be > 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("config: decay must be in (0, 1]");
    if (tau < 1) throw std::invalid_argument("config: tau must be >= 1");
    if (batch < 0 || batch > n) throw std::invalid_argument("config: batch must be in [0, n]");
    if (!(participation > 0.0 && participation <= 1.0))
        throw std::invalid_argument("config: participation must be in (0, 1]");
    if (restarts < 1 || trials < 1) throw std::invalid_argument("config: restarts and trials must be >= 1");
    if (resample && n < 2 * T) throw std::invalid_argument("config: resample needs n >= 2T");
    if (init_mode == InitMode::WarmBall && !(warm_alpha0 > 0.0 && warm_alpha0 < 0.5))
        throw std::invalid_argument("config: warm_alpha0 must be in (0, 1/2)");
    if (!(success_threshold_sigma >= 0.0))
        throw std::invalid_argument("config: success threshold must be >= 0");
    if (!proportions.empty() && static_cast<int>(proportions.size()) != k)
        throw std::invalid_argument("config: proportions size != k");
    parse_shared_mask(shared_mask_spec, d);
}

std::optional<std::vector<bool>> parse_shared_mask(const std::string& spec, int d) {
    if (spec.empty() || spec == "none") return std::nullopt;
    if (spec.rfind("prefix:", 0) == 0) {
        const int count = std::stoi(spec.substr(7));
        if (count < 0 || count > d)
            throw std::invalid_argument("shared_mask: prefix count out of [0, d]");
        std::vector<bool> mask(d, false);
        for (int c = 0; c < count; ++c) mask[c] = true;
        return mask;
    }
    throw std::invalid_argument("shared_mask: expected '', 'none' or 'prefix:<count>'");
}

namespace {

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["m"] = c.m;
    j["n"] = c.n;
    j["d"] = c.d;
    j["k"] = c.k;
    j["R"] = c.R;
    j["sigma"] = c.sigma;
    j["T"] = c.T;
    j["option"] = option_name(c.option);
    j["gammas"] = c.effective_gammas();
    j["decay"] = c.decay;
    j["tau"] = c.tau;
    j["batch"] = c.batch;
    j["participation"] = c.participation;
    j["restarts"] = c.restarts;
    j["trials"] = c.trials;
    j["resample"] = c.resample;
    j["init_mode"] = init_name(c.init_mode);
    j["init_scale"] = c.init_scale;
    j["warm_alpha0"] = c.warm_alpha0;
    j["master_seed"] = c.master_seed;
    j["loss"] = loss_name(c.loss);
    j["logistic_reg"] = c.logistic_reg;
    j["shared_mask"] = c.shared_mask_spec;
    j["success_threshold_sigma"] = c.success_threshold_sigma;
    j["proportions"] = c.proportions;
    j["threads"] = c.threads;
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.m = j.value("m", c.m);
    c.n = j.value("n", c.n);
    c.d = j.value("d", c.d);
    c.k = j.value("k", c.k);
    c.R = j.value("R", c.R);
    c.sigma = j.value("sigma", c.sigma);
    c.T = j.value("T", c.T);
    if (j.contains("option")) c.option = option_from(j["option"].get<std::string>());
    if (j.contains("gammas")) c.gammas = j["gammas"].get<std::vector<double>>();
    c.decay = j.value("decay", c.decay);
    c.tau = j.value("tau", c.tau);
    c.batch = j.value("batch", c.batch);
    c.participation = j.value("participation", c.participation);
    c.restarts = j.value("restarts", c.restarts);
    c.trials = j.value("trials", c.trials);
    c.resample = j.value("resample", c.resample);
    if (j.contains("init_mode")) c.init_mode = init_from(j["init_mode"].get<std::string>());
    c.init_scale = j.value("init_scale", c.init_scale);
    c.warm_alpha0 = j.value("warm_alpha0", c.warm_alpha0);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("loss")) c.loss = loss_from(j["loss"].get<std::string>());
    c.logistic_reg = j.value("logistic_reg", c.logistic_reg);
    c.shared_mask_spec = j.value("shared_mask", c.shared_mask_spec);
    c.success_threshold_sigma = j.value("success_threshold_sigma", c.success_threshold_sigma);
    if (j.contains("proportions")) c.proportions = j["proportions"].get<std::vector<double>>();
    c.threads = j.value("threads", c.threads);
    return c;
}

} // namespace

std::string ExperimentConfig::to_json_string() const {
    return config_to_json(*this).dump(2);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
    return config_from_json(nlohmann::json::parse(text));
}

std::uint64_t ExperimentConfig::fingerprint() const {
    const std::string s = config_to_json(*this).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    return h;
}

TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t trial_seed) {
    cfg.validate();
    const LossModel model = cfg.loss_model();

    Rng gt_rng(derive_seed(trial_seed, 0));
    const GroundTruth gt = generate_ground_truth(cfg.k, cfg.d, cfg.R, cfg.sigma,
                                                 cfg.proportions, gt_rng);
    Federation workers = generate_federation(gt, cfg.m, cfg.n, derive_seed(trial_seed, 1),
                                             cfg.loss);
    if (cfg.resample)
        for (auto& w : workers) w = resample_partition(std::move(w), cfg.T);

    const auto gammas = cfg.effective_gammas();
    EngineConfig engine = cfg.engine_config();

    TrialResult result;
    result.trial_seed = trial_seed;
    result.best_dist = std::numeric_limits<double>::infinity();
    result.separation = gt.separation();
    result.snr = gt.snr();

    for (int r = 0; r < cfg.restarts; ++r) {
        const std::uint64_t init_seed = derive_seed(trial_seed, 2 + static_cast<std::uint64_t>(r));
        Rng init_rng(init_seed);
        const auto init = random_init(cfg.k, cfg.d, cfg.effective_init_scale(),
                                      cfg.init_mode, &gt, cfg.warm_alpha0, init_rng);
        for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
            engine.gamma = gammas[gi];
            RestartRecord rec;
            rec.restart = r;
            rec.gamma = gammas[gi];
            rec.init_seed = init_seed;
            try {
                RunTrace trace = run_ifca(engine, workers, init, model,
                                          derive_seed(init_seed, gi), &gt);
                rec.final_dist = dist_metric(trace.final_models, gt).dist;
                if (rec.final_dist < result.best_dist) {
                    result.best_dist = rec.final_dist;
                    result.best_gamma = rec.gamma;
                    result.best_restart = r;
                    result.dist_trajectory = trace.dist;
                    result.accuracy_trajectory = trace.accuracy;
                }
            } catch (const DivergenceError& e) {
                rec.final_dist = std::numeric_limits<double>::infinity();
                rec.diverged = true;
                rec.diverged_round = e.step;
            }
            result.restarts.push_back(std::move(rec));
        }
    }
    result.success = result.best_dist <= cfg.success_threshold_sigma * cfg.sigma;
    return result;
}

SuccessGrid success_grid(const ExperimentConfig& base, GridAxis axis,
                         const std::vector<GridValue>& values) {
    if (values.empty()) throw std::invalid_argument("success_grid: values must be nonempty");
    SuccessGrid grid;
    grid.axis = axis;
    grid.base = base;
    grid.cells.resize(values.size());
    for (std::size_t c = 0; c < values.size(); ++c) {
        GridCell& cell = grid.cells[c];
        cell.value = values[c];
        cell.config = base;
        if (axis == GridAxis::SeparationR) {
            if (!(values[c].R > 0.0)) throw std::invalid_argument("success_grid: R must be > 0");
            cell.config.R = values[c].R;
        } else {
            if (values[c].m < 1 || values[c].n < 1)
                throw std::invalid_argument("success_grid: m, n must be >= 1");
            cell.config.m = values[c].m;
            cell.config.n = values[c].n;
        }
        cell.config.validate();
        cell.trials.resize(base.trials);
    }

    struct Job { int cell; int trial; };
    std::vector<Job> jobs;
    jobs.reserve(values.size() * base.trials);
    for (std::size_t c = 0; c < values.size(); ++c)
        for (int t = 0; t < base.trials; ++t)
            jobs.push_back({static_cast<int>(c), t});

    const int threads = resolve_threads(base.threads);
    parallel_for(static_cast<int>(jobs.size()), threads, [&](int ji) {
        const Job job = jobs[ji];
        const std::uint64_t cell_seed =
            derive_seed(base.master_seed, static_cast<std::uint64_t>(job.cell));
        TrialResult tr = run_trial(grid.cells[job.cell].config,
                                   derive_seed(cell_seed, static_cast<std::uint64_t>(job.trial)));
        tr.trial = job.trial;
        grid.cells[job.cell].trials[job.trial] = std::move(tr);
    });

    for (auto& cell : grid.cells) {
        int wins = 0;
        for (const auto& t : cell.trials) wins += t.success ? 1 : 0;
        cell.success_probability = static_cast<double>(wins) / static_cast<double>(cell.trials.size());
    }
    return grid;
}

namespace {

const char* axis_name(GridAxis a) { return a == GridAxis::SeparationR ? "R" : "mn"; }

void write_results_csv(const SuccessGrid& grid, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_results: cannot open " + path);
    os << "axis,cell_index,cell_R,cell_m,cell_n,trial,trial_seed,separation,snr,"
          "best_dist,success,best_gamma,best_restart,diverged_runs,"
          "m,n,d,k,R,sigma,T,option,gammas,decay,tau,batch,participation,"
          "restarts,trials,resample,init_mode,init_scale,warm_alpha0,master_seed,"
          "loss,logistic_reg,shared_mask,success_threshold_sigma,threads\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const GridCell& cell = grid.cells[c];
        const ExperimentConfig& cc = cell.config;
        for (const auto& tr : cell.trials) {
            int diverged = 0;
            for (const auto& r : tr.restarts) diverged += r.diverged ? 1 : 0;
            os << axis_name(grid.axis) << ',' << c << ',' << fmt(cell.config.R) << ','
               << cell.config.m << ',' << cell.config.n << ',' << tr.trial << ','
               << tr.trial_seed << ',' << fmt(tr.separation) << ',' << fmt(tr.snr) << ','
               << fmt(tr.best_dist) << ',' << (tr.success ? 1 : 0) << ','
               << fmt(tr.best_gamma) << ',' << tr.best_restart << ',' << diverged << ','
               << cc.m << ',' << cc.n << ',' << cc.d << ',' << cc.k << ',' << fmt(cc.R) << ','
               << fmt(cc.sigma) << ',' << cc.T << ',' << option_name(cc.option) << ','
               << join_gammas(cc.effective_gammas()) << ',' << fmt(cc.decay) << ','
               << cc.tau << ',' << cc.batch << ',' << fmt(cc.participation) << ','
               << cc.restarts << ',' << cc.trials << ',' << (cc.resample ? 1 : 0) << ','
               << init_name(cc.init_mode) << ',' << fmt(cc.init_scale) << ','
               << fmt(cc.warm_alpha0) << ',' << cc.master_seed << ','
               << loss_name(cc.loss) << ',' << fmt(cc.logistic_reg) << ','
               << (cc.shared_mask_spec.empty() ? "none" : cc.shared_mask_spec) << ','
               << fmt(cc.success_threshold_sigma) << ',' << cc.threads << '\n';
        }
    }
    if (!os) throw std::runtime_error("emit_results: write failed for " + path);
}

void write_trajectories_csv(const SuccessGrid& grid, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_results: cannot open " + path);
    os << "axis,cell_index,trial,round,dist,accuracy\n";
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        for (const auto& tr : grid.cells[c].trials) {
            for (std::size_t t = 0; t < tr.dist_trajectory.size(); ++t) {
                os << axis_name(grid.axis) << ',' << c << ',' << tr.trial << ',' << t << ','
                   << fmt(tr.dist_trajectory[t]) << ',' << fmt(tr.accuracy_trajectory[t]) << '\n';
            }
        }
    }
    if (!os) throw std::runtime_error("emit_results: write failed for " + path);
}

void write_results_json(const SuccessGrid& grid, const std::string& path) {
    nlohmann::ordered_json j;
    j["config"] = config_to_json(grid.base);
    j["config_fingerprint"] = grid.base.fingerprint();
    j["master_seed"] = grid.base.master_seed;
    j["axis"] = axis_name(grid.axis);
    auto& cells = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& cell : grid.cells) {
        nlohmann::ordered_json cj;
        cj["R"] = cell.config.R;
        cj["m"] = cell.config.m;
        cj["n"] = cell.config.n;
        cj["success_probability"] = cell.success_probability;
        cj["config"] = config_to_json(cell.config);
        auto& trials = cj["trials"] = nlohmann::ordered_json::array();
        for (const auto& tr : cell.trials) {
            nlohmann::ordered_json tj;
            tj["trial"] = tr.trial;
            tj["trial_seed"] = tr.trial_seed;
            tj["best_dist"] = tr.best_dist == std::numeric_limits<double>::infinity()
                                  ? nlohmann::ordered_json("inf")
                                  : nlohmann::ordered_json(tr.best_dist);
            tj["success"] = tr.success;
            tj["best_gamma"] = tr.best_gamma;
            tj["best_restart"] = tr.best_restart;
            tj["separation"] = tr.separation;
            tj["snr"] = tr.snr;
            auto& rs = tj["restarts"] = nlohmann::ordered_json::array();
            for (const auto& r : tr.restarts) {
                nlohmann::ordered_json rj;
                rj["restart"] = r.restart;
                rj["gamma"] = r.gamma;
                rj["init_seed"] = r.init_seed;
                rj["final_dist"] = r.diverged ? nlohmann::ordered_json("inf")
                                              : nlohmann::ordered_json(r.final_dist);
                rj["diverged"] = r.diverged;
                rj["diverged_round"] = r.diverged_round;
                rs.push_back(std::move(rj));
            }
            tj["dist_trajectory"] = tr.dist_trajectory;
            tj["accuracy_trajectory"] = tr.accuracy_trajectory;
            trials.push_back(std::move(tj));
        }
        cells.push_back(std::move(cj));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_results: cannot open " + path);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("emit_results: write failed for " + path);
}

} // namespace

std::vector<std::string> emit_results(const SuccessGrid& grid, const std::string& out_dir,
                                      OutputFormat format) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    const auto join = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    if (format == OutputFormat::CSV || format == OutputFormat::All) {
        write_results_csv(grid, join("results.csv"));
        written.push_back(join("results.csv"));
        write_trajectories_csv(grid, join("trajectories.csv"));
        written.push_back(join("trajectories.csv"));
    }
    if (format == OutputFormat::JSON || format == OutputFormat::All) {
        write_results_json(grid, join("results.json"));
        written.push_back(join("results.json"));
    }
    return written;
}

} // namespace ifca
