// ifca_sim - clustered federated learning simulator CLI
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ifca/checks.hpp"
#include "ifca/experiment.hpp"
#include "ifca/parallel.hpp"

namespace {

using ifca::ExperimentConfig;

// Flag values land in `flags`; after parsing, fields the user actually set
// override the (possibly file-loaded) base config.
struct ConfigFlags {
    ExperimentConfig flags;
    std::string config_path;
    std::string option_str = "grad";
    std::string loss_str = "squared";
    std::string init_str = "bernoulli";
    std::string gammas_str;
};

void add_config_options(CLI::App* cmd, ConfigFlags& cf) {
    cmd->add_option("--config", cf.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--m", cf.flags.m, "number of worker machines");
    cmd->add_option("--n", cf.flags.n, "data points per worker");
    cmd->add_option("--d", cf.flags.d, "model dimension");
    cmd->add_option("--k", cf.flags.k, "number of clusters");
    cmd->add_option("--R", cf.flags.R, "ground-truth norm / separation scale");
    cmd->add_option("--sigma", cf.flags.sigma, "noise standard deviation");
    cmd->add_option("--T", cf.flags.T, "parallel iterations (rounds)");
    cmd->add_option("--option", cf.option_str, "aggregation rule: grad|model");
    cmd->add_option("--gamma", cf.gammas_str, "step size(s), comma separated sweep");
    cmd->add_option("--decay", cf.flags.decay, "per-round step-size decay factor");
    cmd->add_option("--tau", cf.flags.tau, "local steps for model averaging");
    cmd->add_option("--batch", cf.flags.batch, "mini-batch size (0 = full batch)");
    cmd->add_option("--participation", cf.flags.participation, "participating fraction per round");
    cmd->add_option("--restarts", cf.flags.restarts, "random initializations per trial");
    cmd->add_option("--trials", cf.flags.trials, "trials per grid cell");
    cmd->add_flag("--resample", cf.flags.resample, "use the 2T disjoint-slice partition");
    cmd->add_option("--init", cf.init_str, "initialization: bernoulli|warm");
    cmd->add_option("--init-scale", cf.flags.init_scale, "Bernoulli init norm (0 = R)");
    cmd->add_option("--alpha0", cf.flags.warm_alpha0, "warm init closeness parameter");
    cmd->add_option("--seed", cf.flags.master_seed, "master seed");
    cmd->add_option("--loss", cf.loss_str, "loss family: squared|logistic");
    cmd->add_option("--reg", cf.flags.logistic_reg, "l2 coefficient for the logistic loss");
    cmd->add_option("--shared-mask", cf.flags.shared_mask_spec,
                    "weight sharing spec: none|prefix:<count>");
    cmd->add_option("--success-threshold", cf.flags.success_threshold_sigma,
                    "success when dist <= threshold * sigma");
    cmd->add_option("--threads", cf.flags.threads, "worker threads (0 = all, capped by IFCA_SIM_THREADS)");
}

std::vector<double> parse_gammas(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

ExperimentConfig resolve_config(const CLI::App* cmd, const ConfigFlags& cf) {
    ExperimentConfig cfg;
    if (!cf.config_path.empty()) {
        std::ifstream is(cf.config_path);
        if (!is) throw std::invalid_argument("cannot open config file " + cf.config_path);
        std::stringstream buf;
        buf << is.rdbuf();
        cfg = ExperimentConfig::from_json_string(buf.str());
    }
    const auto set = [&](const char* flag) { return cmd->count(flag) > 0; };
    if (set("--m")) cfg.m = cf.flags.m;
    if (set("--n")) cfg.n = cf.flags.n;
    if (set("--d")) cfg.d = cf.flags.d;
    if (set("--k")) cfg.k = cf.flags.k;
    if (set("--R")) cfg.R = cf.flags.R;
    if (set("--sigma")) cfg.sigma = cf.flags.sigma;
    if (set("--T")) cfg.T = cf.flags.T;
    if (set("--option")) cfg.option = cf.option_str == "model" ? ifca::UpdateRule::ModelAvg
                                                               : ifca::UpdateRule::GradAvg;
    if (set("--gamma")) cfg.gammas = parse_gammas(cf.gammas_str);
    if (set("--decay")) cfg.decay = cf.flags.decay;
    if (set("--tau")) cfg.tau = cf.flags.tau;
    if (set("--batch")) cfg.batch = cf.flags.batch;
    if (set("--participation")) cfg.participation = cf.flags.participation;
    if (set("--restarts")) cfg.restarts = cf.flags.restarts;
    if (set("--trials")) cfg.trials = cf.flags.trials;
    if (set("--resample")) cfg.resample = cf.flags.resample;
    if (set("--init")) cfg.init_mode = cf.init_str == "warm" ? ifca::InitMode::WarmBall
                                                             : ifca::InitMode::Bernoulli;
    if (set("--init-scale")) cfg.init_scale = cf.flags.init_scale;
    if (set("--alpha0")) cfg.warm_alpha0 = cf.flags.warm_alpha0;
    if (set("--seed")) cfg.master_seed = cf.flags.master_seed;
    if (set("--loss")) cfg.loss = cf.loss_str == "logistic" ? ifca::LossKind::LogisticL2
                                                            : ifca::LossKind::SquaredLinear;
    if (set("--reg")) cfg.logistic_reg = cf.flags.logistic_reg;
    if (set("--shared-mask")) cfg.shared_mask_spec = cf.flags.shared_mask_spec;
    if (set("--success-threshold")) cfg.success_threshold_sigma = cf.flags.success_threshold_sigma;
    if (set("--threads")) cfg.threads = cf.flags.threads;
    if (set("--option") && cf.option_str != "grad" && cf.option_str != "model")
        throw std::invalid_argument("--option must be grad or model");
    if (set("--loss") && cf.loss_str != "squared" && cf.loss_str != "logistic")
        throw std::invalid_argument("--loss must be squared or logistic");
    if (set("--init") && cf.init_str != "bernoulli" && cf.init_str != "warm")
        throw std::invalid_argument("--init must be bernoulli or warm");
    return cfg;
}

int cmd_run(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    cfg.restarts = std::max(1, cfg.restarts);
    cfg.validate();

    const ifca::LossModel model = cfg.loss_model();
    ifca::Rng gt_rng(ifca::derive_seed(cfg.master_seed, 0));
    const ifca::GroundTruth gt =
        ifca::generate_ground_truth(cfg.k, cfg.d, cfg.R, cfg.sigma, cfg.proportions, gt_rng);
    ifca::Federation workers =
        ifca::generate_federation(gt, cfg.m, cfg.n, ifca::derive_seed(cfg.master_seed, 1), cfg.loss);
    if (cfg.resample)
        for (auto& w : workers) w = ifca::resample_partition(std::move(w), cfg.T);

    ifca::Rng init_rng(ifca::derive_seed(cfg.master_seed, 2));
    auto init = ifca::random_init(cfg.k, cfg.d, cfg.effective_init_scale(), cfg.init_mode,
                                  &gt, cfg.warm_alpha0, init_rng);

    ifca::EngineConfig engine = cfg.engine_config();
    engine.gamma = cfg.effective_gammas().front();
    engine.threads = ifca::resolve_threads(cfg.threads);

    const ifca::RunTrace trace = ifca::run_ifca(engine, workers, std::move(init), model,
                                                ifca::derive_seed(cfg.master_seed, 3), &gt);

    std::printf("ground truth: Delta=%.6g rho=%.6g p=%.6g\n",
                gt.separation(), gt.snr(), gt.min_proportion());
    const int stride = std::max(1, cfg.T / 10);
    for (int t = 0; t < cfg.T; ++t) {
        if (t % stride == 0 || t == cfg.T - 1)
            std::printf("round %4d: dist=%.6e accuracy=%.4f\n", t, trace.dist[t], trace.accuracy[t]);
    }
    if (trace.stabilized_round >= 0)
        std::printf("cluster identities stabilized at round %d\n", trace.stabilized_round);
    std::printf("final dist: %.6e (success threshold %.6g)\n", trace.dist.back(),
                cfg.success_threshold_sigma * cfg.sigma);
    std::printf("final accuracy: %.4f\n", trace.accuracy.back());
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis_str,
              const std::string& values_str, const std::string& out_dir) {
    cfg.validate();
    ifca::GridAxis axis;
    std::vector<ifca::GridValue> values;
    if (axis_str == "r") {
        axis = ifca::GridAxis::SeparationR;
        for (double v : parse_gammas(values_str)) values.push_back({v, 0, 0});
    } else if (axis_str == "mn") {
        axis = ifca::GridAxis::GridMN;
        std::stringstream ss(values_str);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto xpos = item.find('x');
            if (xpos == std::string::npos)
                throw std::invalid_argument("--values for mn axis must look like 50x100,100x100");
            values.push_back({0.0, std::stoi(item.substr(0, xpos)), std::stoi(item.substr(xpos + 1))});
        }
    } else {
        throw std::invalid_argument("--axis must be r or mn");
    }
    if (values.empty()) throw std::invalid_argument("--values must be nonempty");

    const ifca::SuccessGrid grid = ifca::success_grid(cfg, axis, values);
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
        const auto& cell = grid.cells[c];
        if (axis == ifca::GridAxis::SeparationR)
            std::printf("cell %zu: R=%g success probability %.3f\n", c, cell.config.R,
                        cell.success_probability);
        else
            std::printf("cell %zu: m=%d n=%d success probability %.3f\n", c, cell.config.m,
                        cell.config.n, cell.success_probability);
    }
    for (const auto& f : ifca::emit_results(grid, out_dir))
        std::printf("wrote %s\n", f.c_str());
    return 0;
}

int cmd_baseline(const ExperimentConfig& cfg_in, const std::string& algo) {
    ExperimentConfig cfg = cfg_in;
    cfg.validate();
    const ifca::LossModel model = cfg.loss_model();
    ifca::Rng gt_rng(ifca::derive_seed(cfg.master_seed, 0));
    const ifca::GroundTruth gt =
        ifca::generate_ground_truth(cfg.k, cfg.d, cfg.R, cfg.sigma, cfg.proportions, gt_rng);
    const ifca::Federation workers =
        ifca::generate_federation(gt, cfg.m, cfg.n, ifca::derive_seed(cfg.master_seed, 1), cfg.loss);

    ifca::EngineConfig engine = cfg.engine_config();
    engine.gamma = cfg.effective_gammas().front();
    engine.threads = ifca::resolve_threads(cfg.threads);

    if (algo == "global") {
        ifca::Rng init_rng(ifca::derive_seed(cfg.master_seed, 2));
        auto init = ifca::random_init(1, cfg.d, cfg.effective_init_scale(), ifca::InitMode::Bernoulli,
                                      nullptr, 0.0, init_rng);
        const ifca::ParamVector theta =
            ifca::run_global_baseline(workers, ifca::all_workers(workers), init[0], model, engine,
                                      ifca::derive_seed(cfg.master_seed, 3));
        double dist = 0.0;
        for (int j = 0; j < cfg.k; ++j) dist += (theta - gt.params[j]).norm();
        std::printf("global baseline dist: %.6e\n", dist / cfg.k);
    } else if (algo == "local") {
        const auto locals = ifca::run_local_baseline(workers, ifca::ParamVector::Zero(cfg.d), model,
                                                     engine.gamma, cfg.tau * cfg.T, cfg.batch,
                                                     ifca::derive_seed(cfg.master_seed, 3),
                                                     engine.threads);
        double dist = 0.0;
        for (std::size_t i = 0; i < locals.size(); ++i)
            dist += (locals[i] - gt.params[workers[i].true_cluster]).norm();
        std::printf("local baseline mean dist to own theta*: %.6e\n", dist / locals.size());
    } else if (algo == "oneshot") {
        ifca::OneShotConfig oc;
        oc.fl = engine;
        const ifca::OneShotResult osr =
            ifca::one_shot_pipeline(workers, model, cfg.k, oc, ifca::derive_seed(cfg.master_seed, 3));
        const ifca::DistResult dr = ifca::dist_metric(osr.models, gt);
        const double acc = ifca::cluster_accuracy(osr.assignment, workers, dr.match);
        std::printf("one-shot dist: %.6e cluster accuracy: %.4f\n", dr.dist, acc);
    } else {
        throw std::invalid_argument("--algo must be global, local or oneshot");
    }
    return 0;
}

int cmd_verify(const std::string& suite, int threads) {
    std::vector<ifca::CheckResult> results;
    const bool all = suite == "all";
    if (all || suite == "gradients") results.push_back(ifca::check_gradients());
    if (all || suite == "contraction") results.push_back(ifca::check_contraction());
    if (all || suite == "misclass")
        results.push_back(ifca::check_misclassification_decay({5, 10, 20, 40, 80}, 100000, 4242,
                                                              ifca::resolve_threads(threads)));
    if (all || suite == "kmeans") results.push_back(ifca::check_kmeans_oracle());
    if (results.empty())
        throw std::invalid_argument("--suite must be gradients|contraction|misclass|kmeans|all");
    bool ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_path) {
    cfg.validate();
    ifca::Rng gt_rng(ifca::derive_seed(cfg.master_seed, 0));
    const ifca::GroundTruth gt =
        ifca::generate_ground_truth(cfg.k, cfg.d, cfg.R, cfg.sigma, cfg.proportions, gt_rng);
    const ifca::Federation workers =
        ifca::generate_federation(gt, cfg.m, cfg.n, ifca::derive_seed(cfg.master_seed, 1), cfg.loss);
    ifca::save_federation(out_path, gt, workers, cfg.master_seed);
    std::printf("wrote %s (k=%d d=%d m=%d n=%d sigma=%g seed=%llu)\n", out_path.c_str(), cfg.k,
                cfg.d, cfg.m, cfg.n, cfg.sigma,
                static_cast<unsigned long long>(cfg.master_seed));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ifca_sim - clustered federated learning simulator"};
    app.require_subcommand(1);

    ConfigFlags run_cf, sweep_cf, base_cf, gen_cf;
    std::string axis = "r", values, out_dir = "out", algo = "global", suite = "all";
    std::string gen_out = "federation.bin";
    int verify_threads = 0;

    CLI::App* run = app.add_subcommand("run", "one IFCA run; prints dist and accuracy trajectory");
    add_config_options(run, run_cf);

    CLI::App* sweep = app.add_subcommand("sweep", "success-probability grid");
    add_config_options(sweep, sweep_cf);
    sweep->add_option("--axis", axis, "grid axis: r (separation) or mn (workers x samples)");
    sweep->add_option("--values", values, "cells: '0.1,0.2,0.4' for r, '50x50,100x100' for mn")
        ->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->get_option("--seed")->required();

    CLI::App* baseline = app.add_subcommand("baseline", "run global|local|oneshot baseline");
    add_config_options(baseline, base_cf);
    baseline->add_option("--algo", algo, "global|local|oneshot")->required();

    CLI::App* verify = app.add_subcommand("verify", "run the built-in property suites");
    verify->add_option("--suite", suite, "gradients|contraction|misclass|kmeans|all");
    verify->add_option("--threads", verify_threads, "worker threads");

    CLI::App* gen = app.add_subcommand("gen-data", "dump a synthetic federation to a binary file");
    add_config_options(gen, gen_cf);
    gen->add_option("--out", gen_out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(resolve_config(run, run_cf));
        if (sweep->parsed()) return cmd_sweep(resolve_config(sweep, sweep_cf), axis, values, out_dir);
        if (baseline->parsed()) return cmd_baseline(resolve_config(baseline, base_cf), algo);
        if (verify->parsed()) return cmd_verify(suite, verify_threads);
        if (gen->parsed()) return cmd_gen_data(resolve_config(gen, gen_cf), gen_out);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
