#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifca/engine.hpp"
#include "ifca/metrics.hpp"
#include "ifca/one_shot.hpp"

namespace ifca {

struct ExperimentConfig {
    int m = 100;
    int n = 100;
    int d = 1000;
    int k = 2;
    double R = 0.1;
    double sigma = 0.05;
    int T = 300;
    UpdateRule option = UpdateRule::GradAvg;
    std::vector<double> gammas;         // step-size sweep; empty = default for k
    double decay = 1.0;
    int tau = 1;
    int batch = 0;
    double participation = 1.0;
    int restarts = 10;
    int trials = 40;
    bool resample = false;
    InitMode init_mode = InitMode::Bernoulli;
    double init_scale = 0.0;            // 0 = use R
    double warm_alpha0 = 0.25;
    std::uint64_t master_seed = 0;
    LossKind loss = LossKind::SquaredLinear;
    double logistic_reg = 0.1;
    std::string shared_mask_spec;       // "" = none, "prefix:<count>" shares leading coords
    double success_threshold_sigma = 0.6;
    std::vector<double> proportions;    // empty = equal
    int threads = 0;                    // 0 = auto

    // {0.01, 0.1, 1} for k = 2, {0.5, 1.0, 2.0} for k = 4, else the k=2 set
    std::vector<double> effective_gammas() const;
    double effective_init_scale() const { return init_scale > 0.0 ? init_scale : R; }
    LossModel loss_model() const;
    EngineConfig engine_config() const;
    void validate() const;

    std::string to_json_string() const;
    static ExperimentConfig from_json_string(const std::string& text);
    // FNV-1a over the canonical JSON form
    std::uint64_t fingerprint() const;
};

std::optional<std::vector<bool>> parse_shared_mask(const std::string& spec, int d);

struct RestartRecord {
    int restart = 0;
    double gamma = 0.0;
    std::uint64_t init_seed = 0;
    double final_dist = 0.0;    // +inf when diverged
    bool diverged = false;
    int diverged_round = -1;
};

struct TrialResult {
    int trial = 0;
    std::uint64_t trial_seed = 0;
    double best_dist = 0.0;
    bool success = false;
    double best_gamma = 0.0;
    int best_restart = -1;
    double separation = 0.0;    // Delta of the drawn ground truth
    double snr = 0.0;
    std::vector<RestartRecord> restarts;
    std::vector<double> dist_trajectory;      // best run, per round
    std::vector<double> accuracy_trajectory;  // best run, per round
};

// One trial: draw theta*'s and a federation from trial_seed, then run IFCA
// for every (restart initialization) x (step size in the sweep) and keep the
// best dist. A diverged run scores +inf.
TrialResult run_trial(const ExperimentConfig& cfg, std::uint64_t trial_seed);

enum class GridAxis { SeparationR, GridMN };

struct GridValue {
    double R = 0.0;   // SeparationR
    int m = 0;        // GridMN
    int n = 0;
};

struct GridCell {
    GridValue value;
    ExperimentConfig config;    // base config with the cell value applied
    std::vector<TrialResult> trials;
    double success_probability = 0.0;
};

struct SuccessGrid {
    GridAxis axis = GridAxis::SeparationR;
    ExperimentConfig base;
    std::vector<GridCell> cells;
};

// trials per cell, run in parallel over (cell, trial) jobs with seeds
// derived as master -> cell -> trial; output is identical for any thread
// count.
SuccessGrid success_grid(const ExperimentConfig& base, GridAxis axis,
                         const std::vector<GridValue>& values);

enum class OutputFormat { CSV, JSON, All };

// Writes results.csv (one row per cell x trial), trajectories.csv
// (cell, trial, round, dist, accuracy) and/or results.json (full config,
// per-restart records, trajectories). Re-running a sweep with the same
// config and seed reproduces these files byte for byte.
std::vector<std::string> emit_results(const SuccessGrid& grid,
                                      const std::string& out_dir,
                                      OutputFormat format = OutputFormat::All);

} // namespace ifca
