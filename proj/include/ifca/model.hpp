#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>

#include "ifca/rng.hpp"

namespace ifca {

using ParamVector = Eigen::VectorXd;

struct DataPoint {
    Eigen::VectorXd x;
    double y = 0.0;
};

// Non-owning view over a contiguous block of a worker's data.
// X is n_rows x d, y is n_rows.
struct DataView {
    Eigen::Ref<const Eigen::MatrixXd> X;
    Eigen::Ref<const Eigen::VectorXd> y;

    Eigen::Index size() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }
};

enum class LossKind { SquaredLinear, LogisticL2 };

// Known strong-convexity / smoothness moduli, when analytically available.
struct Convexity {
    double lambda = 0.0;
    double L = 0.0;
};

struct LossModel {
    LossKind kind = LossKind::SquaredLinear;
    double reg_coefficient = 0.0;   // used by LogisticL2 only
    std::optional<Convexity> known_convexity;

    static LossModel squared_linear() { return {LossKind::SquaredLinear, 0.0, {}}; }

    static LossModel logistic_l2(double reg) {
        if (!(reg > 0.0))
            throw std::invalid_argument("logistic_l2: reg_coefficient must be > 0");
        // regularized logistic loss is reg-strongly convex; smoothness for
        // standard Gaussian features: sup eigenvalue of E[xx^T]/4 + reg
        return {LossKind::LogisticL2, reg, Convexity{reg, 0.25 + reg}};
    }
};

// Iterate became non-finite during a gradient method.
struct DivergenceError : std::runtime_error {
    int step;
    explicit DivergenceError(int step_index, const std::string& what)
        : std::runtime_error(what), step(step_index) {}
};

double pointwise_loss(const LossModel& model, const ParamVector& theta, const DataPoint& z);

double empirical_loss(const LossModel& model, const ParamVector& theta, const DataView& data);

ParamVector gradient(const LossModel& model, const ParamVector& theta, const DataView& data);

// tau steps of (mini-batch) gradient descent from theta0.
// batch == 0 means full batch; otherwise each step samples `batch` points
// without replacement from a fresh permutation.
ParamVector local_update(const LossModel& model, const ParamVector& theta0,
                         const DataView& data, double gamma, int tau,
                         int batch, Rng& rng);

} // namespace ifca
