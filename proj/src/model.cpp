#include "ifca/model.hpp"

#include <cmath>

namespace ifca {

namespace {

// log(1 + exp(-t)) without overflow
double log1p_exp_neg(double t) {
    if (t >= 0.0) return std::log1p(std::exp(-t));
    return -t + std::log1p(std::exp(t));
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

void check_dims(const LossModel&, const ParamVector& theta, Eigen::Index d, const char* op) {
    if (theta.size() != d)
        throw std::invalid_argument(std::string(op) + ": dimension mismatch between theta and data");
}

} // namespace

double pointwise_loss(const LossModel& model, const ParamVector& theta, const DataPoint& z) {
    check_dims(model, theta, z.x.size(), "pointwise_loss");
    const double margin = z.x.dot(theta);
    switch (model.kind) {
    case LossKind::SquaredLinear: {
        const double r = z.y - margin;
        return r * r;
    }
    case LossKind::LogisticL2: {
        const double ytilde = 2.0 * z.y - 1.0;   // {0,1} -> {-1,+1}
        return log1p_exp_neg(ytilde * margin) +
               0.5 * model.reg_coefficient * theta.squaredNorm();
    }
    }
    throw std::logic_error("pointwise_loss: unknown loss kind");
}

double empirical_loss(const LossModel& model, const ParamVector& theta, const DataView& data) {
    if (data.size() == 0)
        throw std::invalid_argument("empirical_loss: empty slice");
    check_dims(model, theta, data.dim(), "empirical_loss");
    const Eigen::Index n = data.size();
    switch (model.kind) {
    case LossKind::SquaredLinear: {
        return (data.y - data.X * theta).squaredNorm() / static_cast<double>(n);
    }
    case LossKind::LogisticL2: {
        const Eigen::VectorXd margins = data.X * theta;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ytilde = 2.0 * data.y[i] - 1.0;
            acc += log1p_exp_neg(ytilde * margins[i]);
        }
        return acc / static_cast<double>(n) +
               0.5 * model.reg_coefficient * theta.squaredNorm();
    }
    }
    throw std::logic_error("empirical_loss: unknown loss kind");
}

ParamVector gradient(const LossModel& model, const ParamVector& theta, const DataView& data) {
    if (data.size() == 0)
        throw std::invalid_argument("gradient: empty slice");
    check_dims(model, theta, data.dim(), "gradient");
    const double n = static_cast<double>(data.size());
    switch (model.kind) {
    case LossKind::SquaredLinear: {
        // (2/n) X^T (X theta - y)
        return (2.0 / n) * (data.X.transpose() * (data.X * theta - data.y));
    }
    case LossKind::LogisticL2: {
        const Eigen::VectorXd margins = data.X * theta;
        Eigen::VectorXd coeff(data.size());
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            const double ytilde = 2.0 * data.y[i] - 1.0;
            coeff[i] = -ytilde * sigmoid(-ytilde * margins[i]);
        }
        ParamVector g = (data.X.transpose() * coeff) / n;
        g += model.reg_coefficient * theta;
        return g;
    }
    }
    throw std::logic_error("gradient: unknown loss kind");
}

ParamVector local_update(const LossModel& model, const ParamVector& theta0,
                         const DataView& data, double gamma, int tau,
                         int batch, Rng& rng) {
    if (!(gamma >= 0.0))
        throw std::invalid_argument("local_update: step size must be nonnegative");
    if (tau < 1)
        throw std::invalid_argument("local_update: tau must be >= 1");
    if (batch < 0 || batch > data.size())
        throw std::invalid_argument("local_update: batch size out of range");

    ParamVector theta = theta0;
    Eigen::MatrixXd bx;
    Eigen::VectorXd by;
    for (int q = 0; q < tau; ++q) {
        ParamVector g;
        if (batch == 0 || batch == data.size()) {
            g = gradient(model, theta, data);
        } else {
            const auto idx = rng.sample_without_replacement(static_cast<int>(data.size()), batch);
            bx.resize(batch, data.dim());
            by.resize(batch);
            for (int r = 0; r < batch; ++r) {
                bx.row(r) = data.X.row(idx[r]);
                by[r] = data.y[idx[r]];
            }
            g = gradient(model, theta, DataView{bx, by});
        }
        theta -= gamma * g;
        if (!theta.allFinite())
            throw DivergenceError(q, "local_update: non-finite iterate at local step " + std::to_string(q));
    }
    return theta;
}

} // namespace ifca
