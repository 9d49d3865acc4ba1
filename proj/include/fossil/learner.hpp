// Gradient training of the candidate (and controller) against the
// certificate loss until the sampled conditions hold with margin or the
// epoch budget runs out.

#pragma once

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fossil/certificates.hpp"

namespace fossil {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 0.1;
    int max_epochs = 1000;
    int early_stop_zero_epochs = 10;  // stop after this many consecutive zero-loss epochs
    double control_lambda = 0.0;      // quadratic input penalty in the control loss

    void validate() const {
        if (learning_rate <= 0) throw TrainError("learning rate must be positive");
        if (max_epochs <= 0) throw TrainError("epoch budget must be positive");
        if (early_stop_zero_epochs <= 0) throw TrainError("early-stop patience must be positive");
    }
};

// Adaptive-moment gradient descent with the standard defaults.
class Adam {
public:
    explicit Adam(const Network& net) : m_(net), v_(net) {
        m_.zero();
        v_.zero();
    }

    void step(Network& net, const NetGrads& grads, double lr) {
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double corr1 = 1.0 - std::pow(b1, t_);
        const double corr2 = 1.0 - std::pow(b2, t_);
        auto update = [&](double& p, double g, double& m, double& v) {
            m = b1 * m + (1 - b1) * g;
            v = b2 * v + (1 - b2) * g * g;
            p -= lr * (m / corr1) / (std::sqrt(v / corr2) + eps);
        };
        for (int l = 0; l < net.layer_count(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].size(); ++i)
                update(net.weights[l][i], grads.weights[l][i], m_.weights[l][i], v_.weights[l][i]);
            for (std::size_t i = 0; i < net.biases[l].size(); ++i)
                update(net.biases[l][i], grads.biases[l][i], m_.biases[l][i], v_.biases[l][i]);
        }
        for (std::size_t i = 0; i < net.level_values.size(); ++i)
            update(net.level_values[i], grads.levels[i], m_.levels[i], v_.levels[i]);
    }

private:
    NetGrads m_, v_;
    int t_ = 0;
};

struct TrainOutcome {
    double final_loss = 0.0;
    int epochs_used = 0;
    double learn_time_s = 0.0;
    std::size_t final_violations = 0;
    std::vector<std::size_t> violations_trace;  // per epoch
};

class Trainer {
public:
    Trainer(const SynthesisProblem& problem, const Candidate& cand) : problem_(&problem) {
        opt_primary_.emplace(cand.primary);
        if (cand.secondary) opt_secondary_.emplace(*cand.secondary);
        if (cand.controller) opt_controller_.emplace(*cand.controller);
    }

    // Trains in place; certificate and controller get one joint gradient
    // step per epoch.  Early stop fires only on exactly-zero certificate
    // loss sustained for the configured number of epochs.
    TrainOutcome train(Candidate& cand, const Batches& data, const TrainConfig& cfg) {
        cfg.validate();
        const auto t0 = std::chrono::steady_clock::now();
        TrainOutcome out;
        CandidateGrads grads(cand);
        int zero_streak = 0;
        for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            grads.zero();
            auto result = problem_->loss(cand, data, &grads);
            double total = result.loss;
            if (cand.controller)
                total += problem_->control_loss(cand, data, &grads, cfg.control_lambda);
            if (!std::isfinite(total) || !grads.finite())
                throw TrainError("non-finite loss or gradient at epoch " + std::to_string(epoch));
            out.final_loss = result.loss;
            out.final_violations = result.violations_total;
            out.violations_trace.push_back(result.violations_total);
            out.epochs_used = epoch + 1;

            zero_streak = result.loss == 0.0 ? zero_streak + 1 : 0;
            if (zero_streak >= cfg.early_stop_zero_epochs) break;

            opt_primary_->step(cand.primary, grads.primary, cfg.learning_rate);
            if (cand.secondary && grads.secondary)
                opt_secondary_->step(*cand.secondary, *grads.secondary, cfg.learning_rate);
            if (cand.controller && grads.controller)
                opt_controller_->step(*cand.controller, *grads.controller, cfg.learning_rate);
            clamp_levels(cand);
        }
        out.learn_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

private:
    // Level parameters have sign constraints the optimizer does not know
    // about: ROA's beta stays positive, RSWA's gamma stays negative.
    void clamp_levels(Candidate& cand) const {
        if (problem_->kind == CertificateKind::Roa)
            cand.primary.set_level("beta", std::max(cand.primary.level("beta"), 1e-3));
        if (problem_->kind == CertificateKind::Rswa)
            cand.primary.set_level("gamma", std::min(cand.primary.level("gamma"), -1e-3));
    }

    const SynthesisProblem* problem_;
    std::optional<Adam> opt_primary_, opt_secondary_, opt_controller_;
};

}  // namespace fossil
