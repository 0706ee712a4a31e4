#pragma once

#include "adahessian/optim/optimizer.hpp"

#include <cmath>

namespace adahessian {

struct AdaHessianOptions {
    double lr = 0.15;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double hessian_power = 1.0;  // k in v_t = Dbar_t^k
    double eps = 1e-8;           // added to v_t before division
    double weight_decay = 0.0;   // decoupled
    // When false, Dbar_t = |Ds_t| (no exponential averaging of curvature).
    bool hessian_momentum = true;

    void validate() const {
        require(lr > 0.0 && std::isfinite(lr), "adahessian: lr must be positive");
        require(beta1 > 0.0 && beta1 < 1.0, "adahessian: beta1 must be in (0, 1)");
        require(beta2 > 0.0 && beta2 < 1.0, "adahessian: beta2 must be in (0, 1)");
        require(hessian_power >= 0.0 && hessian_power <= 1.0, "adahessian: hessian power must be in [0, 1]");
        require(eps >= 0.0, "adahessian: eps must be >= 0");
        require(weight_decay >= 0.0, "adahessian: weight decay must be >= 0");
    }
};

struct AdaHessianState {
    std::int64_t t = 0;
    ParamVector m;        // EMA of gradients, before bias correction
    ParamVector v_raw;    // EMA of Ds * Ds, before bias correction
    ParamVector last_ds;  // most recent spatially averaged diagonal
    bool has_ds = false;
};

class AdaHessian final : public Optimizer {
public:
    AdaHessian(Index d, AdaHessianOptions options) : options_(options) {
        require(d >= 1, "adahessian: dimension must be >= 1");
        options_.validate();
        state_.m = ParamVector::Zero(d);
        state_.v_raw = ParamVector::Zero(d);
        state_.last_ds = ParamVector::Zero(d);
    }

    [[nodiscard]] std::string kind() const override { return "adahessian"; }
    [[nodiscard]] bool uses_curvature() const override { return true; }
    [[nodiscard]] std::int64_t iteration() const override { return state_.t; }
    [[nodiscard]] const AdaHessianState& state() const { return state_; }
    [[nodiscard]] const AdaHessianOptions& options() const { return options_; }

    // Folds Ds_t into the second moment and returns the bias-corrected RMS
    // Dbar_t. Expects state().t to already count the current step.
    ParamVector hessian_momentum(const ParamVector& ds) {
        require(state_.t >= 1, "hessian_momentum: step counter must be advanced first");
        require_same_length(ds, state_.v_raw, "hessian_momentum");
        if (!options_.hessian_momentum) return ds.cwiseAbs();
        const double b2 = options_.beta2;
        state_.v_raw = b2 * state_.v_raw + (1.0 - b2) * ds.cwiseProduct(ds);
        const double correction = 1.0 - std::pow(b2, static_cast<double>(state_.t));
        return (state_.v_raw / correction).cwiseSqrt();
    }

    // One update. A null `ds` reuses the last estimate (skipped Hutchinson
    // iteration); the moment EMAs still advance with the global t.
    ParamVector step(const ParamVector& theta, const ParamVector& g, const ParamVector* ds,
                     double lr_scale = 1.0) override {
        require_same_length(theta, state_.m, "adahessian step (theta)");
        require_same_length(g, state_.m, "adahessian step (gradient)");
        if (ds != nullptr) {
            require_same_length(*ds, state_.m, "adahessian step (curvature)");
            state_.last_ds = *ds;
            state_.has_ds = true;
        }
        require(state_.has_ds, "adahessian step: no Hessian diagonal has been supplied yet");

        state_.t += 1;
        const double t = static_cast<double>(state_.t);
        const double b1 = options_.beta1;
        state_.m = b1 * state_.m + (1.0 - b1) * g;
        const ParamVector m_hat = state_.m / (1.0 - std::pow(b1, t));
        const ParamVector dbar = hessian_momentum(state_.last_ds);
        const double k = options_.hessian_power;
        ParamVector v = k == 1.0 ? dbar : dbar.array().pow(k).matrix();

        const double eta = options_.lr * lr_scale;
        ParamVector out = theta;
        if (options_.weight_decay > 0.0) out -= eta * options_.weight_decay * theta;
        out.array() -= eta * m_hat.array() / (v.array() + options_.eps);
        detail::check_update(out, "adahessian");
        return out;
    }

    [[nodiscard]] nlohmann::json snapshot() const override {
        return {
            {"schema", optimizer_state_schema},
            {"version", optimizer_state_version},
            {"kind", kind()},
            {"t", state_.t},
            {"hyper",
             {{"lr", options_.lr},
              {"beta1", options_.beta1},
              {"beta2", options_.beta2},
              {"hessian_power", options_.hessian_power},
              {"eps", options_.eps},
              {"weight_decay", options_.weight_decay},
              {"hessian_momentum", options_.hessian_momentum}}},
            {"m", detail::to_json_array(state_.m)},
            {"v_raw", detail::to_json_array(state_.v_raw)},
            {"last_ds", state_.has_ds ? detail::to_json_array(state_.last_ds) : nlohmann::json(nullptr)},
        };
    }

    void restore(const nlohmann::json& j) override {
        detail::check_header(j, kind());
        const Index d = state_.m.size();
        AdaHessianOptions o;
        const auto& h = j.at("hyper");
        o.lr = h.at("lr").get<double>();
        o.beta1 = h.at("beta1").get<double>();
        o.beta2 = h.at("beta2").get<double>();
        o.hessian_power = h.at("hessian_power").get<double>();
        o.eps = h.at("eps").get<double>();
        o.weight_decay = h.at("weight_decay").get<double>();
        o.hessian_momentum = h.at("hessian_momentum").get<bool>();
        o.validate();
        AdaHessianState s;
        s.t = j.at("t").get<std::int64_t>();
        require(s.t >= 0, "optimizer snapshot: t must be >= 0");
        s.m = detail::from_json_array(j.at("m"), d, "m");
        s.v_raw = detail::from_json_array(j.at("v_raw"), d, "v_raw");
        require((s.v_raw.array() >= 0.0).all(), "optimizer snapshot: v_raw must be nonnegative");
        s.has_ds = !j.at("last_ds").is_null();
        s.last_ds = s.has_ds ? detail::from_json_array(j.at("last_ds"), d, "last_ds") : ParamVector::Zero(d);
        options_ = o;
        state_ = std::move(s);
    }

private:
    AdaHessianOptions options_;
    AdaHessianState state_;
};

}  // namespace adahessian
