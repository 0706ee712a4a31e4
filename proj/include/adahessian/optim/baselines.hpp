#pragma once

#include "adahessian/optim/optimizer.hpp"

#include <cmath>
#include <string>

namespace adahessian {

enum class BaselineKind { sgd, adagrad, adam, adamw, rmsprop };

inline std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::sgd: return "sgd";
        case BaselineKind::adagrad: return "adagrad";
        case BaselineKind::adam: return "adam";
        case BaselineKind::adamw: return "adamw";
        case BaselineKind::rmsprop: return "rmsprop";
    }
    return "?";
}

struct BaselineOptions {
    double lr = 1e-3;
    double beta1 = 0.9;    // SGD momentum / Adam first moment
    double beta2 = 0.999;  // Adam second moment / RMSProp decay
    double eps = 1e-8;
    // Added to the gradient for sgd/adagrad/adam/rmsprop; decoupled for adamw.
    double weight_decay = 0.0;

    void validate(BaselineKind kind) const {
        require(lr > 0.0 && std::isfinite(lr), "optimizer: lr must be positive");
        require(eps >= 0.0, "optimizer: eps must be >= 0");
        require(weight_decay >= 0.0, "optimizer: weight decay must be >= 0");
        if (kind == BaselineKind::sgd) require(beta1 >= 0.0 && beta1 < 1.0, "sgd: momentum must be in [0, 1)");
        if (kind == BaselineKind::adam || kind == BaselineKind::adamw) {
            require(beta1 > 0.0 && beta1 < 1.0, "adam: beta1 must be in (0, 1)");
        }
        if (kind != BaselineKind::sgd && kind != BaselineKind::adagrad) {
            require(beta2 > 0.0 && beta2 < 1.0, "optimizer: beta2 must be in (0, 1)");
        }
    }
};

// Per-optimizer accumulators. Unused buffers stay empty.
struct BaselineState {
    std::int64_t t = 0;
    ParamVector m;  // sgd momentum buffer, adam first moment
    ParamVector v;  // adagrad sum of squares, adam / rmsprop second moment
};

// First-order update rules theta <- theta - lr * m_t / v_t:
//   sgd      m = b1 m + (1 - b1) g                 v = 1
//   adagrad  m = g                                 v = sqrt(sum g^2) + eps
//   adam     m = bias-corrected EMA(g)             v = sqrt(bias-corrected EMA(g^2)) + eps
//   rmsprop  m = g                                 v = sqrt(EMA(g^2)) + eps
// adamw is adam with decoupled weight decay.
class BaselineOptimizer final : public Optimizer {
public:
    BaselineOptimizer(BaselineKind kind, Index d, BaselineOptions options) : kind_(kind), options_(options) {
        require(d >= 1, "optimizer: dimension must be >= 1");
        options_.validate(kind_);
        if (kind_ == BaselineKind::sgd || kind_ == BaselineKind::adam || kind_ == BaselineKind::adamw) {
            state_.m = ParamVector::Zero(d);
        }
        if (kind_ != BaselineKind::sgd) state_.v = ParamVector::Zero(d);
        dim_ = d;
    }

    [[nodiscard]] std::string kind() const override { return to_string(kind_); }
    [[nodiscard]] BaselineKind baseline_kind() const { return kind_; }
    [[nodiscard]] std::int64_t iteration() const override { return state_.t; }
    [[nodiscard]] const BaselineState& state() const { return state_; }
    [[nodiscard]] const BaselineOptions& options() const { return options_; }

    ParamVector step(const ParamVector& theta, const ParamVector& gradient, const ParamVector* /*curvature*/,
                     double lr_scale = 1.0) override {
        require(theta.size() == dim_, "optimizer step: theta has the wrong length");
        require_same_length(theta, gradient, "optimizer step");
        state_.t += 1;
        const double t = static_cast<double>(state_.t);
        const double eta = options_.lr * lr_scale;
        const bool decoupled = kind_ == BaselineKind::adamw;
        ParamVector g = gradient;
        if (!decoupled && options_.weight_decay > 0.0) g += options_.weight_decay * theta;

        ParamVector out = theta;
        if (decoupled && options_.weight_decay > 0.0) out -= eta * options_.weight_decay * theta;

        switch (kind_) {
            case BaselineKind::sgd: {
                const double b = options_.beta1;
                state_.m = b * state_.m + (1.0 - b) * g;
                out -= eta * state_.m;
                break;
            }
            case BaselineKind::adagrad: {
                state_.v += g.cwiseProduct(g);
                out.array() -= eta * g.array() / (state_.v.array().sqrt() + options_.eps);
                break;
            }
            case BaselineKind::adam:
            case BaselineKind::adamw: {
                const double b1 = options_.beta1;
                const double b2 = options_.beta2;
                state_.m = b1 * state_.m + (1.0 - b1) * g;
                state_.v = b2 * state_.v + (1.0 - b2) * g.cwiseProduct(g);
                const ParamVector m_hat = state_.m / (1.0 - std::pow(b1, t));
                const ParamVector denom = (state_.v / (1.0 - std::pow(b2, t))).cwiseSqrt();
                out.array() -= eta * m_hat.array() / (denom.array() + options_.eps);
                break;
            }
            case BaselineKind::rmsprop: {
                const double b2 = options_.beta2;
                state_.v = b2 * state_.v + (1.0 - b2) * g.cwiseProduct(g);
                out.array() -= eta * g.array() / (state_.v.array().sqrt() + options_.eps);
                break;
            }
        }
        detail::check_update(out, to_string(kind_).c_str());
        return out;
    }

    [[nodiscard]] nlohmann::json snapshot() const override {
        nlohmann::json buffers = nlohmann::json::object();
        if (state_.m.size() > 0) buffers["m"] = detail::to_json_array(state_.m);
        if (state_.v.size() > 0) buffers["v"] = detail::to_json_array(state_.v);
        return {
            {"schema", optimizer_state_schema},
            {"version", optimizer_state_version},
            {"kind", kind()},
            {"t", state_.t},
            {"hyper",
             {{"lr", options_.lr},
              {"beta1", options_.beta1},
              {"beta2", options_.beta2},
              {"eps", options_.eps},
              {"weight_decay", options_.weight_decay}}},
            {"buffers", buffers},
        };
    }

    void restore(const nlohmann::json& j) override {
        detail::check_header(j, kind());
        BaselineOptions o;
        const auto& h = j.at("hyper");
        o.lr = h.at("lr").get<double>();
        o.beta1 = h.at("beta1").get<double>();
        o.beta2 = h.at("beta2").get<double>();
        o.eps = h.at("eps").get<double>();
        o.weight_decay = h.at("weight_decay").get<double>();
        o.validate(kind_);
        BaselineState s;
        s.t = j.at("t").get<std::int64_t>();
        require(s.t >= 0, "optimizer snapshot: t must be >= 0");
        const auto& b = j.at("buffers");
        if (state_.m.size() > 0) s.m = detail::from_json_array(b.at("m"), dim_, "m");
        if (state_.v.size() > 0) s.v = detail::from_json_array(b.at("v"), dim_, "v");
        if (kind_ == BaselineKind::adagrad) {
            require((s.v.array() >= 0.0).all(), "optimizer snapshot: adagrad accumulator must be nonnegative");
        }
        options_ = o;
        state_ = std::move(s);
    }

private:
    BaselineKind kind_;
    BaselineOptions options_;
    BaselineState state_;
    Index dim_ = 0;
};

inline BaselineOptimizer make_sgd(Index d, double lr, double momentum = 0.9) {
    BaselineOptions o;
    o.lr = lr;
    o.beta1 = momentum;
    return BaselineOptimizer(BaselineKind::sgd, d, o);
}

}  // namespace adahessian
