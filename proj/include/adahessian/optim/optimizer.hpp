#pragma once

#include "adahessian/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace adahessian {

inline constexpr const char* optimizer_state_schema = "adahessian.optimizer_state";
inline constexpr int optimizer_state_version = 1;

// Common surface for the harness. `curvature` is the spatially averaged
// Hessian diagonal for this iteration, or nullptr when none was computed.
class Optimizer {
public:
    virtual ~Optimizer() = default;

    [[nodiscard]] virtual std::string kind() const = 0;
    [[nodiscard]] virtual bool uses_curvature() const { return false; }
    [[nodiscard]] virtual std::int64_t iteration() const = 0;

    virtual ParamVector step(const ParamVector& theta, const ParamVector& gradient, const ParamVector* curvature,
                             double lr_scale = 1.0) = 0;

    [[nodiscard]] virtual nlohmann::json snapshot() const = 0;
    virtual void restore(const nlohmann::json& snapshot) = 0;
};

namespace detail {

inline nlohmann::json to_json_array(const ParamVector& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline ParamVector from_json_array(const nlohmann::json& j, Index expected, const char* field) {
    if (!j.is_array() || static_cast<Index>(j.size()) != expected) {
        throw ContractViolation(std::string("optimizer snapshot: field '") + field + "' has the wrong length");
    }
    ParamVector v(expected);
    for (Index i = 0; i < expected; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline void check_header(const nlohmann::json& j, const std::string& kind) {
    if (j.value("schema", "") != optimizer_state_schema || j.value("version", 0) != optimizer_state_version) {
        throw ContractViolation("optimizer snapshot: unsupported schema or version");
    }
    if (j.value("kind", "") != kind) {
        throw ContractViolation("optimizer snapshot: kind '" + j.value("kind", "") + "' does not match '" + kind + "'");
    }
}

// theta - step, with a NumericError naming the first bad coordinate.
inline void check_update(const ParamVector& theta, const char* who) {
    for (Index i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(theta(i))) {
            throw NumericError(std::string(who) + ": non-finite update at coordinate " + std::to_string(i));
        }
    }
}

}  // namespace detail
}  // namespace adahessian
