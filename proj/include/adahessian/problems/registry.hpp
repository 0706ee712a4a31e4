#pragma once

#include "adahessian/problems/logreg.hpp"
#include "adahessian/problems/mlp.hpp"
#include "adahessian/problems/noisy_parabola.hpp"
#include "adahessian/problems/quadratic.hpp"

#include <charconv>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace adahessian {

// String-keyed problem parameters, e.g. {"n": "200", "layers": "4,16,3"}.
class ProblemParams {
public:
    ProblemParams() = default;
    ProblemParams(std::initializer_list<std::pair<const std::string, std::string>> kv) : values_(kv) {}

    // Parses "k1=v1,k2=v2"; layer lists use ':' or '-' inside a value ("layers=4:16:3").
    static ProblemParams parse(const std::string& spec) {
        ProblemParams out;
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ContractViolation("problem parameter '" + item + "' is not key=value");
            }
            out.set(item.substr(0, eq), item.substr(eq + 1));
        }
        return out;
    }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

    [[nodiscard]] long long get_int(const std::string& key, long long fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        long long v = 0;
        const auto& s = it->second;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ContractViolation("problem parameter '" + key + "' is not an integer: " + s);
        }
        return v;
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ContractViolation("problem parameter '" + key + "' is not a number: " + it->second);
        }
    }

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] std::vector<Index> get_layers(const std::string& key, std::vector<Index> fallback) const {
        used_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<Index> out;
        std::string s = it->second;
        for (char& c : s)
            if (c == ':' || c == '-' || c == 'x') c = ' ';
        std::stringstream ss(s);
        long long w = 0;
        while (ss >> w) out.push_back(static_cast<Index>(w));
        if (!ss.eof() || out.size() < 2) throw ContractViolation("problem parameter '" + key + "' is not a layer list");
        return out;
    }

    // Keys that were set but never read by the factory.
    [[nodiscard]] std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

inline const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names = {"fig1-quadratic", "coupled-quadratic", "spd-quadratic",
                                                   "noisy-parabola", "logreg",            "tiny-mlp",
                                                   "tiny-mlp-relu",  "mlp-regression"};
    return names;
}

inline std::unique_ptr<DifferentiableProblem> make_problem(const std::string& name,
                                                           const ProblemParams& params = {}) {
    std::unique_ptr<DifferentiableProblem> out;
    if (name == "fig1-quadratic") {
        out = std::make_unique<QuadraticProblem>(make_fig1_quadratic());
    } else if (name == "coupled-quadratic") {
        Eigen::MatrixXd A(2, 2);
        A << 2.0, 1.0, 1.0, 3.0;
        out = std::make_unique<QuadraticProblem>("coupled-quadratic", A);
    } else if (name == "spd-quadratic") {
        out = std::make_unique<QuadraticProblem>(
            make_random_spd_quadratic(static_cast<Index>(params.get_int("d", 8)), params.get_double("cond", 100.0),
                                      static_cast<std::uint64_t>(params.get_int("seed", 1))));
    } else if (name == "noisy-parabola") {
        out = std::make_unique<NoisyParabola>(params.get_double("x0", 1.0));
    } else if (name == "logreg") {
        out = std::make_unique<LogisticRegression>(make_logreg(static_cast<Index>(params.get_int("n", 512)),
                                                               static_cast<Index>(params.get_int("p", 10)),
                                                               static_cast<std::uint64_t>(params.get_int("seed", 1))));
    } else if (name == "tiny-mlp" || name == "tiny-mlp-relu") {
        const auto act = name == "tiny-mlp" ? Activation::tanh : Activation::relu;
        out = std::make_unique<TinyMlp>(make_tiny_mlp(params.get_layers("layers", {4, 16, 3}),
                                                      static_cast<std::uint64_t>(params.get_int("seed", 1)),
                                                      static_cast<Index>(params.get_int("n", 256)), act,
                                                      params.get_double("spread", 2.0)));
    } else if (name == "mlp-regression") {
        out = std::make_unique<TinyMlp>(make_mlp_regression(params.get_layers("layers", {2, 16, 1}),
                                                            static_cast<std::uint64_t>(params.get_int("seed", 1)),
                                                            static_cast<Index>(params.get_int("n", 256))));
    } else {
        throw ContractViolation("unknown problem '" + name + "'");
    }
    if (auto extra = params.unused(); !extra.empty()) {
        throw ContractViolation("problem '" + name + "' does not take parameter '" + extra.front() + "'");
    }
    return out;
}

}  // namespace adahessian
