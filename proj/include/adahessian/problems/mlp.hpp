#pragma once

#include "adahessian/problem.hpp"
#include "adahessian/problems/dataset.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace adahessian {

enum class Activation { tanh, relu };
enum class MlpLoss { cross_entropy, mse };

// Fully connected network. layers = {in, hidden..., out}. Groups are
// W1 (in x h1), b1 (1 x h1), W2, b2, ... in that order.
class TinyMlp final : public DifferentiableProblem {
public:
    TinyMlp(std::string name, std::vector<Index> layers, SyntheticDataset data, Activation act, MlpLoss loss)
        : name_(std::move(name)), layers_(std::move(layers)), data_(std::move(data)), act_(act), loss_(loss) {
        require(layers_.size() >= 2, "TinyMlp: need at least input and output sizes");
        require(layers_.front() == data_.features(), "TinyMlp: input width must match the dataset");
        if (loss_ == MlpLoss::cross_entropy) {
            require(layers_.back() == data_.num_classes, "TinyMlp: output width must equal the class count");
        } else {
            require(layers_.back() == data_.targets.cols(), "TinyMlp: output width must equal the target width");
        }
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
            require(layers_[l] >= 1 && layers_[l + 1] >= 1, "TinyMlp: layer widths must be positive");
            layout_.push_back(ParamGroup{"W" + std::to_string(l + 1), layers_[l], layers_[l + 1]});
            layout_.push_back(ParamGroup{"b" + std::to_string(l + 1), 1, layers_[l + 1]});
        }
    }

    [[nodiscard]] std::string name() const override { return name_; }
    [[nodiscard]] const std::vector<ParamGroup>& layout() const override { return layout_; }
    [[nodiscard]] Index num_samples() const override { return data_.size(); }
    [[nodiscard]] const SyntheticDataset& data() const { return data_; }

    // Glorot-uniform weights, zero biases.
    [[nodiscard]] ParamVector initial_point(std::uint64_t seed) const override {
        Rng rng = make_stream(seed, StreamTag::init);
        ParamVector theta = ParamVector::Zero(dim());
        Index offset = 0;
        for (const auto& g : layout_) {
            if (g.name.front() == 'W') {
                const double limit = std::sqrt(6.0 / static_cast<double>(g.rows + g.cols));
                for (Index i = 0; i < g.size(); ++i) theta(offset + i) = rng.uniform(-limit, limit);
            }
            offset += g.size();
        }
        return theta;
    }

    ad::Var record_loss(ad::Tape& tape, std::span<const ad::Var> params, const Batch& batch) const override {
        ad::Var h = tape.constant(data_.rows(batch));
        const std::size_t n_layers = layers_.size() - 1;
        for (std::size_t l = 0; l < n_layers; ++l) {
            h = ad::add_row(ad::matmul(h, params[2 * l]), params[2 * l + 1]);
            if (l + 1 < n_layers) h = act_ == Activation::tanh ? ad::tanh(h) : ad::relu(h);
        }
        if (loss_ == MlpLoss::cross_entropy) return ad::softmax_cross_entropy(h, data_.onehot(batch));
        return ad::mse(h, data_.target_rows(batch));
    }

private:
    std::string name_;
    std::vector<Index> layers_;
    SyntheticDataset data_;
    Activation act_;
    MlpLoss loss_;
    std::vector<ParamGroup> layout_;
};

// Classifier on Gaussian blobs; the class count is layers.back().
inline TinyMlp make_tiny_mlp(std::vector<Index> layers, std::uint64_t seed, Index n = 256,
                             Activation act = Activation::tanh, double spread = 2.0) {
    require(layers.size() >= 2, "make_tiny_mlp: need at least two layer widths");
    auto data = make_blobs(n, layers.front(), static_cast<int>(layers.back()), seed, spread);
    return TinyMlp(act == Activation::tanh ? "tiny-mlp" : "tiny-mlp-relu", std::move(layers), std::move(data), act,
                   MlpLoss::cross_entropy);
}

inline TinyMlp make_mlp_regression(std::vector<Index> layers, std::uint64_t seed, Index n = 256) {
    require(layers.size() >= 2 && layers.back() == 1, "make_mlp_regression: output width must be 1");
    auto data = make_regression_data(n, layers.front(), seed);
    return TinyMlp("mlp-regression", std::move(layers), std::move(data), Activation::tanh, MlpLoss::mse);
}

}  // namespace adahessian
