#pragma once

#include "adahessian/problem.hpp"
#include "adahessian/random.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace adahessian {

// Small in-memory dataset standing in for (x_i, y_i) pairs. Classification
// labels live in `labels`; regression targets in `targets`.
struct SyntheticDataset {
    Matrix X;
    std::vector<int> labels;
    Matrix targets;
    int num_classes = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] Index size() const { return X.rows(); }
    [[nodiscard]] Index features() const { return X.cols(); }

    [[nodiscard]] Matrix rows(const Batch& batch) const {
        if (batch.is_full()) return X;
        Matrix out(static_cast<Index>(batch.indices.size()), X.cols());
        for (std::size_t r = 0; r < batch.indices.size(); ++r) out.row(static_cast<Index>(r)) = X.row(batch.indices[r]);
        return out;
    }

    [[nodiscard]] Matrix target_rows(const Batch& batch) const {
        if (batch.is_full()) return targets;
        Matrix out(static_cast<Index>(batch.indices.size()), targets.cols());
        for (std::size_t r = 0; r < batch.indices.size(); ++r)
            out.row(static_cast<Index>(r)) = targets.row(batch.indices[r]);
        return out;
    }

    [[nodiscard]] Matrix onehot(const Batch& batch) const {
        const auto pick = [&](std::size_t r) {
            return batch.is_full() ? labels[r] : labels[static_cast<std::size_t>(batch.indices[r])];
        };
        const std::size_t n = batch.is_full() ? labels.size() : batch.indices.size();
        Matrix out = Matrix::Zero(static_cast<Index>(n), num_classes);
        for (std::size_t r = 0; r < n; ++r) out(static_cast<Index>(r), pick(r)) = 1.0;
        return out;
    }
};

inline void require_desk_size(Index n, Index p) {
    require(n >= 1 && n <= 10000, "dataset: n must be in [1, 10000]");
    require(p >= 1 && p <= 100, "dataset: p must be in [1, 100]");
}

// Binary labels drawn from a logistic model with a random ground-truth weight.
inline SyntheticDataset make_logistic_data(Index n, Index p, std::uint64_t seed) {
    require_desk_size(n, p);
    Rng rng = make_stream(seed, StreamTag::data);
    SyntheticDataset ds;
    ds.seed = seed;
    ds.num_classes = 2;
    ParamVector w_true(p);
    for (Index j = 0; j < p; ++j) w_true(j) = 2.0 * rng.normal();
    ds.X.resize(n, p);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.targets.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
        double z = 0.0;
        for (Index j = 0; j < p; ++j) {
            ds.X(i, j) = rng.normal();
            z += ds.X(i, j) * w_true(j);
        }
        const int y = rng.uniform() < ad::Tape::stable_sigmoid(z) ? 1 : 0;
        ds.labels[static_cast<std::size_t>(i)] = y;
        ds.targets(i, 0) = y;
    }
    return ds;
}

// Gaussian blobs with unit noise, one per class; centres are N(0, spread^2).
// Small spreads make the classes overlap, so the loss has a floor above zero.
inline SyntheticDataset make_blobs(Index n, Index p, int classes, std::uint64_t seed, double spread = 2.0) {
    require_desk_size(n, p);
    require(classes >= 2, "make_blobs: need at least two classes");
    require(spread > 0.0 && std::isfinite(spread), "make_blobs: spread must be positive");
    Rng rng = make_stream(seed, StreamTag::data);
    Matrix centres(classes, p);
    for (Index c = 0; c < classes; ++c)
        for (Index j = 0; j < p; ++j) centres(c, j) = spread * rng.normal();
    SyntheticDataset ds;
    ds.seed = seed;
    ds.num_classes = classes;
    ds.X.resize(n, p);
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.targets.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % classes);
        ds.labels[static_cast<std::size_t>(i)] = c;
        ds.targets(i, 0) = c;
        for (Index j = 0; j < p; ++j) ds.X(i, j) = centres(c, j) + rng.normal();
    }
    return ds;
}

// y = sin(2 x_0) + 0.5 x_1 (when present) + small noise, x uniform in [-1.5, 1.5].
inline SyntheticDataset make_regression_data(Index n, Index p, std::uint64_t seed) {
    require_desk_size(n, p);
    Rng rng = make_stream(seed, StreamTag::data);
    SyntheticDataset ds;
    ds.seed = seed;
    ds.X.resize(n, p);
    ds.targets.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) ds.X(i, j) = rng.uniform(-1.5, 1.5);
        double y = std::sin(2.0 * ds.X(i, 0));
        if (p > 1) y += 0.5 * ds.X(i, 1);
        ds.targets(i, 0) = y + 0.05 * rng.normal();
    }
    return ds;
}

}  // namespace adahessian
