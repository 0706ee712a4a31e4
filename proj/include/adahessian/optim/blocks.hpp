#pragma once

#include "adahessian/problem.hpp"
#include "adahessian/types.hpp"

#include <numeric>
#include <vector>

namespace adahessian {

// Partition of a flat vector into averaging blocks. Each parameter group is
// cut into consecutive runs of `block_size` entries; a block never crosses a
// group boundary and the last block of a group may be shorter.
class BlockSpec {
public:
    BlockSpec(std::vector<Index> group_sizes, Index block_size)
        : group_sizes_(std::move(group_sizes)), block_size_(block_size) {
        require(block_size_ >= 1, "BlockSpec: block size must be >= 1");
        for (Index s : group_sizes_) require(s >= 1, "BlockSpec: group sizes must be positive");
    }

    static BlockSpec uniform(Index d, Index block_size) { return BlockSpec({d}, block_size); }

    static BlockSpec from_layout(const std::vector<ParamGroup>& layout, Index block_size) {
        std::vector<Index> sizes;
        for (const auto& g : layout) sizes.push_back(g.size());
        return BlockSpec(std::move(sizes), block_size);
    }

    [[nodiscard]] Index block_size() const { return block_size_; }
    [[nodiscard]] const std::vector<Index>& group_sizes() const { return group_sizes_; }
    [[nodiscard]] Index total() const { return std::accumulate(group_sizes_.begin(), group_sizes_.end(), Index{0}); }

    // Calls f(begin, length) for every block in order.
    template <typename F>
    void for_each_block(F&& f) const {
        Index offset = 0;
        for (Index size : group_sizes_) {
            for (Index start = 0; start < size; start += block_size_) {
                f(offset + start, std::min(block_size_, size - start));
            }
            offset += size;
        }
    }

private:
    std::vector<Index> group_sizes_;
    Index block_size_;
};

// Replaces every entry by the mean of its block.
inline ParamVector spatial_average(const ParamVector& D, const BlockSpec& blocks) {
    require(D.size() == blocks.total(), "spatial_average: vector length does not match the block layout");
    check_finite(D, "spatial_average input");
    if (blocks.block_size() == 1) return D;
    ParamVector out(D.size());
    blocks.for_each_block([&](Index begin, Index len) {
        const double mean = D.segment(begin, len).sum() / static_cast<double>(len);
        out.segment(begin, len).setConstant(mean);
    });
    return out;
}

}  // namespace adahessian
