#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace l0de {

/**
 * Assignment of sample columns to experimental groups.
 *
 * Labels are 1-based on input and stored 0-based. Within each group the member
 * columns keep their input order; the first member plays the role of the
 * reference sample whose within-group offset is fixed to zero.
 */
class GroupLayout {
public:
    GroupLayout() = default;

    explicit GroupLayout(std::span<const int> labels) {
        if (labels.empty()) {
            throw Error("group assignment is empty");
        }
        int max_label = 0;
        for (int g : labels) {
            if (g < 1) {
                throw Error("group index " + std::to_string(g) + " is not in 1..S");
            }
            max_label = std::max(max_label, g);
        }
        members_.resize(static_cast<std::size_t>(max_label));
        group_of_.reserve(labels.size());
        for (std::size_t j = 0; j < labels.size(); ++j) {
            auto s = static_cast<std::size_t>(labels[j] - 1);
            group_of_.push_back(s);
            members_[s].push_back(j);
        }
        for (std::size_t s = 0; s < members_.size(); ++s) {
            if (members_[s].empty()) {
                throw Error("group " + std::to_string(s + 1) + " has no samples");
            }
        }
    }

    std::size_t n_groups() const { return members_.size(); }
    std::size_t n_samples() const { return group_of_.size(); }
    std::size_t size(std::size_t s) const { return members_[s].size(); }
    std::span<const std::size_t> members(std::size_t s) const { return members_[s]; }
    std::size_t group_of(std::size_t j) const { return group_of_[j]; }

    std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out;
        out.reserve(members_.size());
        for (const auto& m : members_) {
            out.push_back(m.size());
        }
        return out;
    }

    /// 1-based labels, as read from a group file.
    std::vector<int> labels() const {
        std::vector<int> out;
        out.reserve(group_of_.size());
        for (auto s : group_of_) {
            out.push_back(static_cast<int>(s) + 1);
        }
        return out;
    }

    /// Copy of the columns belonging to group `s`, in member order.
    Matrix block(const Matrix& x, std::size_t s) const {
        const auto& cols = members_[s];
        Matrix out(x.rows(), cols.size());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t k = 0; k < cols.size(); ++k) {
                out(i, k) = x(i, cols[k]);
            }
        }
        return out;
    }

private:
    std::vector<std::size_t> group_of_;
    std::vector<std::vector<std::size_t>> members_;
};

} // namespace l0de
