#pragma once

// Finite-difference gradient oracle. Independent of the tape: it re-runs the
// forward function with perturbed leaf values and compares the central
// difference against the gradient the backward pass produced.

#include "hazardops/tensor.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace hazardops::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::string worst_detail;
};

// forward() must rebuild the graph from the current leaf values and return a
// scalar loss tensor. Leaves must have requires_grad set.
inline GradCheckResult gradcheck(const std::function<ad::Tensor()>& forward,
                                 std::vector<ad::Tensor> leaves,
                                 double step = 1e-6) {
    namespace ad = hazardops::ad;
    ad::clear_tape();
    for (auto& leaf : leaves) leaf.zero_grad();
    ad::Tensor loss = forward();
    ad::backward(loss);

    std::vector<std::vector<double>> analytic;
    for (auto& leaf : leaves) {
        analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    }

    GradCheckResult result;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto node = leaves[li].node();
        for (std::size_t i = 0; i < node->values.size(); ++i) {
            const double keep = node->values[i];
            node->values[i] = keep + step;
            ad::clear_tape();
            const double up = forward().value();
            node->values[i] = keep - step;
            ad::clear_tape();
            const double down = forward().value();
            node->values[i] = keep;
            const double fd = (up - down) / (2.0 * step);
            const double an = analytic[li][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            const double rel = std::abs(fd - an) / denom;
            ++result.checked;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_detail = "leaf " + std::to_string(li) + " entry " +
                                      std::to_string(i) + ": fd=" + std::to_string(fd) +
                                      " analytic=" + std::to_string(an);
            }
        }
    }
    ad::clear_tape();
    return result;
}

} // namespace hazardops::testing
