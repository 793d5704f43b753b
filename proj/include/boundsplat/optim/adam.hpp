#pragma once

#include "boundsplat/core/errors.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace boundsplat::optim {

/// A named slice of parameters stepped with its own learning rate.
struct ParamGroup {
    std::string name;
    std::vector<double>* values;
    double lr;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m, v; // one per group, same order as the groups

    /// Drops rows of group `g` (row width `stride`) where `mask` is false.
    void keep_rows(std::size_t g, const std::vector<bool>& mask, std::size_t stride) {
        for (auto* buf : {&m[g], &v[g]}) {
            if (buf->empty()) continue;
            std::size_t dst = 0;
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (!mask[i]) continue;
                for (std::size_t k = 0; k < stride; ++k) (*buf)[dst * stride + k] = (*buf)[i * stride + k];
                ++dst;
            }
            buf->resize(dst * stride);
        }
    }
};

/// Bias-corrected Adam over every group. Shapes and finiteness are checked for all
/// groups before anything is modified.
inline void adam_step(AdamState& s, const std::vector<ParamGroup>& groups, const std::vector<std::vector<double>>& grads) {
    if (grads.size() != groups.size()) throw ValidationError("adam_step: gradient group count mismatch");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (grads[g].size() != groups[g].values->size())
            throw ValidationError("adam_step: gradient for '" + groups[g].name + "' has " +
                                  std::to_string(grads[g].size()) + " entries, parameters have " +
                                  std::to_string(groups[g].values->size()));
        for (double x : grads[g])
            if (!std::isfinite(x)) throw NumericError("adam_step: non-finite gradient in group '" + groups[g].name + "'");
    }
    if (s.m.empty()) {
        s.m.resize(groups.size());
        s.v.resize(groups.size());
    }
    if (s.m.size() != groups.size()) throw ValidationError("adam_step: state was built for a different group list");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<double>& p = *groups[g].values;
        auto& m = s.m[g];
        auto& v = s.v[g];
        if (m.size() != p.size()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        const double lr = groups[g].lr;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = grads[g][i];
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * gi;
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * gi * gi;
            if (lr == 0.0) continue; // frozen group: values stay bit-identical
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
        }
    }
}

} // namespace boundsplat::optim
