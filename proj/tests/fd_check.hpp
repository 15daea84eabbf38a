#pragma once

// Central finite-difference gradient oracle. Rebuilds the loss from scratch
// for every perturbed parameter entry, so it stays independent of the
// backward pass it is checking.

#include <cmath>
#include <functional>
#include <string>

#include "stk/graph.hpp"

namespace stk::test {

// loss_fn must evaluate the scalar loss from the current parameter values.
inline double fd_grad_entry(const std::function<double()>& loss_fn, stk::Tensor& p,
                            size_t idx, double h = 1e-3) {
    double orig = p[idx];
    p[idx] = orig + h;
    double up = loss_fn();
    p[idx] = orig - h;
    double down = loss_fn();
    p[idx] = orig;
    return (up - down) / (2.0 * h);
}

// Max relative error between analytic grads and finite differences over all
// entries of all parameters. Entries where both are tiny compare absolutely.
inline double max_rel_error(stk::ParamSet& params,
                            const std::function<double()>& loss_fn,
                            const stk::GradMap& grads, double h = 1e-3) {
    double worst = 0.0;
    for (const auto& name : params.names()) {
        stk::Tensor& p = params.at(name);
        for (size_t i = 0; i < p.size(); ++i) {
            double fd = fd_grad_entry(loss_fn, p, i, h);
            double an = 0.0;
            auto it = grads.find(name);
            if (it != grads.end()) an = it->second[i];
            double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace stk::test
