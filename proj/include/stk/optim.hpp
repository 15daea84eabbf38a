#pragma once

#include "stk/graph.hpp"

namespace stk {

// Adam with bias correction. Moments are allocated lazily per parameter name
// on the first step that touches it.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Applies one update to every parameter present in `grads`. Parameters
    // without a gradient entry are left untouched (zero gradient).
    void step(ParamSet& params, const GradMap& grads);

    long step_count() const { return t_; }
    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    GradMap m_, v_;
};

// grad accumulation across a minibatch of per-sample graphs
void accumulate(GradMap& into, const GradMap& grads, double scale = 1.0);

}  // namespace stk
