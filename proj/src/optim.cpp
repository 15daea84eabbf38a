#include "stk/optim.hpp"

#include <cmath>

namespace stk {

void Adam::step(ParamSet& params, const GradMap& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        if (!p.same_shape(g)) throw Error(ErrKind::Numeric, "gradient shape mismatch: " + name);
        auto [mi, fresh_m] = m_.try_emplace(name, Tensor(p.rows(), p.cols()));
        auto [vi, fresh_v] = v_.try_emplace(name, Tensor(p.rows(), p.cols()));
        Tensor& m = mi->second;
        Tensor& v = vi->second;
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void accumulate(GradMap& into, const GradMap& grads, double scale) {
    for (const auto& [name, g] : grads) {
        auto it = into.find(name);
        if (it == into.end()) {
            Tensor t = g;
            for (size_t i = 0; i < t.size(); ++i) t[i] *= scale;
            into.emplace(name, std::move(t));
        } else {
            for (size_t i = 0; i < g.size(); ++i) it->second[i] += scale * g[i];
        }
    }
}

}  // namespace stk
