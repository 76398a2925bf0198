#pragma once

#include "hydra/net.hpp"

namespace hydra {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators mirroring a parameter set.
template <typename Scalar>
struct AdamStateT {
  ParamSetT<Scalar> m;
  ParamSetT<Scalar> v;
  std::int64_t t = 0;

  static AdamStateT like(const ParamSetT<Scalar>& params) {
    AdamStateT s;
    s.m.resize(params.size());
    s.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (const auto& p : params[i]) {
        s.m[i].emplace_back(p.shape());
        s.v[i].emplace_back(p.shape());
      }
    }
    return s;
  }
};

using AdamState = AdamStateT<Real>;

/// One bias-corrected Adam update. Increments state.t by exactly 1.
template <typename Scalar>
void adam_step(ParamSetT<Scalar>& params, const ParamSetT<Scalar>& grads, AdamStateT<Scalar>& state,
               double lr, const AdamConfig& cfg = {}) {
  if (lr <= 0.0) throw ContractError("adam_step: learning rate must be positive");
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractError("adam_step: parameter/gradient/state layout mismatch");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size())
      throw ContractError("adam_step: gradient layout mismatch at layer " + std::to_string(i));
    for (std::size_t p = 0; p < params[i].size(); ++p) {
      TensorT<Scalar>& w = params[i][p];
      const TensorT<Scalar>& g = grads[i][p];
      if (!w.same_shape(g))
        throw ContractError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
      auto& m = state.m[i][p].data();
      auto& v = state.v[i][p].data();
      m = Scalar(cfg.beta1) * m + Scalar(1.0 - cfg.beta1) * g.data();
      v = (Scalar(cfg.beta2) * v.array() + Scalar(1.0 - cfg.beta2) * g.data().array().square())
              .matrix();
      w.data().array() -= Scalar(lr) * (m.array() / Scalar(bc1)) /
                          ((v.array() / Scalar(bc2)).sqrt() + Scalar(cfg.eps));
    }
  }
}

}  // namespace hydra
