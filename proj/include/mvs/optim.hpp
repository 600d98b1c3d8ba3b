#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mvs/params.hpp"

namespace mvs {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update using the gradients currently stored on
// the parameters. Parameters without a gradient are treated as g = 0.
inline void adam_step(ParamSet& params, AdamState& state, const OptimizerConfig& cfg) {
  if (state.first_moment.empty()) {
    for (const auto& [_, p] : params) {
      state.first_moment.emplace_back(p.shape(), 0.0);
      state.second_moment.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.first_moment.size() != params.count()) {
    throw TrainingError("optimizer state does not match parameter set");
  }
  for (const auto& [name, p] : params) {
    if (p.has_grad() && !p.grad().all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  std::size_t k = 0;
  for (auto& [_, p] : params) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    ++k;
    auto& w = p.mutable_value();
    const bool has = p.has_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = has ? p.grad()[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

struct GradCheckReport {
  std::vector<std::pair<std::string, double>> max_relative_error;  // per parameter
  double worst = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;  // gradient pair at the worst scalar
  double worst_numeric = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

// Compares the autodiff gradient of a scalar loss with central differences
// (step 1e-5) on every scalar of every parameter. Parameter values are
// restored afterwards.
inline GradCheckReport grad_check(const std::function<Var()>& loss_fn, ParamSet& params,
                                  double tolerance, double step = 1e-5) {
  params.zero_grad();
  Var loss = loss_fn();
  backward(loss);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, p] : params) {
    Tensor analytic = p.has_grad() ? p.grad() : Tensor(p.shape(), 0.0);
    double worst = 0.0, worst_a = 0.0, worst_n = 0.0;
    auto& w = p.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + step;
      const double up = loss_fn().value().item();
      w[i] = saved - step;
      const double down = loss_fn().value().item();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[i], numeric);
      if (err > worst) {
        worst = err;
        worst_a = analytic[i];
        worst_n = numeric;
      }
    }
    report.max_relative_error.emplace_back(name, worst);
    if (worst >= report.worst) {
      report.worst = worst;
      report.worst_parameter = name;
      report.worst_analytic = worst_a;
      report.worst_numeric = worst_n;
    }
  }
  params.zero_grad();
  report.pass = report.worst <= tolerance;
  return report;
}

}  // namespace mvs
