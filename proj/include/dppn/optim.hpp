#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dppn/autodiff.hpp"

namespace dppn {

/// Per-parameter Adam moments. Moments start at zero; `step` counts updates.
struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 2e-4;

  static AdamState for_shape(const Shape& shape, double learning_rate);
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

/// Adam over a fixed parameter list; `step` consumes and clears the
/// accumulated gradients.
class Adam {
 public:
  Adam(std::vector<Var> params, double learning_rate);

  void step();
  void zero_grad();
  const std::vector<Var>& params() const { return params_; }

 private:
  std::vector<Var> params_;
  std::vector<AdamState> states_;
};

/// Worst elementwise relative error between backward() and central
/// differences (f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h. The relative error of one
/// entry is |analytic − numeric| / max(|analytic|, |numeric|, floor);
/// `floor` keeps entries whose true gradient is ~0 from reporting rounding
/// noise as relative error.
inline constexpr double kGradCheckFloor = 1e-4;

double finite_diff_check(const std::function<Var(const Var&)>& fn, const Tensor& at, double h);

/// Same check against every parameter in `params`, each perturbed in place.
/// `loss` rebuilds the graph on every call. Returns one error per parameter.
std::vector<double> finite_diff_check_params(const std::function<Var()>& loss, std::vector<Var> params, double h);

}  // namespace dppn
