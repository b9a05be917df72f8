#include "dppn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace dppn {

AdamState AdamState::for_shape(const Shape& shape, double learning_rate) {
  AdamState state;
  state.first_moment = Tensor(shape, 0.0);
  state.second_moment = Tensor(shape, 0.0);
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("adam_step: parameter " + shape_string(param.shape()) + " vs gradient " +
                         shape_string(grad.shape()));
  }
  if (state.first_moment.empty()) state.first_moment = Tensor(param.shape(), 0.0);
  if (state.second_moment.empty()) state.second_moment = Tensor(param.shape(), 0.0);
  if (state.first_moment.shape() != param.shape() || state.second_moment.shape() != param.shape()) {
    throw DimensionError("adam_step: moment shape does not match parameter " + shape_string(param.shape()));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  Tensor& m = state.first_moment;
  Tensor& v = state.second_moment;
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Adam::Adam(std::vector<Var> params, double learning_rate) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const Var& p : params_) states_.push_back(AdamState::for_shape(p.shape(), learning_rate));
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i].mutable_value(), params_[i].grad(), states_[i]);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Var& p : params_) p.zero_grad();
}

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

double check_one(const std::function<Var()>& loss, Var& param, double h) {
  param.zero_grad();
  backward(loss());
  const Tensor analytic = param.grad();
  param.zero_grad();

  Tensor& x = param.mutable_value();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = x[i];
    x[i] = original + h;
    const double plus = loss().item();
    x[i] = original - h;
    const double minus = loss().item();
    x[i] = original;
    worst = std::max(worst, relative_error(analytic[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

}  // namespace

double finite_diff_check(const std::function<Var(const Var&)>& fn, const Tensor& at, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  Var x = Var::parameter(at);
  return check_one([&] { return fn(x); }, x, h);
}

std::vector<double> finite_diff_check_params(const std::function<Var()>& loss, std::vector<Var> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check_params: step must be positive");
  std::vector<double> errors;
  errors.reserve(params.size());
  for (Var& p : params) {
    for (Var& other : params) other.zero_grad();
    errors.push_back(check_one(loss, p, h));
  }
  return errors;
}

}  // namespace dppn
