#include "elearn/numerics/adam.hpp"

#include <cmath>

namespace elearn {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw Error("Adam: learning rate must be positive");
  if (!(options_.decay_factor > 0.0 && options_.decay_factor <= 1.0)) {
    throw Error("Adam: decay factor must lie in (0, 1]");
  }
  for (Parameter* p : params_) {
    first_moment_.emplace_back(p->value.rows(), p->value.cols());
    second_moment_.emplace_back(p->value.rows(), p->value.cols());
  }
}

double Adam::effective_learning_rate() const {
  return options_.learning_rate * std::pow(options_.decay_factor, static_cast<double>(epoch_));
}

void Adam::step() {
  for (Parameter* p : params_) {
    if (!p->has_grad || !p->grad.same_shape(p->value)) {
      throw Error("Adam: parameter '" + p->name + "' has no gradient");
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double lr = effective_learning_rate();
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Tensor& m = first_moment_[k];
    Tensor& v = second_moment_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::end_epoch() { ++epoch_; }

}  // namespace elearn
