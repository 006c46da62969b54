#include "elearn/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace elearn {

namespace {

double eval(const std::function<ad::Var(ad::Tape&)>& loss) {
  ad::Tape tape;
  return loss(tape).item();
}

}  // namespace

GradCheckResult gradient_check(const std::function<ad::Var(ad::Tape&)>& loss,
                               const std::vector<Parameter*>& params, std::mt19937_64& rng,
                               double h, std::size_t entries_per_parameter, double abs_floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::Var l = loss(tape);
    tape.backward(l);
  }
  GradCheckResult result;
  for (Parameter* p : params) {
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > entries_per_parameter) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(entries_per_parameter);
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = eval(loss);
      p->value[i] = saved - h;
      const double down = eval(loss);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->has_grad ? p->grad[i] : 0.0;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        if (rel >= result.max_relative_error) {
          result.max_relative_error = rel;
          result.worst_parameter = p->name;
          result.worst_index = i;
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace elearn
