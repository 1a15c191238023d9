#include "fef/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fef {

std::string FdReport::to_string() const {
  return detail::msg(pass ? "pass" : "FAIL", " max_rel_err=", max_rel_err,
                     " (input ", worst_input, " coord ", worst_coord,
                     " analytic=", worst_analytic, " numeric=", worst_numeric,
                     ", ", coords_checked, " coords)");
}

FdReport finite_difference_check(const ScalarClosure& closure,
                                 std::vector<Tensor> inputs, double h,
                                 double tol, int64_t max_coords_per_input,
                                 uint64_t coord_seed) {
  FEF_CHECK(h > 0, "finite_difference_check: h must be positive");
  for (auto& t : inputs) {
    t.check_finite("finite_difference_check input");
    t.set_requires_grad(true);
    t.clear_grad();
  }

  // Analytic pass.
  std::vector<std::vector<real_t>> analytic;
  {
    Tape tape;
    Tensor loss = closure(inputs);
    FEF_CHECK(loss.defined() && loss.numel() == 1,
              "closure must reduce to a scalar");
    backward(loss, tape);
    for (auto& t : inputs) {
      if (t.has_grad())
        analytic.push_back(t.grad());
      else
        analytic.emplace_back(t.numel(), real_t(0));
    }
  }

  FdReport rep;
  rep.max_rel_err = 0.0;
  NoGradGuard ng;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    int64_t n = t.numel();
    std::vector<int64_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords_per_input > 0 && n > max_coords_per_input) {
      Rng rng(coord_seed + ti);
      for (int64_t i = 0; i < max_coords_per_input; ++i) {
        int64_t j = rng.uniform_int(i, n - 1);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords_per_input);
    }
    for (int64_t c : coords) {
      real_t saved = t.data()[c];
      t.data()[c] = saved + static_cast<real_t>(h);
      double f_plus = closure(inputs).item();
      t.data()[c] = saved - static_cast<real_t>(h);
      double f_minus = closure(inputs).item();
      t.data()[c] = saved;
      FEF_CHECK(std::isfinite(f_plus) && std::isfinite(f_minus),
                "non-finite perturbation result at input ", ti, " coord ", c);
      double numeric = (f_plus - f_minus) / (2.0 * h);
      double a = analytic[ti][c];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      double rel = std::fabs(a - numeric) / denom;
      ++rep.coords_checked;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_input = static_cast<int>(ti);
        rep.worst_coord = c;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace fef
