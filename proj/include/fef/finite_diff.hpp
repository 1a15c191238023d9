#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fef/tensor.hpp"

namespace fef {

struct FdReport {
  double max_rel_err = 0.0;
  bool pass = false;
  int worst_input = -1;
  int64_t worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coords_checked = 0;
  std::string to_string() const;
};

using ScalarClosure = std::function<Tensor(const std::vector<Tensor>&)>;

// Central-difference check of the tape gradient of `closure` (which must
// reduce to a scalar) with respect to every coordinate of every input.
// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
// `max_coords_per_input` > 0 spot-checks that many deterministically chosen
// coordinates instead of all of them.
FdReport finite_difference_check(const ScalarClosure& closure,
                                 std::vector<Tensor> inputs, double h,
                                 double tol,
                                 int64_t max_coords_per_input = 0,
                                 uint64_t coord_seed = 17);

}  // namespace fef
