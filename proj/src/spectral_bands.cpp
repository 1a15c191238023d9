#include <cmath>

#include "fef/spectral.hpp"

namespace fef {

namespace {
// signed normalized frequency in [-0.5, 0.5) for bin i of extent n
double norm_freq(int64_t i, int64_t n) {
  int64_t k = (i <= (n - 1) / 2) ? i : i - n;
  return static_cast<double>(k) / static_cast<double>(n);
}
}  // namespace

BandMasks band_masks(const Shape& extents, double r1, double r2) {
  FEF_CHECK(extents.size() == 3, "band_masks: want (D,H,W) extents");
  FEF_CHECK(r1 > 0 && r1 < r2 && r2 <= 1.0, "band_masks: degenerate cutoffs (",
            r1, ", ", r2, ")");
  int64_t d = extents[0], h = extents[1], w = extents[2];
  BandMasks m;
  m.r1 = r1;
  m.r2 = r2;
  m.low = Tensor(extents);
  m.mid = Tensor(extents);
  m.high = Tensor(extents);
  const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
  int64_t flat = 0;
  for (int64_t id = 0; id < d; ++id) {
    double fd = norm_freq(id, d) / 0.5;
    for (int64_t ih = 0; ih < h; ++ih) {
      double fh = norm_freq(ih, h) / 0.5;
      for (int64_t iw = 0; iw < w; ++iw, ++flat) {
        double fw = norm_freq(iw, w) / 0.5;
        double r = std::sqrt(fd * fd + fh * fh + fw * fw) * inv_sqrt3;
        if (r <= r1) {
          m.low.data()[flat] = 1;
          ++m.low_count;
        } else if (r <= r2) {
          m.mid.data()[flat] = 1;
          ++m.mid_count;
        } else {
          m.high.data()[flat] = 1;
          ++m.high_count;
        }
      }
    }
  }
  return m;
}

std::array<ComplexTensor, 3> band_decompose(const ComplexTensor& s,
                                            const BandMasks& m) {
  const Shape& sp = s.re.shape();
  FEF_CHECK(sp.size() >= 3, "band_decompose: rank too small");
  Shape tail(sp.end() - 3, sp.end());
  FEF_CHECK(tail == m.low.shape(), "band_decompose: mask/spectrum mismatch ",
            shape_str(tail), " vs ", shape_str(m.low.shape()));
  auto apply = [&](const Tensor& mask) {
    return ComplexTensor{mul_mask(s.re, mask), mul_mask(s.im, mask)};
  };
  return {apply(m.low), apply(m.mid), apply(m.high)};
}

}  // namespace fef
