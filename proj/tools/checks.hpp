// SPDX-License-Identifier: Apache-2.0
#pragma once

// Oracle checks shared by `ipesr selfcheck` (reduced sizes) and the
// acceptance runner (full sizes). Each returns one verdict line.

#include <string>

namespace ipesr::checks {

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

// |sinc_stable - Taylor series| on a sweep including tiny arguments.
Verdict sinc_series(int samples);
// IPE against midpoint quadrature of plain PE, random centres and radii, L <= 6.
Verdict ipe_quadrature(int cases, long nodes, double tolerance);
// IPE at radius 1e-8 against plain PE.
Verdict ipe_limit(int centers, int bandwidth, double tolerance);
// Ensemble weights sum to one, including clamped border queries.
Verdict partition_of_unity(int queries, double tolerance);
// Finite differences for every parameter, all encodings x both model variants.
Verdict gradients(int lr_size, double tolerance);
Verdict metric_golden();
// Optimized vs loop-based implementations on random 8..16 px inputs.
Verdict bicubic_oracle(int trials);
Verdict psnr_oracle(int trials);
Verdict ssim_oracle(int trials);
Verdict render_oracle(int trials);

}  // namespace ipesr::checks
