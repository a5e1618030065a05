// SPDX-License-Identifier: Apache-2.0
#include <ostream>

#include "checks.hpp"
#include "commands.hpp"
#include "ipesr/encoding.hpp"

namespace ipesr {

int run_selfcheck(std::ostream& out, bool inject_sinc_fault) {
  double saved = 0.0;
  if (inject_sinc_fault) {
    // Far too large: the series branch then covers arguments where it is wrong.
    saved = testing::set_sinc_switch_threshold(10.0);
    out << "fault injected: sinc switch threshold set to 10\n";
  }
  const checks::Verdict results[] = {
      checks::sinc_series(500),
      checks::ipe_quadrature(20, 1 << 16, 1e-6),
      checks::ipe_limit(200, 10, 1e-9),
      checks::partition_of_unity(2000, 1e-12),
      checks::gradients(4, 1e-4),
      checks::metric_golden(),
      checks::bicubic_oracle(10),
      checks::psnr_oracle(10),
      checks::ssim_oracle(6),
      checks::render_oracle(3),
  };
  if (inject_sinc_fault) testing::set_sinc_switch_threshold(saved);
  int failed = 0;
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    failed += r.pass ? 0 : 1;
  }
  out << (failed ? std::to_string(failed) + " check(s) failed\n" : "all checks passed\n");
  return failed ? kExitRuntime : kExitOk;
}

}  // namespace ipesr
