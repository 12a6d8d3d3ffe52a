// Log-Harnack check for a linear drift driven by fBM under a stable clock.
#include <cstdio>

#include "tcfbm/harnack.hpp"

int main() {
  using namespace tcfbm;
  NoiseModel model;
  model.dim = 1;
  model.hurst = {0.3};
  model.clocks = {ClockSpec::subordinator(BernsteinSpec::stable(0.5))};
  const DriftSpec drift = linear_drift(1, 1.0);

  HarnackOptions opt;
  opt.n_paths = 5000;
  opt.n_z_samples = 5000;
  opt.seed = 7;

  const auto f = FunctionDescriptor::constant(1.0) + FunctionDescriptor::clamp(FunctionDescriptor::coord(0), 0.0, 1.0);
  const auto rep = verify_inequality(InequalityKind::log, f, {0.0}, {1.0}, 1.0, 2.0, model, drift, opt);

  std::printf("theta_H          %.6f\n", rep.bound.theta);
  std::printf("Z factor         %.6f +- %.6f\n", rep.bound.expectation.mean, rep.bound.expectation.se);
  std::printf("P_T log f(y)     %.6f +- %.6f\n", rep.lhs.mean, rep.lhs.se);
  std::printf("log P_T f(x)+C   %.6f +- %.6f\n", rep.rhs, rep.rhs_se);
  std::printf("margin           %.6f  %s\n", rep.margin, rep.pass ? "pass" : "FAIL");
  return rep.pass ? 0 : 2;
}
