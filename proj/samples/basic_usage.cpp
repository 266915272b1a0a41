#include <iostream>

#include "lqgent/lqgent.hpp"

int main() {
  lqgent::PhysicalParams p;  // baseline rates, omega0 = 1
  p.g = -0.22;

  const lqgent::FeedbackConfig fb{lqgent::FeedbackMode::Independent, 0.1};
  const lqgent::ClosedLoop cl = lqgent::closed_loop(p, fb, lqgent::CostKind::epr(0.0));

  const auto cond = lqgent::entanglement_report(cl.sigma_cond, cl.model);
  const auto uncond = lqgent::entanglement_report(cl.sigma_uncond, cl.model);
  std::cout << "E_N conditional   = " << cond.log_negativity << '\n'
            << "E_N unconditional = " << uncond.log_negativity << '\n'
            << "EPR variance      = " << uncond.epr_variance << '\n';
}
