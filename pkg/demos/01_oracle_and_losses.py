"""Exact LP solutions and the four KKT residual terms, by hand."""
import numpy as np

from kktnet.oracle import Status, solve_lp, verify_kkt
from kktnet.problem import KktPoint, LossWeights, ProblemInstance, kkt_loss, kkt_residual_losses, normalize

# %% A box LP: min -x1 - x2 s.t. x1 <= 1, x2 <= 1. The optimum sits on the corner.
box = ProblemInstance.lp(np.eye(2), [1, 1], [-1, -1])
out = solve_lp(box)
print(out.status, out.point.x, out.point.lam, "active rows", out.active_set)
print("KKT check:", verify_kkt(box, out.point, 1e-8))

# %% Residual terms at a wrong guess: infeasible x, negative first multiplier
guess = KktPoint([2, 2], [-1, 0.5])
terms = kkt_residual_losses(box, guess)
print("l_pf, l_df, l_cs, l_s =", terms.as_tuple())  # (1, 0.5, 0.625, 2.125)
w = LossWeights(0.1, 0.1, 0.2, 0.6)
print("weighted KKT loss =", kkt_loss(terms, w))     # 1.55

# at the exact solution every term vanishes
print("terms at optimum:", kkt_residual_losses(box, out.point).as_tuple())

# %% Non-optimal outcomes
print(solve_lp(ProblemInstance.lp(np.eye(2), [1, 1], [1, 1])).status)             # unbounded
print(solve_lp(ProblemInstance.lp([[1, 1], [1, 1]], [1, 2], [1, -1])).status)      # degenerate
assert solve_lp(box).status is Status.OPTIMAL

# %% Dividing every block by the largest entry leaves x* and lambda* alone
raw = ProblemInstance.lp([[3, 1], [-2, 7]], [6, 4], [-5, -9])
norm, theta = normalize(raw)
a, b = solve_lp(raw).point, solve_lp(norm).point
print("theta", theta, "| x* diff", np.abs(a.x - b.x).max(), "| lambda* diff", np.abs(a.lam - b.lam).max())
