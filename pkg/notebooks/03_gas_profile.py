"""
Profile likelihood of the score-driven model
============================================

The score-driven family is hard to pin down: the likelihood is flat in A
around zero. This script fits one sample and profiles along A = v * (1, -1).
"""
import numpy as np

from mstvtp import dgp_preset, estimate, profile_loglik, simulate

spec, truth = dgp_preset(4)
sim = simulate(spec, truth, T=1000, seed=11)
data = sim.dataset()

res = estimate(data, spec, n_starts=4, seed=0, cutoff=10, compute_se=False)
print("A hat", np.round(res.params_hat.A, 3), " true", truth.A)

grid = np.linspace(-0.2, 0.2, 9)
prof = profile_loglik(data, spec, res.params_hat, {"A[0]": 1.0, "A[1]": -1.0}, grid)
# Cells whose inner fit did not converge are NaN in loglik; loglik_raw keeps them.
for v, ll, raw in zip(prof.axes[0], prof.loglik, prof.loglik_raw):
    print(f"v {v:+.2f}  loglik {ll:.3f}  raw {raw:.3f}")
print("profile maximum at v =", prof.argmax()[0])
