"""
Simulate a preset design and estimate it
========================================

Draw a sample from the lagged-observation design, fit it by multi-start
maximum likelihood and compare the estimates with the truth.
"""
import numpy as np

from mstvtp import align_to_truth, dgp_preset, estimate, forecast_metrics, run_filter, simulate

spec, truth = dgp_preset(2)
print(spec)
sim = simulate(spec, truth, T=1000, seed=7)
data = sim.dataset("dgp2")

res = estimate(data, spec, n_starts=5, seed=3, cutoff=10)
print(f"converged {res.converged} ({res.n_starts_converged}/{res.n_starts} starts), "
      f"loglik {res.loglik:.2f}, AIC {res.aic:.2f}, BIC {res.bic:.2f}")

# Regime labels are only identified up to permutation.
hat, se, _, perm = align_to_truth(res.params_hat, spec, truth, res.se)
for name in ("mu", "sigma2", "f0", "coef"):
    print(f"{name:7s} true {np.round(getattr(truth, name), 3)}  hat {np.round(getattr(hat, name), 3)}")
if se is not None:
    print("se(mu)", np.round(se.mu, 3))

out = run_filter(data, spec, res.params_hat, cutoff=10)
print(forecast_metrics(out, data.y))
