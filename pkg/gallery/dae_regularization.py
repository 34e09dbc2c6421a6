"""Regularising an RLC ladder descriptor system, then reducing it.

The ladder has algebraic node equations, so ``E`` is singular. The
perturbation ``E^ = E - beta^2 A``, ``A^ = A + beta E`` gives an ODE whose
H2 distance to the descriptor system shrinks roughly tenfold per decade of
``beta``. The regularised system is then reduced with the stabilised
projection. For small ``beta`` the quadrature integrand develops a feature
of width about ``beta^2`` next to ``xi = 1``. A single adaptive starting
interval never resolves it, and the approximate ``M`` loses definiteness.
Starting the adaptive rule from intervals graded toward ``xi = 1`` fixes
this at a modest cost.

Run with ``python gallery/dae_regularization.py``.
"""

from stabmor.arnoldi import arnoldi_basis
from stabmor.dae import regularisation_error_sweep, regularize
from stabmor.datasets import load_fixture
from stabmor.quadrature import AdaptiveConfig, graded_breakpoints
from stabmor.stabilize import stability_sweep

dae, manifest = load_fixture("rlc_ladder")
betas = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
sweep = regularisation_error_sweep(dae, betas)

coarse = AdaptiveConfig()
graded = AdaptiveConfig(breakpoints=graded_breakpoints(30))
print(f"{dae.name}: n = {dae.n}, descriptor system with singular E")
print(f"{'beta':>7} {'H2 error':>10} {'ODE stable':>10} {'plain':>6} {'adaptive':>9} {'graded':>7}")
for entry in sweep.entries:
    if entry.failure:
        print(f"{entry.beta:>7.0e}  failed: {entry.failure}")
        continue
    ode = regularize(dae, entry.beta)
    V = arnoldi_basis(ode, manifest.s0, 25)
    r = V.shape[1]
    counts = [stability_sweep(ode, V, q).stable_count for q in (None, coarse, graded)]
    print(f"{entry.beta:>7.0e} {entry.h2_error:>10.3e} {str(entry.regularised_stable):>10} "
          + " ".join(f"{c:>3}/{r}" for c in counts))
