"""Comparing the three quadrature engines on the same reduction problem.

Gauss-Legendre rules need the node count fixed up front. The nested
midpoint rule triples its nodes per iteration and stops as soon as every
reduced model is stable. Adaptive Gauss-Kronrod bisects wherever the
local error estimate is largest. Each engine is scored by the number of
transfer-function solves it spent and by how many of the 60 spring-chain
models came out stable.

Run with ``python gallery/quadrature_schemes.py``.
"""

from stabmor.arnoldi import arnoldi_basis
from stabmor.datasets import load_fixture
from stabmor.quadrature import AdaptiveConfig, MidpointRefinement, gauss_legendre_rule
from stabmor.stabilize import stability_sweep

sys_, manifest = load_fixture("spring200")
r_max = int(manifest.extra["r_max"])
V = arnoldi_basis(sys_, manifest.s0, r_max)

schemes = [(f"gauss-legendre K={K}", gauss_legendre_rule(K)) for K in (2, 6, 24)]
schemes += [("nested midpoint", MidpointRefinement(10)),
            ("adaptive GK15 tol=0.1", AdaptiveConfig(0.1, 0.1)),
            ("adaptive GK15 tol=1e-4", AdaptiveConfig(1e-4, 1e-4))]

print(f"{'scheme':>24} {'node evals':>11} {'stable':>8}")
for label, q in schemes:
    rep = stability_sweep(sys_, V, q)
    extra = f"  ({rep.iterations} iterations)" if isinstance(q, MidpointRefinement) else ""
    print(f"{label:>24} {rep.node_evals:>11} {rep.stable_count:>5}/{r_max}{extra}")
