"""Plain Galerkin versus stabilised projection on a damped spring chain.

A 200-state mass-spring chain is reduced by one-sided Krylov projection at
``s0 = 0.5`` for every order ``r = 1..60``. Plain Galerkin models (``W = V``)
lose stability for many orders because ``A + A^T`` is indefinite. Replacing
``W`` by ``M E V``, with ``M`` approximated by Gauss-Legendre quadrature,
restores stability once enough nodes are used. The table shows how many of
the 60 models are stable, and the relative H2 error of the largest one.

Run with ``python gallery/plain_vs_stabilized.py``.
"""

from stabmor.arnoldi import arnoldi_basis
from stabmor.datasets import load_fixture
from stabmor.quadrature import gauss_legendre_rule
from stabmor.stabilize import stability_sweep
from stabmor.system import FrequencyGrid

sys_, manifest = load_fixture("spring200")
r_max = int(manifest.extra["r_max"])
V = arnoldi_basis(sys_, manifest.s0, r_max)
grid = FrequencyGrid.logspace(1e-3, 1e2, 800)

print(f"{sys_.name}: n = {sys_.n}, s0 = {manifest.s0.real:g}, r = 1..{r_max}")
print(f"{'method':>14} {'stable':>8} {'rel H2 error at r_max':>22}")
for label, rule in [("plain", None)] + [(f"GL K={K}", gauss_legendre_rule(K))
                                        for K in (1, 2, 4, 8, 16)]:
    report = stability_sweep(sys_, V, rule, grid=grid)
    last = report.records[-1]
    err = f"{last.rel_h2_error:.3e}" if last.stable else "unstable"
    print(f"{label:>14} {report.stable_count:>5}/{r_max} {err:>22}")
