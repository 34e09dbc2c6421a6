"""Regenerate the Matrix Market fixtures shipped in ``src/stabmor/data``.

Run from the repository root::

    python3 tools/generate_fixtures.py

The files are deterministic: generators are seeded and values are written
with round-trip precision.
"""

from pathlib import Path

from stabmor.arnoldi import arnoldi_basis
from stabmor.datasets import rlc_ladder, spring_chain
from stabmor.io import save_system
from stabmor.stabilize import stability_sweep

DATA = Path(__file__).resolve().parents[1] / "src" / "stabmor" / "data"


def main():
    spring50 = spring_chain(25, seed=0)
    save_system(DATA, spring50, "spring50", s0=1.0)

    spring200 = spring_chain(100, seed=0, mass_damping=0.05, stiffness_damping=0.01)
    V = arnoldi_basis(spring200, 0.5, 60)
    report = stability_sweep(spring200, V)
    save_system(DATA, spring200, "spring200", s0=0.5, r_max=60,
                unstable_r=report.unstable_r)
    print(f"spring200: {len(report.unstable_r)} unstable plain Galerkin models in r = 1..60")

    rlc = rlc_ladder(10, seed=0)
    save_system(DATA, rlc, "rlc_ladder", s0=1.0)
    print(f"wrote fixtures to {DATA}")


if __name__ == "__main__":
    main()
