#!/usr/bin/env python3
"""Smoke test for the mfpoly_py extension module.

Builds the cdylib if needed, imports it from the cargo target directory,
and runs one check per exposed surface: scalar polynomial maps, the
diagonal solve pipeline, a triplet solve, and the fracture block system
end to end.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_or_build_module() -> Path:
    candidates = [
        REPO / "target" / "release" / "libmfpoly_py.so",
        REPO / "target" / "debug" / "libmfpoly_py.so",
    ]
    for c in candidates:
        if c.exists():
            return c
    subprocess.run(
        ["cargo", "build", "-p", "mfpoly-py"],
        cwd=REPO,
        check=True,
    )
    return candidates[1]


def main() -> int:
    lib = locate_or_build_module()
    stage = Path(tempfile.mkdtemp(prefix="mfpoly_py_"))
    shutil.copy(lib, stage / "mfpoly_py.so")
    sys.path.insert(0, str(stage))
    import mfpoly_py

    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        if not ok:
            failures += 1

    check("version", bool(mfpoly_py.version()))

    # Scalar map: the classical 6-level Newton value at the lower bound
    # of [1, 1e5] is 0.03987 to four digits.
    pm = mfpoly_py.PolyMap(1.0, 1e5, xi=0.0, variant="newton", nlev=6)
    v = pm.eval(1.0)
    check("polymap eval", math.isclose(v, 0.03987, rel_tol=5e-4), f"eval(1)={v:.5f}")
    check("polymap degree", pm.degree == 63, f"degree={pm.degree}")

    mapped, kappa, kappa10 = pm.spectrum_report([float(i) for i in range(1, 101)])
    check(
        "spectrum report",
        len(mapped) == 100 and kappa >= 1.0 and kappa10 <= kappa,
        f"kappa={kappa:.3f}",
    )

    # Flagship diagonal experiment: n=1e5, nlev 6, xi 1e-4.
    r = mfpoly_py.solve_diag_ramp(100_000, nlev=6, xi=1e-4, tol=1e-10)
    check(
        "diag solve window",
        r["converged"] and 28 <= r["iters"] <= 40,
        f"iters={r['iters']}",
    )
    check(
        "counter laws",
        r["mvp"] == r["iters"] * (r["degree"] + 1) and r["ddot"] == 3 * r["iters"] + 1,
        f"mvp={r['mvp']} ddot={r['ddot']}",
    )

    # Triplet solve on a small SPD tridiagonal system.
    n = 50
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.append(i)
        cols.append(i)
        vals.append(2.0)
        if i + 1 < n:
            rows += [i, i + 1]
            cols += [i + 1, i]
            vals += [-1.0, -1.0]
    rhs = [1.0] * n
    r = mfpoly_py.solve_csr(n, rows, cols, vals, rhs, nlev=3, tol=1e-12)
    x = r["x"]
    resid = 0.0
    for i in range(n):
        ax = 2.0 * x[i]
        if i > 0:
            ax -= x[i - 1]
        if i + 1 < n:
            ax -= x[i + 1]
        resid = max(resid, abs(ax - 1.0))
    check("triplet solve", r["converged"] and resid < 1e-9, f"resid={resid:.2e}")

    # Fracture block system: generate, solve, recover, check residuals.
    sysdir = stage / "dfn"
    stats = mfpoly_py.generate_dfn(str(sysdir), nf=12, avg_block=16, trace_density=0.3, seed=11)
    r = mfpoly_py.solve_dfn(str(sysdir), degree=31, xi=1e-3, tol=1e-11, return_solution=True)
    worst = max(r["block_residuals"])
    check(
        "dfn solve",
        r["converged"] and worst < 1e-9 and len(r["u"]) == stats["nu"],
        f"worst block residual={worst:.2e}",
    )

    print(f"{8 - failures}/8 checks passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
