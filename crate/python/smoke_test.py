#!/usr/bin/env python3
"""Smoke test for the mflqr_py extension module.

Builds the cdylib if needed, imports it, and checks the golden values and
invariants end to end. Run from anywhere:

    python3 python/smoke_test.py
"""
import json
import shutil
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
SO_NAME = "mflqr_py.so"


def ensure_module() -> Path:
    """Build the extension module if it is missing or stale."""
    target = REPO / "target" / "release" / "libmflqr_py.so"
    staged = Path(__file__).resolve().parent / SO_NAME
    if not target.exists():
        subprocess.run(
            ["cargo", "build", "-p", "mflqr-py", "--release"],
            cwd=REPO,
            check=True,
        )
    if not staged.exists() or staged.stat().st_mtime < target.stat().st_mtime:
        shutil.copy2(target, staged)
    return staged


def approx(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def main() -> int:
    staged = ensure_module()
    sys.path.insert(0, str(staged.parent))
    import mflqr_py

    checks = 0

    def ok(label: str, cond: bool) -> None:
        nonlocal checks
        if not cond:
            print(f"[FAIL] {label}")
            raise SystemExit(1)
        checks += 1
        print(f"[ok] {label}")

    # -- module functions against hand-computed values -----------------------
    m_t = mflqr_py.backward_step([[0.0]], [[1.0]], [[0.2]], [[51.1]], [[50.0]])
    ok("terminal backward step returns the stage weight", m_t == [[51.1]])

    m_t1 = mflqr_py.backward_step(m_t, [[1.0]], [[0.2]], [[51.1]], [[50.0]])
    ok(
        "one more step matches the full-precision hand value",
        approx(m_t1[0][0], 100.1930750903082, 1e-9),
    )

    m, iters, residual = mflqr_py.solve_are([[1.0]], [[0.2]], [[51.1]], [[50.0]])
    ok("ARE fixed point matches the quadratic-formula root", approx(m[0][0], 279.57325, 1e-4))
    ok("ARE residual is certified small", residual < 1e-9 and iters > 0)

    gain = mflqr_py.stationary_gain(m, [[1.0]], [[0.2]], [[50.0]])
    ok("stationary gain matches the scalar substitution", approx(gain[0][0], -0.91389, 1e-4))

    # -- Experiment API on the bundled reference config ----------------------
    exp = mflqr_py.Experiment.example1()
    ok("bundled experiment has 100 followers", exp.n == 100)
    ok("bundled experiment is scalar", exp.d_x == 1 and exp.d_u == 1)
    ok("bundled horizon is finite(80)", exp.horizon == "finite(80)")

    report = exp.validate()
    ok("all assumption checks pass", report["passed"] and len(report["checks"]) >= 6)

    gains = exp.gains()
    ok("gain schedule covers the horizon", len(gains["schedule"]["stages"]) == 80)
    l_dev = gains["schedule"]["stages"][0]["l_dev"][0][0]
    ok("first-stage deviation gain is at the stationary value", approx(l_dev, -0.913893, 1e-5))
    ok(
        "consensus coefficients cover the acting stages",
        len(gains["consensus"]["stages"]) == 79,
    )

    sim = exp.simulate()
    ok(
        "direct and decomposed costs agree",
        approx(sim["cost_direct"], sim["cost_decomposed"], 1e-8 * abs(sim["cost_direct"])),
    )
    ok("deviation dynamics close on the trace", sim["deviation_residual"] < 1e-10)
    ok(
        "followers converge toward the leader",
        sim["mean_abs_dev"][-1] < 0.1 * sim["mean_abs_dev"][0],
    )
    sim2 = exp.simulate()
    ok("same-seed runs are identical", sim2["trace_csv"] == sim["trace_csv"])
    sim3 = exp.simulate(seed=exp.seed + 1)
    ok("seed changes the realization", sim3["trace_csv"] != sim["trace_csv"])

    oracle = exp.oracle_check(n=3)
    ok("structured gains match the centralized oracle", oracle["max_gain_difference"] < 1e-8)
    ok(
        "expected costs agree between the two strategies",
        approx(
            oracle["expected_cost_structured"],
            oracle["expected_cost_centralized"],
            1e-8 * abs(oracle["expected_cost_centralized"]),
        ),
    )

    # -- config parsing from python-side JSON --------------------------------
    cfg = json.loads((REPO / "crates/mflqr/configs/example1.json").read_text())
    cfg["n"] = 7
    exp_small = mflqr_py.Experiment(json.dumps(cfg))
    ok("configs parse from strings with overrides", exp_small.n == 7)
    try:
        bad = dict(cfg)
        bad["cost"] = dict(cfg["cost"], R="not a matrix")
        mflqr_py.Experiment(json.dumps(bad))
        ok("bad configs are rejected", False)
    except ValueError:
        ok("bad configs are rejected", True)

    print(f"smoke test passed ({checks} checks)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
