"""Smoke test for the fbmcf_py extension.

Build and install it first:
    maturin build --release -m crates/python/Cargo.toml -o dist && pip install dist/fbmcf_py-*.whl
"""

import math
import sys
import tempfile
from pathlib import Path

import fbmcf_py as f


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL: {what}")
    print(f"ok: {what}")


def support_surface():
    p = f.SupportPatch.paraboloid(0.5, 1.0)
    check(p.verify_kappa_condition(), "paraboloid satisfies the kappa condition")
    x = p.tubular_map((0.1, 0.05, -0.2))
    back = p.reflect(p.reflect(x))
    check(max(abs(a - b) for a, b in zip(x, back)) < 1e-10, "reflection is an involution")
    _, d = p.project(x)
    check(abs(d - 0.05) < 1e-9, "signed distance recovers y2")
    try:
        p.tubular_map((5.0, 0.0, 0.0))
    except ValueError:
        check(True, "out-of-chart point raises ValueError")
    else:
        check(False, "out-of-chart point raises ValueError")


def stationary_half_plane():
    g = f.Grid.half_disk(0.5, 1 / 16)
    s = f.GraphSurface.from_function(g, f.SupportPatch.flat(), lambda a, b: 0.0, topology="disk")
    traj = f.run(s, 0.01)
    check(traj.reached_end, "half-plane run completes")
    last = traj.heights(len(traj.snapshot_times()) - 1)
    check(max(abs(u) for u in last if not math.isnan(u)) == 0.0, "half-plane stays put")
    check(list(traj.monitors()[0]) and len(traj.monitors()[0]) == 6, "monitor rows have six columns")


def hemisphere():
    g = f.Grid.half_disk(0.375, 1 / 32)
    s = f.GraphSurface.hemisphere(g, f.SupportPatch.flat(), 1.0)
    traj = f.run(s, 0.02, snapshot_stride=5, exact_rim=1.0)
    check(traj.reached_end and abs(traj.snapshot_times()[-1] - 0.02) < 1e-12, "hemisphere run reaches t_end")
    rep = traj.density((0.0, 0.15, 0.965), 0.02, [0.0192, 0.0194, 0.0196, 0.0198], r=0.03)
    check(rep.max_upward_violation < 1e-6, f"interior density is monotone (limit {rep.limit_estimate:.6f})")
    try:
        f.run(s, 0.3, exact_rim=1.0)
    except f.NumericalError:
        check(True, "running past the singular time raises NumericalError")
    else:
        check(False, "running past the singular time raises NumericalError")


def scenario_and_rescale():
    text = """
output = "hemi"
topology = "disk"

[grid]
h = 0.03125
r_dom = 0.375

[initial]
kind = "exact"
solution = "hemisphere"
r0 = 1.0

[flow]
t_end = 0.02
snapshot_stride = 5
outer_bc = "dirichlet_exact"
"""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "hemi.toml"
        path.write_text(text)
        out = Path(tmp) / "hemi"
        check(f.run_scenario(path, out) == 0, "scenario run exits 0")
        check((out / "monitors.csv").read_text().startswith("t,area,perimeter,energy,max_H,max_A\n"), "monitors.csv header")
        traj = f.Trajectory.load(out)
        a = traj.rescale((0.0, 0.0, 0.0), 0.25, 0.48)
        b = traj.normalized((0.0, 0.0, 0.0), 0.25, -2 * math.log(0.48))
        check(a.max_difference(b) < 1e-12, "normalized frame matches the parabolic one")
        pl = a.planarity(center=(0.0, 0.2, 1.99), radius=0.5)
        check(pl.sheets == 1 and pl.half_plane, f"rescaled hemisphere is one boundary sheet (deviation {pl.deviation:.3e})")


def acceptance():
    rows = f.run_verify(True)
    check(len(rows) == 12, "twelve criteria reported")
    failed = [r for r in rows if r[2] == "FAIL"]
    check(not failed, f"fast acceptance suite has no failures {failed}")


if __name__ == "__main__":
    support_surface()
    stationary_half_plane()
    hemisphere()
    scenario_and_rescale()
    acceptance()
    print("smoke test passed")
