"""Smoke test for the nslab_py extension.

Build first:
    cargo build -p nslab-py --release --features extension-module
then run:
    python3 python/smoke_test.py [path/to/libnslab_py.so]
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load(path=None):
    candidates = [pathlib.Path(path)] if path else [
        ROOT / "target" / "release" / "libnslab_py.so",
        ROOT / "target" / "debug" / "libnslab_py.so",
    ]
    for lib in candidates:
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("nslab_py", str(lib))
            spec = importlib.util.spec_from_loader("nslab_py", loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit(f"libnslab_py.so not found in {[str(c) for c in candidates]}; build it first")


def main():
    ns = load(sys.argv[1] if len(sys.argv) > 1 else None)

    g = ns.Grid(2 * math.pi, 16)
    assert g.resolution == 16 and abs(g.dx - 2 * math.pi / 16) < 1e-15
    pts = g.points()
    assert len(pts) == 16 ** 3

    # Leray projection of a gradient field is zero, of a shear is the shear
    grad = ns.Field.from_samples(g, [[math.cos(p[0]) for p in pts], [0.0] * len(pts), [0.0] * len(pts)])
    assert grad.leray_project().energy() < 1e-28
    shear = ns.Field.from_samples(g, [[math.sin(p[1]) for p in pts], [0.0] * len(pts), [0.0] * len(pts)])
    assert shear.leray_project().max_diff(shear) < 1e-15
    assert shear.heat_flow(1.0).max_diff(ns.Field.from_samples(g, [[math.exp(-1) * c for c in shear.samples()[0]], [0.0] * len(pts), [0.0] * len(pts)])) < 1e-15

    # pressure of (sin y, sin x, 0) is cos x cos y
    v = ns.Field.from_samples(g, [[math.sin(p[1]) for p in pts], [math.sin(p[0]) for p in pts], [0.0] * len(pts)])
    err = max(abs(a - math.cos(p[0]) * math.cos(p[1])) for a, p in zip(v.pressure(), pts))
    assert err < 1e-12, err

    # Taylor-Green energy follows E0 exp(-4t)
    tg = ns.Field.taylor_green(g)
    led = ns.simulate(tg, 0.1, 2e-3, cadence=10)
    e0 = led.energy[0]
    for t, e in zip(led.step_times, led.energy):
        assert abs(e / e0 - math.exp(-4 * t)) < 1e-6
    assert led.energy_defect() < 1e-5 and len(led) == 6

    kp, shells = ns.inverse_radius_kp()
    assert abs(kp - (4 * math.pi * math.log(2)) ** (1 / 3)) < 1e-10 and len(shells) == 7
    mu, bps = ns.inverse_radius_mu(2.0, (4 * math.pi * math.log(2)) ** (1 / 3))
    assert mu == 0.25 and abs(bps[1] / bps[0] - math.sqrt(2)) < 1e-6
    assert ns.swirl_dss_defect(2.0) < 1e-12

    try:
        ns.Grid(1.0, 12)
    except ValueError:
        pass
    else:
        raise AssertionError("non power-of-two grid accepted")

    with tempfile.TemporaryDirectory() as d:
        cfg = pathlib.Path(d) / "cfg.toml"
        cfg.write_text(
            "schema_version = 1\n"
            "[grid]\nbox_length = 3.141592653589793\nresolution = 32\ndealias_fraction = 0.6666666666666666\n"
            "[data]\nsource = \"preset\"\npreset = \"zero\"\n"
            "[solver]\nt_end = 0.2\ndt = 0.002\ncadence = 5\n"
            "[diagnostics]\napriori_radius = 0.5\n"
        )
        ok, summary, quantities = ns.pipeline(pathlib.Path(d) / "out", cfg)
        assert ok, summary
        assert (pathlib.Path(d) / "out" / "report.toml").exists()
        assert dict(quantities)["snapshots"] > 0

    print("nslab_py smoke test passed")


if __name__ == "__main__":
    main()
