"""Smoke test for the pairseek_py extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
then run:
    python python/smoke_test.py
"""

import json
import math
import tempfile
from pathlib import Path

import pairseek_py as ps

ROOT = Path(__file__).resolve().parent.parent


def check_phase_math():
    truth, df, tau = 0.4, 3.1e6, -82e-9
    f1 = 1.40e9
    measured = ps.wrap_phase(
        ps.sawtooth_ew_phase(f1 + df, -tau, truth) - ps.sawtooth_ew_phase(f1, -tau)
    )
    corrected = ps.correct_pair_phase(measured, df, tau)
    assert abs(ps.wrap_phase(corrected - truth)) < 1e-9

    b = ps.phase_noise_budget(15.6, 10.0, 7e6, 1e-9)
    assert abs(b["ra_bin_term"] - math.pi / 15.6) < 1e-12
    assert abs(ps.adjacency_likelihood(4, 5, 666.7) - 0.006) < 5e-5


def check_geometry():
    g = ps.Geometry(declination_deg=0.0)
    assert abs(g.fringe_period_ra_hours() - 24 / (2 * math.pi) / 33) < 1e-12
    bpp, offsets = ps.Geometry(
        declination_deg=0.0, fringe_period_override_hours=0.1168
    ).alias_bin_offsets()
    assert abs(bpp - 15.573) < 1e-3 and offsets == [-16, 16]


def check_errors():
    try:
        ps.Config('{"scenario": {"integration_s": 1.0}}')
    except ps.PairseekError as e:
        assert str(e).startswith("invalid-scenario")
    else:
        raise AssertionError("bad scenario accepted")
    try:
        ps.event_probability([0, 0])
    except ps.PairseekError as e:
        assert str(e).startswith("zero-coverage")
    else:
        raise AssertionError("zero coverage accepted")


def check_run():
    cfg = ps.Config.from_path(ROOT / "fixtures" / "injection.json")
    scenario = json.loads(cfg.to_json())
    scenario["scenario"]["duration_days"] = 3.0
    scenario["scenario"]["daily_ra_window_hours"] = [4.0, 6.5]
    cfg = ps.Config(json.dumps(scenario))

    run = ps.run(cfg, threads=2)
    source = run.bin_of_ra(5.25)
    bin_, d = run.max_final_d()
    assert bin_ == source, (bin_, d)
    assert run.ledger(source)["count"] > run.ledger(source)["mean"]
    ablated = dict(run.ablate(0.0))
    assert ablated[source] < d
    assert run.report_json() == ps.run(cfg).report_json()

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        ps.synth_stage(cfg, tmp / "s", threads=2)
        ps.pair_stage(cfg, tmp / "s", tmp / "p")
        report = ps.discover_stage(cfg, tmp / "p", tmp / "d")
        assert report == json.loads(run.report_json())
    return run.counts, d


def main():
    check_phase_math()
    check_geometry()
    check_errors()
    counts, d = check_run()
    st = ps.selftest(frames=2000)
    assert st["prefix_scan"]["pass"]
    print(f"ok: kept {counts['kept']} pairs, source-bin d {d:.2f}")


if __name__ == "__main__":
    main()
