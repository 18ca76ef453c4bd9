"""Smoke test for the nonlocal_kpp extension module."""

import math
import tempfile

import nonlocal_kpp as nk


def main():
    ks = nk.Kernel.keller_segel(0.5, 1.0)
    facts = ks.facts()
    assert abs(facts["jump"] - 0.5) < 1e-12
    assert abs(facts["l1_norm"] - 0.5) < 1e-12
    assert ks(0.0) == 0.0 and ks(1.0) == -ks(-1.0)

    report = nk.cstar(ks)
    assert abs(report["cstar"] - 2.5) < 1e-9, report
    assert nk.cstar(nk.Kernel.step(0.25)) is None
    assert repr(nk.Kernel.parse("step:k_inf=0.25")).startswith("Kernel(step")

    dx = 0.05
    n = 401
    x0 = -(n - 1) / 2 * dx
    u = [math.exp(-((x0 + i * dx) ** 2)) for i in range(n)]
    c = nk.conv(ks, u, dx)
    assert len(c) == n
    assert abs(c[n // 2]) < 1e-12
    assert max(abs(v) for v in c) <= 0.5 * facts["l1_norm"] * max(u) + 1e-6

    run = nk.simulate(nk.Kernel.zero(), t_end=10.0)
    assert len(run.t) == 21 and run.t[-1] == 10.0
    speed, r2 = run.fit("front", "linear")
    assert 1.6 < speed < 2.1, speed
    assert max(run.u_max) <= 1.0 + 1e-12
    assert run.csv().startswith("t,")

    with tempfile.TemporaryDirectory() as out:
        _, claims = nk.run_scenario("keller-segel", ["sim.t_end=5"], out)
        assert any(line.startswith("PASS linf") for line in claims), claims

    ok, text = nk.verify("hill")
    assert ok, text

    try:
        nk.Kernel.keller_segel(-1.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative chi accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
