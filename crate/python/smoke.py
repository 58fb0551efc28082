"""Smoke test for the thermopinn extension module.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
"""

import math
import sys
import tempfile
from pathlib import Path

import thermopinn as tp


def main() -> int:
    codes = tp.problem_codes()
    print("problems:", ", ".join(codes))
    assert "KIRSCH" in codes

    spec = tp.ProblemSpec("1D-FGM-THERMO-ELAS")
    print(spec)
    ok, worst = tp.gradient_check(spec, seed=0)
    print(f"gradient check: {'pass' if ok else 'FAIL'} (max rel error {worst:.2e})")
    assert ok

    run = tp.run(spec)
    print(run, f"final loss {run.final_loss['total']:.6f}")
    for name, s in run.scores().items():
        print(f"  {name:>4}  R2 {s['r2']:+.4f}  max|err| {s['max_abs_error']:.2e}")
    for name, requirement, passed in run.checks():
        print(f"  {name:>4}  {requirement:<28} {'pass' if passed else 'FAIL'}")
    assert run.passed
    assert all(math.isfinite(v) for v in run.loss_history)

    u = run.predict([(0.0, 0.0), (0.5, 0.0)])["u1"]
    assert abs(u[0]) < 1e-14

    with tempfile.TemporaryDirectory() as tmp:
        written = run.write(Path(tmp))
        names = sorted(Path(p).name for p in written)
        print("artifacts:", ", ".join(names))
        assert "scores.csv" in names

    again = tp.ProblemSpec.from_toml(spec.to_toml())
    assert again.to_toml() == spec.to_toml()

    bad = tp.ProblemSpec("1D-FGM-ELAS-NEU")
    bad.learning_rate = 1e300
    try:
        tp.run(bad)
    except ArithmeticError as e:
        print("divergence reported:", e)
    else:
        raise AssertionError("divergent run was not reported")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
