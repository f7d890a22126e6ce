"""Smoke test for the copulaqr Python module.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import json
import math

import copulaqr


def main():
    spec = copulaqr.DgpSpec("A", 200, 0.3)
    sample = spec.simulate(7)
    assert len(sample) == 200 and sample.dim == 2
    assert 0 < sample.events < 200

    est = copulaqr.Estimator.fit(sample, mode="SP", censoring="km", seed=1)
    x = sample.x[0]
    taus = [k / 20 for k in range(1, 20)]
    curve = est.predict_curve(x, taus)
    assert all(a <= b for a, b in zip(curve, curve[1:])), curve
    assert est.predict(x, 0.5) == curve[9]
    assert abs(est.predict(x, 0.5) - spec.true_quantile(x, 0.5)) < 0.3

    w = est.weights(x)
    assert len(w) == len(est.event_values) and all(v >= 0 for v in w)

    again = copulaqr.Estimator.from_json(est.to_json())
    assert again.predict_curve(x, taus) == curve
    assert json.loads(est.describe())

    complete = copulaqr.Sample([0.1, 0.4, 0.2, 0.9] * 10, [[v] for v in range(40)])
    assert complete.events == 40

    try:
        est.predict(x, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("tau outside (0,1) accepted")

    pe = copulaqr.prediction_error(copulaqr.DgpSpec("A", 60).simulate(3), 0.5)
    assert math.isfinite(pe) and pe > 0

    table = copulaqr.run_experiment("A", 100, 0.0, [0.3, 0.5], ["SP"], replications=4, seed=5)
    lines = table.strip().splitlines()
    assert lines[0].startswith("dgp,n,censoring,tau,B,excluded,SP-km_imse_x1000"), lines[0]
    assert len(lines) == 3

    demo = copulaqr.dette_demo(seed=2)
    assert len(demo["x"]) == 101
    assert demo["mse_nonparametric"] < demo["mse_parametric"]

    print("smoke test ok:", repr(est), f"pe={pe:.4f}", f"dette mse np={demo['mse_nonparametric']:.2e}")


if __name__ == "__main__":
    main()
