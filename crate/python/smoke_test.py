"""Smoke test for the etfcast_py extension module.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml

then run ``python python/smoke_test.py`` from the repository root.
"""

import math
import random
import shutil
import sys
import tempfile
from pathlib import Path

import etfcast_py as ec

ROOT = Path(__file__).resolve().parent.parent


def check_metrics():
    assert ec.mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    assert ec.mae([1.0, 2.0], [1.0, 4.0]) == 1.0
    assert ec.accuracy([1, 0, 1, 1], [1, 0, 0, 1]) == 0.75
    assert abs(ec.f1_score([1, 0, 1, 1], [1, 0, 0, 1]) - 0.8) < 1e-12
    assert f"{ec.coverage_pct(55, 436):.2f}" == "12.61"
    folds = ec.walk_forward(100, 20, 40)
    assert folds == [((0, 40), (40, 60)), ((0, 60), (60, 80)), ((0, 80), (80, 100))]
    closes = ec.reconstruct_closes(10.0, [1.0, -0.5])
    assert closes == [10.0, 11.0, 10.5]


def check_scoring():
    score, reason = ec.parse_score_response('{"score": -3, "reason": "weak demand"}')
    assert (score, reason) == (-3, "weak demand")
    try:
        ec.parse_score_response('{"score": 15, "reason": "x"}')
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range score accepted")
    value, _ = ec.score_text("Shares rally on record profit")
    assert value > 0


def check_models(tmp):
    rng = random.Random(3)
    deltas = [0.0]
    for _ in range(399):
        deltas.append(0.8 * deltas[-1] + rng.gauss(0.0, 1.0))
    reg = ec.Regressor.fit("ARIMA", deltas, 300, hyperparameters={"p": 1, "d": 0, "q": 0})
    preds = reg.predict(deltas, list(range(300, 400)))
    path = tmp / "arima.json"
    reg.save(str(path))
    again = ec.Regressor.load(str(path))
    assert again.predict(deltas, list(range(300, 400))) == preds
    assert again.content_hash == reg.content_hash
    mse_arima = ec.mse(preds, deltas[300:])
    ma5 = ec.Regressor.fit("MA5", deltas, 300)
    mse_ma5 = ec.mse(ma5.predict(deltas, list(range(300, 400))), deltas[300:])
    assert mse_arima < mse_ma5, (mse_arima, mse_ma5)

    clf = ec.Classifier.fit("LOGREG", deltas, 300, hyperparameters={"C": 1.0})
    labels = clf.predict(deltas, list(range(300, 400)))
    assert set(labels) <= {0, 1} and len(labels) == 100
    try:
        ec.Regressor.fit("PROPHET", deltas, 300)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown family accepted")


def check_pipeline(tmp):
    demo = tmp / "demo"
    shutil.copytree(ROOT / "fixtures" / "demo", demo, ignore=shutil.ignore_patterns("data", "out*"))
    try:
        ec.Config.from_toml('symbols = ["XLF"]\nsector_map = "s.toml"\n[models]\nregressors = ["NOPE"]\n')
    except ec.ConfigError as e:
        assert "models.regressors[0]" in str(e)
    else:
        raise AssertionError("invalid config accepted")
    cfg = ec.Config.load(str(demo / "config-fast.toml"))
    pipe = ec.Pipeline(cfg)
    code, total, failed = pipe.run()
    assert code in (0, 3) and total == 144, (code, total, failed)
    assert "plot" in pipe.completed_stages
    text = ec.report(str(cfg.output_dir))
    assert "**" in text
    assert any((Path(cfg.output_dir) / "plots" / "XLF").glob("*.svg"))


def main():
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        for name, fn in [
            ("metrics", check_metrics),
            ("scoring", check_scoring),
            ("models", lambda: check_models(tmp)),
            ("pipeline", lambda: check_pipeline(tmp)),
        ]:
            fn()
            print(f"ok  {name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
