"""Acceptance suite: nine go/no-go criteria with pinned tolerances.

Each criterion prints one PASS/FAIL line (run with ``pytest -s`` to see
them live).  Runtime ceilings are asserted alongside the numerical
tolerances, so a pathologically slow implementation fails loudly.
"""

import functools
import json
import time

import numpy as np

from cbloss.cli import main as cli_main
from cbloss.covering import CoveringConfig, simulate_covering
from cbloss.effnum import class_balanced_weights, effective_number, effective_number_recursive
from cbloss.longtail import (
    SyntheticDataSpec,
    build_profile,
    generate_synthetic,
    imbalance_factor,
    mu_from_imbalance,
)
from cbloss.losses import ClassBalance, LossSpec, focal, loss_batch, sigmoid_ce
from cbloss.sweep import RESULTS_COLUMNS
from cbloss.trainer import TrainConfig, train


def criterion(number, description):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"criterion {number} FAIL - {description}")
                raise
            elapsed = time.perf_counter() - start
            extra = f" ({detail})" if detail else ""
            print(f"criterion {number} PASS - {description} [{elapsed:.1f}s]{extra}")

        return wrapper

    return decorate


@criterion(1, "closed form matches the recurrence to rel 1e-9")
def test_criterion_1_closed_form_vs_recurrence():
    start = time.perf_counter()
    ns = list(range(1, 101)) + [1_000, 10_000]
    worst = 0.0
    for beta in [0.0, 0.5, 0.9, 0.99, 0.999, 0.9999]:
        for n in ns:
            closed = effective_number(beta, n)
            recursive = effective_number_recursive(beta, n)
            worst = max(worst, abs(closed - recursive) / closed)
    assert worst <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    return f"max rel diff {worst:.2e}"


@criterion(2, "Monte Carlo covering agrees with theory within 4 SE")
def test_criterion_2_monte_carlo_oracle():
    start = time.perf_counter()
    details = []
    for beta in [0.0, 0.5, 0.9, 0.99]:
        n_proto = 1.0 / (1.0 - beta)
        for n in [1, 10, 100]:
            cfg = CoveringConfig(
                n_prototypes=n_proto, n_samples=n, n_trials=100_000, rng_seed=202
            )
            res = simulate_covering(cfg)
            target = effective_number(beta, n)
            gap = abs(res.mean_volume - target)
            assert gap <= 4 * res.std_error, (
                f"beta={beta}, n={n}: |{res.mean_volume} - {target}| > 4*{res.std_error}"
            )
            details.append(gap / res.std_error if res.std_error else 0.0)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    return f"worst gap {max(details):.2f} SE"


@criterion(3, "asymptotics: E_n = 1 at beta=0; E_n ~ n as beta -> 1")
def test_criterion_3_asymptotics():
    for n in [1, 2, 10, 100, 10_000]:
        assert effective_number(0.0, n) == 1.0
    beta = 1 - 1e-12
    worst = 1.0
    for n in range(1, 10_001):
        ratio = effective_number(beta, n) / n
        worst = min(worst, ratio)
        assert ratio >= 1 - 1e-6
    return f"min E_n/n = {worst:.9f}"


def _fd_grad(fn, z, h=1e-5):
    g = np.zeros_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (fn(zp) - fn(zm)) / (2 * h)
    return g


@criterion(4, "analytic gradients match central differences to 1e-5")
def test_criterion_4_gradient_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    cases = [("softmax_ce", 0.0), ("sigmoid_ce", 0.0)] + [
        ("focal", g) for g in (0.0, 0.5, 1.0, 2.0)
    ]
    worst = 0.0
    for family, gamma in cases:
        spec = LossSpec(family, gamma=gamma)
        for c in (2, 10):
            for _ in range(100):
                z = rng.uniform(-5.0, 5.0, size=c)
                y = np.array([int(rng.integers(c))])
                values, grads = loss_batch(spec, z[None, :], y)
                fd = _fd_grad(
                    lambda v: float(loss_batch(spec, v[None, :], y)[0][0]), z
                )
                scale = max(float(np.max(np.abs(fd))), 1e-8)
                rel = float(np.max(np.abs(grads[0] - fd))) / scale
                worst = max(worst, rel)
    assert worst <= 1e-5
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    return f"max rel err {worst:.2e}"


@criterion(5, "degeneracies: focal(0) == sigmoid; beta=0/equal-count CB are no-ops")
def test_criterion_5_degeneracies():
    rng = np.random.default_rng(505)
    for _ in range(200):
        c = int(rng.choice([2, 10]))
        z = rng.uniform(-20.0, 20.0, size=c)
        y = int(rng.integers(c))
        f = focal(z, y, 0.0)
        s = sigmoid_ce(z, y)
        assert abs(f.value - s.value) <= 1e-12 * max(abs(s.value), 1.0)
        assert np.all(np.abs(f.grad - s.grad) <= 1e-12)

    profile = build_profile(5, 80, 0.5)
    spec = SyntheticDataSpec(dim=6, rng_seed=55)
    data = generate_synthetic(profile, spec, "train")
    test = generate_synthetic(build_profile(5, 30, 1.0), spec, "test")
    plain = train(data, test, TrainConfig(epochs=4, seed=9))
    cb_zero = train(
        data,
        test,
        TrainConfig(epochs=4, seed=9, loss=LossSpec("softmax_ce", class_balance=ClassBalance(0.0))),
    )
    assert plain.outcome_dict() == cb_zero.outcome_dict()

    uniform = generate_synthetic(build_profile(5, 80, 1.0), spec, "train")
    plain_u = train(uniform, test, TrainConfig(epochs=4, seed=9))
    cb_equal = train(
        uniform,
        test,
        TrainConfig(
            epochs=4, seed=9, loss=LossSpec("softmax_ce", class_balance=ClassBalance(0.9999))
        ),
    )
    assert plain_u.outcome_dict() == cb_equal.outcome_dict()
    return "bit-identical records"


@criterion(6, "weights normalize to the class count across random counts")
def test_criterion_6_weight_normalization():
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(1000):
        c = int(rng.integers(1, 101))
        counts = rng.integers(1, 1_000_001, size=c)
        for beta in (0.9, 0.99, 0.999, 0.9999):
            alphas = class_balanced_weights(counts, beta).alphas
            worst = max(worst, abs(float(alphas.sum()) - c) / c)
    assert worst <= 1e-9
    return f"max rel normalization error {worst:.2e}"


@criterion(7, "realized imbalance within 5 percent of requested")
def test_criterion_7_profile_round_trip():
    worst = 0.0
    for factor in (10, 20, 50, 100, 200):
        for n_classes in (10, 100):
            for base in (1000, 2500):
                mu = mu_from_imbalance(n_classes, factor)
                realized = imbalance_factor(build_profile(n_classes, base, mu).counts)
                rel = abs(realized - factor) / factor
                worst = max(worst, rel)
                assert rel <= 0.05, (n_classes, factor, base, realized)
    return f"max deviation {worst:.3f}"


@criterion(8, "class-balanced softmax beats plain softmax on the tail")
def test_criterion_8_trend_reproduction():
    start = time.perf_counter()
    profile = build_profile(10, 1000, mu_from_imbalance(10, 100))
    plain_tail, cb_tail, plain_overall, cb_overall = [], [], [], []
    for seed in range(5):
        spec = SyntheticDataSpec(dim=20, rng_seed=1000 + seed)
        data = generate_synthetic(profile, spec, "train")
        test = generate_synthetic(build_profile(10, 200, 1.0), spec, "test")
        base = TrainConfig(epochs=40, warmup_epochs=1, seed=seed)
        plain = train(data, test, base)
        cb = train(
            data,
            test,
            TrainConfig(
                epochs=40,
                warmup_epochs=1,
                seed=seed,
                loss=LossSpec("softmax_ce", class_balance=ClassBalance(0.9999)),
            ),
        )
        assert plain.status == "ok" and cb.status == "ok"
        plain_tail.append(float(np.mean(plain.final_per_class_error()[-3:])))
        cb_tail.append(float(np.mean(cb.final_per_class_error()[-3:])))
        plain_overall.append(plain.final_test_error())
        cb_overall.append(cb.final_test_error())
    tail_margin = float(np.mean(plain_tail) - np.mean(cb_tail))
    overall_margin = float(np.mean(plain_overall) - np.mean(cb_overall))
    assert np.mean(cb_tail) < np.mean(plain_tail)
    assert np.mean(cb_overall) < np.mean(plain_overall)
    assert tail_margin >= 0.02
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    return f"tail gain {tail_margin:.3f}, overall gain {overall_margin:.3f}"


@criterion(9, "Appendix-shaped sweep is rectangular and rerun-identical")
def test_criterion_9_sweep_integrity(tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "sweep.json"
    cfg.write_text(
        json.dumps(
            {
                "families": ["softmax_ce", "sigmoid_ce", "focal"],
                "betas": ["none", 0.9, 0.99, 0.999, 0.9999],
                "gammas": [0.5, 1.0, 2.0],
                "imbalances": [10, 100],
                "seeds": [0],
                "epochs": 25,
                "warmup_epochs": 1,
            }
        )
    )

    def sweep_into(directory):
        code = cli_main(
            [
                "sweep",
                "--config", str(cfg),
                "--classes", "10",
                "--dim", "20",
                "--base-count", "1000",
                "--test-per-class", "200",
                "--out", str(directory),
            ]
        )
        assert code == 0
        return (directory / "results.csv").read_text()

    first = sweep_into(tmp_path / "a")
    second = sweep_into(tmp_path / "b")

    lines = first.splitlines()
    # 3 families x 5 betas, gammas only for focal: (5 + 5 + 15) x 2 imbalances.
    expected_rows = (5 + 5 + 5 * 3) * 2
    assert lines[0] == ",".join(RESULTS_COLUMNS)
    assert len(lines) == 1 + expected_rows
    assert {len(line.split(",")) for line in lines} == {len(RESULTS_COLUMNS)}

    def strip_wall(text):
        return "\n".join(",".join(l.split(",")[:-1]) for l in text.splitlines())

    assert strip_wall(first) == strip_wall(second)
    elapsed = time.perf_counter() - start
    assert elapsed < 1800.0
    return f"{expected_rows} rows, rerun identical"
