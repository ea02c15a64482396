"""Closed-loop experiment runner: plant, observer bank, reconstruction and isolation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bank import build_bank, bank_step, compute_pi, init_state, select
from .model import generate_signals, step_plant
from .recon import InsufficientHistory, isolate, reconstruct

CONVERGENCE_TOL = 1e-2
TAIL = 20


@dataclass
class TrajectoryRecord:
    k: int
    x: np.ndarray
    u: np.ndarray
    a_u: np.ndarray
    a_y: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    sigma: int
    pi_values: dict
    a_u_hat: object  # None at k = 0
    a_y_hat: np.ndarray
    W_u_hat: object  # None until the isolation window fills
    W_y_hat: object
    bank_xhat: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class RunMetrics:
    final_state_error: float
    convergence_step: object
    isolation_correct: bool
    isolation_step: object
    max_recon_error_tail: float
    observers: int
    excluded: int


def bank_for(model, settings, kind=None, **kwargs):
    kind = kind or settings.bank
    return build_bank(model, kind, q=settings.q, q1=settings.q1, q2=settings.q2, **kwargs)


def run(model, scenario, settings, bank_kind=None, bank=None):
    """Simulate ``settings.horizon`` steps; returns (records, metrics, bank)."""
    if bank is None:
        bank = bank_for(model, settings, bank_kind)
    horizon = settings.horizon
    inputs = settings.inputs(model.n_u)
    x = settings.initial_state(model.n)
    a_u, a_y = generate_signals(scenario, 0)
    y = model.C @ x + a_y
    state = init_state(bank, settings.initial_estimate(model.n))

    records, history = [], []
    xhat_prev = u_prev = None
    for k in range(horizon):
        sel = select(compute_pi(state), state.xhat)
        est = reconstruct(model, sel.xhat_selected, xhat_prev, u_prev, y, k)
        history.append(est)
        try:
            report = isolate(history, settings.epsilon, settings.window)
            W_u_hat, W_y_hat = report.W_u_hat, report.W_y_hat
        except InsufficientHistory:
            W_u_hat = W_y_hat = None
        u = inputs[k]
        records.append(
            TrajectoryRecord(
                k=k, x=x, u=u, a_u=a_u, a_y=a_y, y=y,
                x_hat=sel.xhat_selected, sigma=sel.sigma, pi_values=sel.pi,
                a_u_hat=est.a_u_hat, a_y_hat=est.a_y_hat,
                W_u_hat=W_u_hat, W_y_hat=W_y_hat,
                bank_xhat=state.xhat,
            )
        )
        if k == horizon - 1:
            break
        a_u_next, a_y_next = generate_signals(scenario, k + 1)
        x_next, y_next = step_plant(model, x, u, a_u, a_y_next)
        state = bank_step(state, model, u, y, y_next)
        xhat_prev, u_prev = sel.xhat_selected, u
        x, y, a_u, a_y = x_next, y_next, a_u_next, a_y_next

    return records, compute_metrics(records, scenario, bank), bank


def compute_metrics(records, scenario, bank=None):
    errors = np.array([np.abs(r.x_hat - r.x).max() for r in records])
    convergence_step = _sustained(errors < CONVERGENCE_TOL)
    correct = [
        r.W_u_hat == scenario.W_u and r.W_y_hat == scenario.W_y
        for r in records
    ]
    tail = []
    for prev, r in zip(records[-TAIL - 1 : -1], records[-TAIL:]):
        err = np.abs(r.a_y_hat - r.a_y).max()
        if r.a_u_hat is not None:
            err = max(err, np.abs(r.a_u_hat - prev.a_u).max(initial=0.0))
        tail.append(err)
    return RunMetrics(
        final_state_error=float(np.linalg.norm(records[-1].x_hat - records[-1].x)),
        convergence_step=convergence_step,
        isolation_correct=bool(correct[-1]),
        isolation_step=_sustained(np.array(correct)),
        max_recon_error_tail=float(max(tail)) if tail else float("nan"),
        observers=len(bank.specs) if bank else 0,
        excluded=len(bank.excluded) if bank else 0,
    )


def _sustained(flags):
    """First index from which every flag is true, else None."""
    if len(flags) == 0 or not flags[-1]:
        return None
    bad = np.flatnonzero(~np.asarray(flags, dtype=bool))
    return int(bad[-1] + 1) if bad.size else 0


def _fmt(v):
    return "" if v is None else format(float(v), ".17g")


def _cells(vec, size):
    return [_fmt(v) for v in vec] if vec is not None else [""] * size


def export_csv(records, out_dir):
    """Write states.csv, attacks.csv and selection.csv (one row per step, 17 significant digits)."""
    if not records:
        raise ValueError("no records to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    first = records[0]
    n, n_u, n_y = first.x.size, first.a_u.size, first.a_y.size
    ids = sorted(first.pi_values)

    def write(name, header, rows):
        path = out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return path

    paths = [
        write(
            "states.csv",
            ["k"] + [f"x_{i + 1}" for i in range(n)] + [f"xhat_{i + 1}" for i in range(n)],
            ([r.k] + _cells(r.x, n) + _cells(r.x_hat, n) for r in records),
        ),
        write(
            "attacks.csv",
            ["k"]
            + [f"a_u_{i + 1}" for i in range(n_u)]
            + [f"a_y_{i + 1}" for i in range(n_y)]
            + [f"ahat_u_{i + 1}" for i in range(n_u)]
            + [f"ahat_y_{i + 1}" for i in range(n_y)],
            (
                [r.k] + _cells(r.a_u, n_u) + _cells(r.a_y, n_y) + _cells(r.a_u_hat, n_u) + _cells(r.a_y_hat, n_y)
                for r in records
            ),
        ),
        write(
            "selection.csv",
            ["k", "sigma"] + [f"pi_{i}" for i in ids],
            ([r.k, r.sigma] + [_fmt(r.pi_values[i]) for i in ids] for r in records),
        ),
    ]
    return paths


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise ValueError(f"{path.name}: too short to plot")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path.name}: line {i} has {len(row)} fields, expected {len(header)}")
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return cols


def render_plots(csv_dir, out_dir=None):
    """states.svg, attack_y.svg and attack_u.svg from the exported CSVs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_dir = Path(csv_dir)
    out = Path(out_dir) if out_dir else csv_dir
    out.mkdir(parents=True, exist_ok=True)
    states = _read_csv(csv_dir / "states.csv")
    attacks = _read_csv(csv_dir / "attacks.csv")

    def chart(name, k, series, ylabel):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for label, values, style in series:
            (line,) = ax.plot(k, values, style, label=label, lw=1.2)
            line.set_gid(f"series-{label}")
        ax.set_xlabel("k")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize="small", ncol=2)
        fig.tight_layout()
        path = out / name
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return path

    k = states["k"]
    n = sum(1 for c in states if c.startswith("x_"))
    state_series = []
    for i in range(1, n + 1):
        state_series.append((f"x_{i}", states[f"x_{i}"], "k-"))
        state_series.append((f"xhat_{i}", states[f"xhat_{i}"], "--"))

    def attack_series(prefix):
        series = []
        for col in attacks:
            if col.startswith(f"a_{prefix}_"):
                idx = col.rsplit("_", 1)[1]
                if np.any(attacks[col] != 0):
                    series.append((col, attacks[col], "k-"))
                series.append((f"ahat_{prefix}_{idx}", attacks[f"ahat_{prefix}_{idx}"], "--"))
        return series

    return [
        chart("states.svg", k, state_series, "state"),
        chart("attack_y.svg", attacks["k"], attack_series("y"), "sensor attack"),
        chart("attack_u.svg", attacks["k"], attack_series("u"), "actuator attack"),
    ]
