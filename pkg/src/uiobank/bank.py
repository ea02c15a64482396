"""Observer banks: construction, per-step update, deviation (pi) and selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .subsets import complete_family, is_clean, partial_family, refinement_partners
from .synthesis import GainSynthesisFailed, RankDeficient, build_complete_uio, build_partial_uio

log = logging.getLogger(__name__)

# Contraction below this per-step factor is not reported: over a 50-step check,
# smaller factors push lam^k under float rounding of the error itself.
DEFAULT_LAMBDA_FLOOR = 0.75


class BankConstructionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Bank:
    family: object
    specs: dict  # id -> ObserverSpec, retained observers only
    excluded: dict  # id -> reason
    partners: dict  # retained J-class id -> retained S-class ids
    gaps: tuple = ()  # (W_u, W_y, J id) with no clean retained partner

    @property
    def kind(self):
        return self.family.kind

    @property
    def j_ids(self):
        return sorted(self.partners)

    def clean_ids(self, W_u, W_y):
        return [i for i in sorted(self.specs) if is_clean(self.family[i], W_u, W_y)]


def _attack_patterns(family):
    """Worst-case attack sets admitted by the bank's redundancy assumptions."""
    u_sets = [frozenset(s) for s in combinations(range(family.n_u), family.q1)] or [frozenset()]
    y_sets = [frozenset(s) for s in combinations(range(family.n_y), family.q2)]
    return [(W_u, W_y) for W_u in u_sets for W_y in y_sets]


def build_bank(model, kind="complete", q=1, q1=1, q2=1, lambda_floor=DEFAULT_LAMBDA_FLOOR, **synth_kwargs):
    if kind == "complete":
        family = complete_family(model.n_y, q, model.n_u)
        build = build_complete_uio
    elif kind == "partial":
        family = partial_family(model.n_u, q1, model.n_y, q2)
        build = build_partial_uio
    else:
        raise ValueError(f"unknown bank kind {kind!r}")

    specs, excluded = {}, {}
    for member in family.members:
        try:
            specs[member.id] = build(model, member, lambda_floor=lambda_floor, **synth_kwargs)
        except (RankDeficient, GainSynthesisFailed) as exc:
            excluded[member.id] = f"{type(exc).__name__}: {exc}"
    if excluded:
        log.warning(
            "excluded observers: %s",
            ", ".join(f"{i} {family[i].name} ({r})" for i, r in excluded.items()),
        )

    partners = {}
    for member in family.j_class:
        if member.id in excluded:
            continue
        kept = [p for p in refinement_partners(member.id, family) if p not in excluded]
        if not kept:
            raise BankConstructionError(f"observer {member.id} {member.name} lost all refinement partners")
        partners[member.id] = kept
    if not partners:
        raise BankConstructionError("no J-class observer survived synthesis")

    gaps = []
    for W_u, W_y in _attack_patterns(family):
        clean_j = [j for j in partners if is_clean(family[j], W_u, W_y)]
        if not clean_j:
            raise BankConstructionError(
                f"no clean J-class observer for W_u={sorted(W_u)}, W_y={sorted(W_y)}"
            )
        for j in partners:
            if not any(is_clean(family[p], W_u | set(family[j].J_u), W_y) for p in partners[j]):
                gaps.append((W_u, W_y, j))
    if gaps:
        log.warning("%d (attack pattern, observer) combinations lack a clean partner", len(gaps))
    return Bank(family, specs, excluded, partners, tuple(gaps))


@dataclass(frozen=True, eq=False)
class BankState:
    bank: Bank
    xhat: dict  # id -> estimate
    k: int = 0


def init_state(bank, xhat0):
    xhat0 = np.asarray(xhat0, dtype=float)
    return BankState(bank, {i: xhat0.copy() for i in bank.specs}, 0)


def observer_update(spec, model, xhat, u, y_k, y_next):
    rows = list(spec.J_s)
    return (
        spec.A_bar @ xhat
        + spec.B_bar @ u
        + spec.G_bar @ model.f(xhat)
        + spec.K @ (y_k[rows] - spec.C_sub @ xhat)
        + spec.b_bar @ y_next[rows]
    )


def bank_step(state, model, u, y_k, y_next):
    """Advance every observer from x(k) to x(k+1) given y(k) and y(k+1)."""
    specs = state.bank.specs
    xhat = {i: observer_update(specs[i], model, state.xhat[i], u, y_k, y_next) for i in specs}
    return BankState(state.bank, xhat, state.k + 1)


def compute_pi(state):
    """Largest distance between each J-class estimate and its refinement partners."""
    pi = {}
    for j, parts in state.bank.partners.items():
        xj = state.xhat[j]
        pi[j] = max(float(np.linalg.norm(xj - state.xhat[s])) for s in parts)
    return pi


@dataclass(frozen=True)
class SelectionResult:
    sigma: int
    xhat_selected: object
    pi: dict


def select(pi, xhat=None):
    """argmin of pi, ties to the smallest id."""
    if not pi:
        raise ValueError("empty deviation map")
    sigma = min(pi, key=lambda i: (pi[i], i))
    return SelectionResult(sigma, None if xhat is None else xhat[sigma], dict(pi))
