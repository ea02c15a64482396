"""Combinatorial families of sensor subsets and actuator/sensor pairs for observer banks.

Ordering: J-class members first, then S-class; within a class, lexicographic on
sorted 0-based indices (pairs by J_u, then J_s). Observer ids are dense integers
assigned in that order.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations


class SubsetError(ValueError):
    pass


def label(indices):
    """1-based display form, e.g. ``{1,3,4}``."""
    return "{" + ",".join(str(i + 1) for i in indices) + "}"


@dataclass(frozen=True)
class SensorSubset:
    id: int
    J_s: tuple
    cls: str  # "J" (card n_y - q) or "S" (card n_y - 2q)

    @property
    def J_u(self):
        return ()

    @property
    def name(self):
        return label(self.J_s)


@dataclass(frozen=True)
class ObserverPair:
    id: int
    J_u: tuple
    J_s: tuple
    cls: str  # "J" (q1, n_y - q2) or "S" (2 q1, n_y - 2 q2)

    @property
    def name(self):
        return f"({label(self.J_u)},{label(self.J_s)})"


@dataclass(frozen=True)
class Family:
    kind: str  # "complete" | "partial"
    n_u: int
    n_y: int
    q1: int  # 0 for complete banks
    q2: int
    members: tuple

    def __getitem__(self, obs_id):
        return self.members[obs_id]

    def __len__(self):
        return len(self.members)

    @property
    def j_class(self):
        return [m for m in self.members if m.cls == "J"]

    @property
    def s_class(self):
        return [m for m in self.members if m.cls == "S"]


def enumerate_complete(n_y, q):
    if not (isinstance(q, int) and q > 0 and n_y - 2 * q > 0):
        raise SubsetError(f"need 0 < q < n_y/2, got q={q}, n_y={n_y}")
    sets = [(s, "J") for s in combinations(range(n_y), n_y - q)]
    sets += [(s, "S") for s in combinations(range(n_y), n_y - 2 * q)]
    return [SensorSubset(i, s, cls) for i, (s, cls) in enumerate(sets)]


def enumerate_partial(n_u, q1, n_y, q2):
    if not (isinstance(q1, int) and q1 > 0 and n_u - 2 * q1 > 0):
        raise SubsetError(f"need 0 < q1 < n_u/2, got q1={q1}, n_u={n_u}")
    if not (isinstance(q2, int) and q2 > 0 and n_y - 2 * q2 > 0):
        raise SubsetError(f"need 0 < q2 < n_y/2, got q2={q2}, n_y={n_y}")
    pairs = []
    for card_u, card_s, cls in ((q1, n_y - q2, "J"), (2 * q1, n_y - 2 * q2, "S")):
        for J_u in combinations(range(n_u), card_u):
            for J_s in combinations(range(n_y), card_s):
                pairs.append((J_u, J_s, cls))
    return [ObserverPair(i, J_u, J_s, cls) for i, (J_u, J_s, cls) in enumerate(pairs)]


def complete_family(n_y, q, n_u=0):
    return Family("complete", n_u, n_y, 0, q, tuple(enumerate_complete(n_y, q)))


def partial_family(n_u, q1, n_y, q2):
    return Family("partial", n_u, n_y, q1, q2, tuple(enumerate_partial(n_u, q1, n_y, q2)))


def refinement_partners(obs_id, family):
    """S-class ids refining J-class observer ``obs_id``: S_s ⊂ J_s (and S_u ⊃ J_u)."""
    member = family[obs_id]
    if member.cls != "J":
        raise SubsetError(f"observer {obs_id} is S-class and has no refinement partners")
    J_u, J_s = set(member.J_u), set(member.J_s)
    return [
        s.id
        for s in family.s_class
        if set(s.J_s) <= J_s and set(s.J_u) >= J_u
    ]


def is_clean(member, W_u, W_y):
    """Whether the observer's hypotheses hold under attack sets W_u, W_y (0-based).

    Complete observers decouple every actuator, so only sensors matter.
    """
    if W_y & set(member.J_s):
        return False
    if isinstance(member, SensorSubset):
        return True
    return set(W_u) <= set(member.J_u)
