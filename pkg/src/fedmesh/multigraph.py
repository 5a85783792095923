"""Multigraph construction from an overlay and its parsing into per-round graph states."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .net_model import edge_key
from .overlay import OverlayGraph

STRONG = True
WEAK = False

MAX_STATES = 10**6


class MultigraphError(ValueError):
    pass


@dataclass(frozen=True)
class Multigraph:
    n: int
    multiplicity: dict[tuple[int, int], int]
    t_max: int

    def __post_init__(self):
        if not self.multiplicity:
            raise MultigraphError("multigraph has no edges")
        for e, m in self.multiplicity.items():
            if not (isinstance(m, int) and 1 <= m <= self.t_max):
                raise MultigraphError(f"multiplicity of {e} must be in [1, {self.t_max}], got {m}")

    def edge_multiset(self) -> list[tuple[tuple[int, int], bool]]:
        """Every parallel edge as ``(pair, label)``: one strong copy, then ``n - 1`` weak ones."""
        out = []
        for e, m in sorted(self.multiplicity.items()):
            out.append((e, STRONG))
            out.extend((e, WEAK) for _ in range(m - 1))
        return out


def construct_multigraph(overlay: OverlayGraph, delays: dict, t: int) -> Multigraph:
    """Give every overlay edge ``min(t, round(d / d_min))`` parallel copies (at least one).

    ``round`` is Python's round-half-to-even.
    """
    if not isinstance(t, int) or t < 1:
        raise MultigraphError(f"t must be an integer >= 1, got {t!r}")
    if not overlay.edges:
        raise MultigraphError("overlay has no edges")
    edge_delay = {}
    for a, b in overlay.sorted_edges():
        d = delays.get((a, b), delays.get((b, a)))
        if d is None:
            raise MultigraphError(f"no delay given for overlay edge {(a, b)}")
        if not d > 0:
            raise MultigraphError(f"delay of edge {(a, b)} must be > 0, got {d}")
        edge_delay[(a, b)] = float(d)
    d_min = min(edge_delay.values())
    mult = {e: max(1, min(t, round(d / d_min))) for e, d in edge_delay.items()}
    return Multigraph(overlay.n, mult, t)


@dataclass(frozen=True)
class GraphState:
    """One simple graph of the schedule: each overlay edge labelled strong (True) or weak."""

    n: int
    labels: dict[tuple[int, int], bool]

    @cached_property
    def isolated(self) -> frozenset:
        return isolated_nodes(self)

    def strong_edges(self) -> list[tuple[int, int]]:
        return sorted(e for e, s in self.labels.items() if s)

    def strong_neighbors(self, v: int) -> list[int]:
        return sorted(b if a == v else a for (a, b), s in self.labels.items()
                      if s and v in (a, b))

    def label_string(self) -> str:
        return "".join("S" if self.labels[e] else "W" for e in sorted(self.labels))

    def __getitem__(self, edge) -> bool:
        return self.labels[edge_key(*edge)]


def isolated_nodes(state: GraphState) -> frozenset:
    """Nodes whose every incident edge is weak."""
    touched: set[int] = set()
    strong: set[int] = set()
    for (a, b), s in state.labels.items():
        touched |= {a, b}
        if s:
            strong |= {a, b}
    return frozenset(touched - strong)


def all_strong_state(overlay: OverlayGraph) -> GraphState:
    return GraphState(overlay.n, {e: STRONG for e in overlay.sorted_edges()})


def all_weak_state(overlay: OverlayGraph) -> GraphState:
    return GraphState(overlay.n, {e: WEAK for e in overlay.sorted_edges()})


@dataclass(frozen=True)
class StateSchedule:
    states: tuple[GraphState, ...]

    @property
    def s_max(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, k: int) -> GraphState:
        return self.states[k % len(self.states)]

    def to_dict(self) -> dict:
        edges = sorted(self.states[0].labels)
        return {
            "s_max": self.s_max,
            "edges": [list(e) for e in edges],
            "states": [
                {"index": k, "labels": st.label_string(), "isolated": sorted(st.isolated)}
                for k, st in enumerate(self.states)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict, n: int) -> "StateSchedule":
        edges = [tuple(e) for e in doc["edges"]]
        states = tuple(
            GraphState(n, {e: c == "S" for e, c in zip(edges, s["labels"])})
            for s in doc["states"]
        )
        return cls(states)


def parse_states(mg: Multigraph) -> StateSchedule:
    """Unroll the multigraph into ``LCM(multiplicities)`` states with per-edge countdown counters.

    An edge is strong when its counter is full; the counter then decrements
    and refills after reaching one.
    """
    s_max = 1
    for m in mg.multiplicity.values():
        s_max = math.lcm(s_max, m)
        if s_max > MAX_STATES:
            raise MultigraphError(
                f"schedule would have more than {MAX_STATES} states; use a smaller t"
            )
    edges = sorted(mg.multiplicity)
    counter = dict(mg.multiplicity)
    states = []
    for _ in range(s_max):
        labels = {}
        for e in edges:
            labels[e] = counter[e] == mg.multiplicity[e]
            counter[e] = mg.multiplicity[e] if counter[e] == 1 else counter[e] - 1
        states.append(GraphState(mg.n, labels))
    return StateSchedule(tuple(states))


def static_schedule(overlay: OverlayGraph) -> StateSchedule:
    """Single all-strong state: a plain overlay used identically every round."""
    return StateSchedule((all_strong_state(overlay),))
