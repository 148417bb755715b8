"""Time cells, sequence cells, and consolidated temporal sequences.

A time cell is a conjunction of a percept with an elapsed-time bin; its
tuning curve spans the bin +/- a tolerance, so at elapsed time e the cells
for bins e-tau .. e+tau all fire.  A sequence cell encodes an ordered tuple
(2..4 long) of percepts by onset order.  A temporal sequence is a subset
weight store over these temporal percepts (plus optional regular percepts)
pointing at a target percept, consolidated and matched with the same kernel
as everything else.

Regular percepts start onset clocks but are never driven *by* time cells;
predictions flow temporal -> regular only.  Generalization maps observed
percepts onto stored constituents through the semantic store (controlled
retrieval with supplementary context), restamps them with the observed
onsets, and re-matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .plasticity import FiringPattern, NeuronUnit, compute_excitation, cph_update
from .semantics import SemanticStore

DEFAULT_TAU = 1
DEFAULT_THETA_T = 1.0
MAX_TUPLE_LEN = 4


class TemporalError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class TemporalPercept:
    """Either a (percept, elapsed-bin) time cell or an ordered-tuple
    sequence cell; exactly one of the two field groups is set."""

    kind: str  # "time" | "seq"
    percept: str = ""
    elapsed: int = -1
    order: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind == "time":
            if self.elapsed < 0 or not self.percept:
                raise TemporalError("time cell needs a percept and elapsed >= 0")
        elif self.kind == "seq":
            if not (2 <= len(self.order) <= MAX_TUPLE_LEN):
                raise TemporalError(
                    f"sequence tuple length must be 2..{MAX_TUPLE_LEN}"
                )
            if len(set(self.order)) != len(self.order):
                raise TemporalError("sequence tuple entries must be distinct")
        else:
            raise TemporalError(f"bad temporal percept kind {self.kind!r}")

    def pattern_id(self) -> str:
        if self.kind == "time":
            return f"t:{self.percept}|{self.elapsed}"
        return "s:" + ">".join(self.order)


def time_cell(percept: str, elapsed: int) -> TemporalPercept:
    return TemporalPercept("time", percept=percept, elapsed=elapsed)


def seq_cell(order: Sequence[str]) -> TemporalPercept:
    return TemporalPercept("seq", order=tuple(order))


def _patterns(
    temporal: Iterable[TemporalPercept], regular: Iterable[str] = ()
) -> list[FiringPattern]:
    ids = sorted({tp.pattern_id() for tp in temporal} | set(regular))
    return [FiringPattern(i, 9) for i in ids]


class TemporalClock:
    """Onset bookkeeping for one episode; emits the currently active
    temporal percepts."""

    def __init__(self, tau: int = DEFAULT_TAU):
        self.tau = tau
        self.onsets: dict[str, int] = {}
        self._last_tick: Optional[int] = None

    def event_boundary(self) -> None:
        """A salient boundary resets all onset clocks (new episode)."""
        self.onsets.clear()
        self._last_tick = None

    def tick_ingest(self, now: int, newly_active: Iterable[str]) -> set[TemporalPercept]:
        if self._last_tick is not None and now <= self._last_tick:
            raise TemporalError(
                f"tick {now} is not after previous tick {self._last_tick}"
            )
        self._last_tick = now
        for pid in sorted(newly_active):
            self.onsets.setdefault(pid, now)
        return self.active(now)

    def active(self, now: int) -> set[TemporalPercept]:
        out: set[TemporalPercept] = set()
        for pid in sorted(self.onsets):
            elapsed = now - self.onsets[pid]
            if elapsed < 0:
                continue
            for b in range(max(0, elapsed - self.tau), elapsed + self.tau + 1):
                out.add(time_cell(pid, b))
        out.update(self.sequence_cells())
        return out

    def sequence_cells(self) -> set[TemporalPercept]:
        """All ordered tuples (2..4) of onset percepts, strictly by onset."""
        ordered = sorted(self.onsets.items(), key=lambda kv: (kv[1], kv[0]))
        out: set[TemporalPercept] = set()

        def extend(prefix: list[str], last_onset: int, rest: list[tuple[str, int]]):
            for i, (pid, onset) in enumerate(rest):
                if onset <= last_onset:
                    continue
                chain = prefix + [pid]
                if len(chain) >= 2:
                    out.add(seq_cell(chain))
                if len(chain) < MAX_TUPLE_LEN:
                    extend(chain, onset, rest[i + 1 :])

        for i, (pid, onset) in enumerate(ordered):
            extend([pid], onset, ordered[i + 1 :])
        return out


@dataclass
class TemporalSequence:
    """View of one consolidated target: its subset-weight store."""

    target: str
    unit: NeuronUnit

    def constituents(self) -> set[str]:
        out = set()
        for key in self.unit.store:
            for unit_id, _ in key:
                if unit_id.startswith("t:"):
                    out.add(unit_id[2:].rsplit("|", 1)[0])
                elif unit_id.startswith("s:"):
                    out.update(unit_id[2:].split(">"))
                else:
                    out.add(unit_id)
        return out


@dataclass(frozen=True)
class PropagationStep:
    kind: str  # "map" | "restamp" | "temporal-match"
    source: str = ""
    result: str = ""
    onset: int = -1


class TemporalStore:
    """Consolidated temporal sequences, keyed by target percept."""

    def __init__(self, theta_t: float = DEFAULT_THETA_T, tau: int = DEFAULT_TAU):
        self.theta_t = theta_t
        self.tau = tau
        self.sequences: dict[str, TemporalSequence] = {}

    def _unit(self, target: str) -> NeuronUnit:
        seq = self.sequences.get(target)
        if seq is None:
            seq = TemporalSequence(
                target, NeuronUnit(target, layer="temporal", threshold=self.theta_t)
            )
            self.sequences[target] = seq
        return seq.unit

    def constituents(self) -> set[str]:
        out = set()
        for target in sorted(self.sequences):
            out.update(self.sequences[target].constituents())
        return out

    # -- consolidation ------------------------------------------------------

    def consolidate_temporal_sequence(
        self,
        episode: Sequence[tuple[str, int]],
        target: str,
        repeats: int = 1,
        target_onset: Optional[int] = None,
        context: Iterable[str] = (),
    ) -> TemporalSequence:
        """Build the time-cell and sequence-cell percepts for one episode
        relative to the target onset and strengthen them toward the target."""
        if target_onset is None:
            target_onset = max((onset for _, onset in episode), default=0)
        usable = [(pid, onset) for pid, onset in episode if onset <= target_onset]
        if not usable:
            raise TemporalError(f"target {target!r} has no preceding onsets")
        elements: list[TemporalPercept] = [
            time_cell(pid, target_onset - onset) for pid, onset in usable
        ]
        clock = TemporalClock(self.tau)
        for pid, onset in sorted(usable, key=lambda kv: (kv[1], kv[0])):
            clock.onsets[pid] = onset
        elements.extend(clock.sequence_cells())
        window = _patterns(elements, context)
        unit = self._unit(target)
        for _ in range(repeats):
            cph_update(unit, window, fired=True)
        return self.sequences[target]

    # -- matching -----------------------------------------------------------

    def excitations(
        self,
        temporal: Iterable[TemporalPercept],
        regular: Iterable[str] = (),
    ) -> dict[str, float]:
        active = _patterns(temporal, regular)
        return {
            target: compute_excitation(self.sequences[target].unit, active)
            for target in sorted(self.sequences)
        }

    def match_temporal_sequences(
        self,
        temporal: Iterable[TemporalPercept],
        regular: Iterable[str] = (),
    ) -> list[str]:
        """Targets whose stored subset weights reach threshold under the
        active temporal + regular percepts."""
        exc = self.excitations(temporal, regular)
        return [t for t in sorted(exc) if exc[t] >= self.theta_t]

    # -- generalization -----------------------------------------------------

    def generalize_and_predict(
        self,
        observed: Sequence[tuple[str, int]],
        supplementary: Iterable[str] = (),
        semantic: Optional[SemanticStore] = None,
        now: Optional[int] = None,
        hops: Optional[int] = None,
    ) -> tuple[list[str], list[PropagationStep]]:
        """Map observed percepts onto stored-sequence constituents via
        controlled retrieval, restamp the matches with the observed onsets,
        then run sequence matching.  The trace records every hop."""
        trace: list[PropagationStep] = []
        if now is None:
            now = max((onset for _, onset in observed), default=0)
        known = self.constituents()
        supplementary = sorted(set(supplementary))
        mapped: dict[str, int] = {}

        def stamp(pid: str, onset: int, source: str):
            if pid != source:
                trace.append(PropagationStep("map", source=source, result=pid))
            if pid not in mapped or onset < mapped[pid]:
                mapped[pid] = onset
                trace.append(PropagationStep("restamp", result=pid, onset=onset))

        for pid, onset in sorted(observed, key=lambda kv: (kv[1], kv[0])):
            if pid in known:
                stamp(pid, onset, pid)
            if semantic is not None:
                hops_sets = semantic.retrieve(
                    [pid], "controlled", supplementary=supplementary, hops=hops
                )
                for q in sorted(hops_sets[-1]):
                    if q != pid and q not in supplementary and q in known:
                        stamp(q, onset, pid)

        clock = TemporalClock(self.tau)
        clock.onsets.update(mapped)
        regular = sorted(
            {pid for pid, _ in observed} | set(supplementary) | set(mapped)
        )
        fired = self.match_temporal_sequences(clock.active(now), regular)
        for target in fired:
            trace.append(PropagationStep("temporal-match", result=target))
        return fired, trace
