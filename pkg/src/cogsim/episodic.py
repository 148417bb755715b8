"""Episodic traces: time-locked context sequences with auto-associative
recall and class-based degradation.

Every experience is stored verbatim as its own trace.  Recall matches a cue
set against surviving percept contexts and replays the suffix in stored tick
order.  Degradation removes percepts by specificity class once a trace's age
exceeds the class lifetime, most specific first; salient traces are exempt.
An optional backfill flag patches degraded replay gaps from the semantic
store (reconstruction), off by default so replay stays veridical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .semantics import SemanticStore

SPECIFICITY_CLASSES = ("sensory", "object", "scene", "concept", "event")

DEFAULT_LIFETIMES = {
    "sensory": 50,
    "object": 200,
    "scene": 500,
    "concept": 2000,
    "event": 10000,
}


class EpisodicError(ValueError):
    pass


@dataclass
class EpisodicTrace:
    trace_id: str
    contexts: list[tuple[int, dict[str, str]]]  # (tick, percept -> class)
    stored_at: int
    salient: bool = False
    seq: int = 0


@dataclass(frozen=True)
class RecallResult:
    trace_id: str
    offset: int
    contexts: tuple[tuple[int, tuple[str, ...]], ...]


@dataclass(frozen=True)
class Removal:
    trace_id: str
    tick: int
    percept: str
    spec_class: str


class EpisodicStore:
    def __init__(
        self,
        lifetimes: Optional[dict[str, int]] = None,
        backfill: bool = False,
        semantic: Optional[SemanticStore] = None,
    ):
        self.lifetimes = dict(DEFAULT_LIFETIMES)
        if lifetimes:
            self.lifetimes.update(lifetimes)
        order = [self.lifetimes[c] for c in SPECIFICITY_CLASSES]
        if order != sorted(order) or len(set(order)) != len(order):
            raise EpisodicError("lifetimes must strictly increase with class")
        self.backfill = backfill
        self.semantic = semantic
        self.traces: dict[str, EpisodicTrace] = {}
        self._counter = 0

    # -- storage -------------------------------------------------------------

    def store(
        self,
        contexts: Sequence[tuple[int, dict[str, str]]],
        stored_at: int,
        salient: bool = False,
    ) -> str:
        if not contexts:
            raise EpisodicError("empty trace")
        ticks = [t for t, _ in contexts]
        if ticks != sorted(ticks) or len(set(ticks)) != len(ticks):
            raise EpisodicError("context ticks must strictly increase")
        for tick, percepts in contexts:
            if not percepts:
                raise EpisodicError(f"context at tick {tick} has no percepts")
            for pid, cls in percepts.items():
                if cls not in SPECIFICITY_CLASSES:
                    raise EpisodicError(f"unknown specificity class {cls!r} for {pid}")
        self._counter += 1
        trace_id = f"t{self._counter}"
        self.traces[trace_id] = EpisodicTrace(
            trace_id,
            [(t, dict(p)) for t, p in contexts],
            stored_at,
            salient,
            seq=self._counter,
        )
        return trace_id

    # -- recall ----------------------------------------------------------------

    def recall(self, cue: Iterable[str], min_match: int = 1) -> Optional[RecallResult]:
        """Best (trace, context) by cue overlap; ties prefer the most recent
        trace, then the earliest offset.  Replay yields the suffix from the
        matched context onward, degraded percepts absent."""
        if min_match < 1:
            raise EpisodicError("min_match must be >= 1")
        cue = set(cue)
        best = None  # (match, stored_at, seq, -offset) maximized
        for trace_id in sorted(self.traces):
            trace = self.traces[trace_id]
            for offset, (_, percepts) in enumerate(trace.contexts):
                match = len(cue & set(percepts))
                if match < min_match:
                    continue
                key = (match, trace.stored_at, trace.seq, -offset)
                if best is None or key > best[0]:
                    best = (key, trace_id, offset)
        if best is None:
            return None
        _, trace_id, offset = best
        return RecallResult(trace_id, offset, self._replay(trace_id, offset))

    def _replay(
        self, trace_id: str, offset: int
    ) -> tuple[tuple[int, tuple[str, ...]], ...]:
        trace = self.traces[trace_id]
        out = []
        for tick, percepts in trace.contexts[offset:]:
            survivors = sorted(percepts)
            if self.backfill and self.semantic is not None and survivors:
                completed = self.semantic.retrieve(
                    survivors, "controlled", hops=1
                )[-1]
                survivors = sorted(set(survivors) | completed)
            out.append((tick, tuple(survivors)))
        return tuple(out)

    # -- degradation -------------------------------------------------------------

    def degrade_traces(self, now: int) -> list[Removal]:
        """Remove percepts whose class lifetime is exceeded by the trace age;
        salient traces are immune.  Emptied contexts are dropped, order kept."""
        removals: list[Removal] = []
        for trace_id in sorted(self.traces):
            trace = self.traces[trace_id]
            if trace.salient:
                continue
            age = now - trace.stored_at
            kept_contexts = []
            for tick, percepts in trace.contexts:
                kept = {}
                for pid in sorted(percepts):
                    cls = percepts[pid]
                    if age > self.lifetimes[cls]:
                        removals.append(Removal(trace_id, tick, pid, cls))
                    else:
                        kept[pid] = cls
                if kept:
                    kept_contexts.append((tick, kept))
            trace.contexts = kept_contexts
        return removals

    # -- dump -------------------------------------------------------------------

    def dump(self) -> str:
        """One line per context: ``trace_id<TAB>tick<TAB>p(class),...``."""
        lines = []
        for trace_id in sorted(self.traces, key=lambda t: self.traces[t].seq):
            for tick, percepts in self.traces[trace_id].contexts:
                body = ",".join(f"{pid}({percepts[pid]})" for pid in sorted(percepts))
                lines.append(f"{trace_id}\t{tick}\t{body}")
        return "".join(line + "\n" for line in lines)
