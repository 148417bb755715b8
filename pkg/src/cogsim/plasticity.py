"""Combinatorial subset plasticity kernel.

A neuron stores weighted *complementary inputs*: nonempty subsets of
presynaptic firing patterns, where a firing pattern is a (unit, rate-level)
pair with rates quantized to integer levels 0..9 (0 = silent).  Excitation is
the sum of weights of every stored subset whose patterns are all present in
the current activity (all-or-nothing matching, with a +/- rate tolerance).
Firing potentiates every subset of the observed window; silence depresses
stored subsets that matched the window.  Homeostatic rescaling drifts the
weight sum toward a per-neuron target without disturbing weight ratios.

Everything downstream (lateral invariance, percept edges, temporal sequences,
context->action maps) is this one rule applied at different granularities, so
the kernel is kept dependency-free and strictly deterministic: stores are
plain dicts with canonical sorted-tuple keys, and no operation ever iterates
an unordered set when mutating state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Iterable, Optional

RATE_MIN = 0
RATE_MAX = 9

# Full power-set enumeration above this many inputs is refused unless the
# caller restricts subset order.
DEFAULT_HARD_LIMIT = 16

# Auto policy: enumerate everything up to this size, pairs + full set beyond.
FULL_ENUMERATION_LIMIT = 8

DEFAULT_ETA_PLUS = 1.0
DEFAULT_ETA_MINUS = 0.25
DEFAULT_W_MAX = 100.0
DEFAULT_RATE_TOLERANCE = 1


class PlasticityError(ValueError):
    """Domain error raised by kernel operations."""


@dataclass(frozen=True, order=True)
class FiringPattern:
    """One presynaptic unit firing at a quantized rate level."""

    unit_id: str
    rate_level: int

    def __post_init__(self):
        if not (RATE_MIN <= self.rate_level <= RATE_MAX):
            raise PlasticityError(
                f"rate_level {self.rate_level} outside {RATE_MIN}..{RATE_MAX}"
            )


# A canonical key is a tuple of (unit_id, rate_level) pairs sorted by unit_id.
PatternKey = tuple[tuple[str, int], ...]


def canonical_key(patterns: Iterable[FiringPattern]) -> PatternKey:
    """Sorted, hashable key for a set of patterns; rejects duplicate units."""
    pairs = sorted((p.unit_id, p.rate_level) for p in patterns)
    units = [u for u, _ in pairs]
    if len(set(units)) != len(units):
        raise PlasticityError(f"duplicate unit_ids in pattern set: {units}")
    return tuple(pairs)


def patterns_from_key(key: PatternKey) -> frozenset[FiringPattern]:
    return frozenset(FiringPattern(u, r) for u, r in key)


def format_key(key: PatternKey) -> str:
    """Wire format for one subset: ``unit:rate,unit:rate`` in canonical order."""
    return ",".join(f"{u}:{r}" for u, r in key)


def parse_key(text: str) -> PatternKey:
    parts = []
    for token in text.split(","):
        unit, _, rate = token.rpartition(":")
        parts.append((unit, int(rate)))
    return canonical_key(FiringPattern(u, r) for u, r in parts)


@dataclass
class ComplementaryInput:
    """A stored subset of firing patterns carrying a learned weight."""

    key: PatternKey
    weight: float

    @property
    def patterns(self) -> frozenset[FiringPattern]:
        return patterns_from_key(self.key)


def enumerate_complementary_inputs(
    window: Iterable[FiringPattern],
    order_cap: Optional[int] = None,
    hard_limit: int = DEFAULT_HARD_LIMIT,
) -> list[PatternKey]:
    """All nonempty subsets of ``window``, in canonical sorted order.

    With ``order_cap=k`` only subsets of size <= k plus the full window are
    produced.  A window larger than ``hard_limit`` without an order cap is a
    combinatorial blowup and is refused.
    """
    key = canonical_key(window)
    n = len(key)
    if n == 0:
        raise PlasticityError("cannot enumerate an empty window")
    if order_cap is None and n > hard_limit:
        raise PlasticityError(
            f"window of {n} inputs exceeds hard limit {hard_limit}; "
            "pass an order cap to enumerate pairs + full set"
        )
    if order_cap is None or order_cap >= n:
        subsets = chain.from_iterable(
            combinations(key, r) for r in range(1, n + 1)
        )
        return sorted(subsets)
    subsets = set(
        chain.from_iterable(combinations(key, r) for r in range(1, order_cap + 1))
    )
    subsets.add(key)
    return sorted(subsets)


def auto_order_cap(window_size: int) -> Optional[int]:
    """Default enumeration policy: full power set for small windows, pairs
    plus the full set once enumeration would exceed 2^8 subsets."""
    return None if window_size <= FULL_ENUMERATION_LIMIT else 2


@dataclass
class NeuronUnit:
    """A postsynaptic unit with a store of weighted complementary inputs."""

    unit_id: str
    layer: str = ""
    threshold: float = 1.0
    target_weight: Optional[float] = None  # homeostatic target for the weight sum
    rate_tolerance: int = DEFAULT_RATE_TOLERANCE
    eta_plus: float = DEFAULT_ETA_PLUS
    eta_minus: float = DEFAULT_ETA_MINUS
    w_max: float = DEFAULT_W_MAX
    order_cap: Optional[int] = None  # None = auto policy
    store: dict[PatternKey, ComplementaryInput] = field(default_factory=dict)

    def __post_init__(self):
        if self.threshold <= 0:
            raise PlasticityError("threshold must be positive")

    # -- queries ---------------------------------------------------------

    def weight_sum(self) -> float:
        return sum(ci.weight for ci in self.store.values())

    def seed_input(self, patterns: Iterable[FiringPattern], weight: float) -> None:
        """Install one stored input directly (pre-tuned units, tests)."""
        key = canonical_key(patterns)
        self.store[key] = ComplementaryInput(key, min(weight, self.w_max))

    def _matches(self, key: PatternKey, active_rates: dict[str, int]) -> bool:
        for unit, rate in key:
            got = active_rates.get(unit)
            if got is None or abs(got - rate) > self.rate_tolerance:
                return False
        return True


def _active_rate_map(active: Iterable[FiringPattern]) -> dict[str, int]:
    rates: dict[str, int] = {}
    for p in active:
        if p.rate_level == 0:  # silent units are not active
            continue
        if p.unit_id in rates:
            raise PlasticityError(f"duplicate active unit {p.unit_id}")
        rates[p.unit_id] = p.rate_level
    return rates


def compute_excitation(neuron: NeuronUnit, active: Iterable[FiringPattern]) -> float:
    """Summed weight of stored inputs fully matched by the active patterns.

    A stored input contributes its whole weight when every one of its
    patterns matches an active pattern on unit_id within the neuron's rate
    tolerance; otherwise it contributes nothing.
    """
    rates = _active_rate_map(active)
    if not rates:
        return 0.0
    total = 0.0
    for key, ci in neuron.store.items():
        if neuron._matches(key, rates):
            total += ci.weight
    return total


def step_neuron(
    neuron: NeuronUnit, active: Iterable[FiringPattern]
) -> tuple[bool, float]:
    """Threshold crossing; the comparison is inclusive (excitation == theta fires)."""
    excitation = compute_excitation(neuron, active)
    return excitation >= neuron.threshold, excitation


@dataclass(frozen=True)
class WeightDelta:
    key: PatternKey
    old: float
    new: float


def cph_update(
    neuron: NeuronUnit,
    window: Iterable[FiringPattern],
    fired: bool,
    hard_limit: int = DEFAULT_HARD_LIMIT,
) -> list[WeightDelta]:
    """One plasticity step for the activity window preceding this tick.

    fired: every enumerated subset of the window is potentiated by eta_plus
    (entries created on first sight).  not fired: every *stored* input that
    fully matched the window is depressed by eta_minus, floored at zero;
    zero-weight entries are pruned.
    """
    window = list(window)
    window = [p for p in window if p.rate_level > 0]
    deltas: list[WeightDelta] = []
    if fired:
        if not window:
            return deltas
        cap = neuron.order_cap
        if cap is None:
            cap = auto_order_cap(len(window))
        for key in enumerate_complementary_inputs(window, cap, hard_limit):
            ci = neuron.store.get(key)
            old = ci.weight if ci else 0.0
            new = min(old + neuron.eta_plus, neuron.w_max)
            if ci:
                ci.weight = new
            else:
                neuron.store[key] = ComplementaryInput(key, new)
            deltas.append(WeightDelta(key, old, new))
        return deltas

    rates = _active_rate_map(window)
    if not rates:
        return deltas
    for key in sorted(neuron.store):
        if not neuron._matches(key, rates):
            continue
        ci = neuron.store[key]
        old = ci.weight
        new = max(old - neuron.eta_minus, 0.0)
        deltas.append(WeightDelta(key, old, new))
        if new == 0.0:
            del neuron.store[key]
        else:
            ci.weight = new
    return deltas


def homeostatic_rescale(neuron: NeuronUnit) -> float:
    """Multiply all weights by target/sum; preserves ratios and the argmax.

    Returns the factor applied (1.0 when there is no target, no entries, or
    a zero weight sum).
    """
    if neuron.target_weight is None:
        return 1.0
    total = neuron.weight_sum()
    if total <= 0.0:
        return 1.0
    factor = neuron.target_weight / total
    for ci in neuron.store.values():
        ci.weight *= factor
    return factor


def serialize_store(neuron: NeuronUnit) -> str:
    """Flat dump: ``unit:rate,...<TAB>weight`` per entry, canonically sorted,
    newline-terminated (empty store serializes to an empty string)."""
    lines = [
        f"{format_key(key)}\t{neuron.store[key].weight!r}"
        for key in sorted(neuron.store)
    ]
    return "".join(line + "\n" for line in lines)


def deserialize_store(neuron: NeuronUnit, text: str) -> None:
    neuron.store.clear()
    for line in text.splitlines():
        if not line.strip():
            continue
        key_text, _, weight = line.partition("\t")
        key = parse_key(key_text)
        neuron.store[key] = ComplementaryInput(key, float(weight))
