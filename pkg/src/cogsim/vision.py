"""Layered feature hierarchy with lateral plasticity.

Stimuli are symbolic feature grids (no pixels): each cell holds a feature
label firing at a quantized rate.  Units see the cells inside a rectangular
receptive field and fire through the subset-plasticity kernel.  Two lateral
rules act within a layer: sequential co-firing strengthens excitatory links
until they support bidirectional firing (positional invariance), and
anti-Hebbian updates on declared inhibitory links decorrelate assemblies
tuned to different objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random
from typing import Iterable, Optional

import networkx as nx

from .plasticity import (
    FiringPattern,
    NeuronUnit,
    PlasticityError,
    compute_excitation,
    cph_update,
    homeostatic_rescale,
    step_neuron,
)

DEFAULT_ETA_LAT = 1.0
DEFAULT_ETA_INH = 1.0
DEFAULT_THETA_BIDIR = 5.0 * DEFAULT_ETA_LAT

LAYER_NAMES = ("V1", "V2", "V4", "IT")


class VisionError(ValueError):
    pass


@dataclass
class FeatureStimulus:
    """Sparse grid of (feature label, rate) activations."""

    width: int
    height: int
    cells: dict[tuple[int, int], tuple[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise VisionError("stimulus dimensions must be positive")
        for (x, y), (_, rate) in self.cells.items():
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise VisionError(f"cell ({x},{y}) outside {self.width}x{self.height}")
            if not (0 <= rate <= 9):
                raise VisionError(f"rate {rate} outside 0..9")

    def set(self, x: int, y: int, feature: str, rate: int) -> None:
        self.cells[(x, y)] = (feature, rate)

    def patterns_in(self, rect: tuple[int, int, int, int]) -> list[FiringPattern]:
        x0, y0, x1, y1 = rect
        out = []
        for (x, y) in sorted(self.cells):
            if x0 <= x <= x1 and y0 <= y <= y1:
                feature, rate = self.cells[(x, y)]
                if rate > 0:
                    out.append(FiringPattern(f"{feature}@{x},{y}", rate))
        return out


@dataclass
class VisualUnit:
    """A kernel neuron plus a receptive field and lateral connections."""

    neuron: NeuronUnit
    receptive_field: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    tuned_feature: Optional[str] = None
    excitatory_lateral: dict[str, float] = field(default_factory=dict)
    inhibitory_lateral: dict[str, float] = field(default_factory=dict)

    @property
    def unit_id(self) -> str:
        return self.neuron.unit_id

    def observe(self, stim: FeatureStimulus) -> list[FiringPattern]:
        """The unit's presynaptic window for this stimulus."""
        return stim.patterns_in(self.receptive_field)


def make_unit(
    unit_id: str,
    receptive_field: tuple[int, int, int, int],
    threshold: float = 1.0,
    layer: str = "V1",
    **kw,
) -> VisualUnit:
    return VisualUnit(
        NeuronUnit(unit_id, layer=layer, threshold=threshold, **kw),
        receptive_field,
    )


@dataclass(frozen=True)
class CellAssembly:
    members: frozenset[str]
    label: str = ""


class Hierarchy:
    """Bottom-up feature hierarchy; layer 0 reads the stimulus grid, each
    higher layer reads the fired set of the layer below (binary, rate 9)."""

    def __init__(self, width: int, height: int, layers: list[list[VisualUnit]]):
        self.width = width
        self.height = height
        self.layers = layers

    def present(self, stim: FeatureStimulus) -> list[set[str]]:
        if (stim.width, stim.height) != (self.width, self.height):
            raise VisionError(
                f"stimulus {stim.width}x{stim.height} does not match "
                f"hierarchy {self.width}x{self.height}"
            )
        fired_per_layer: list[set[str]] = []
        below: set[str] = set()
        for depth, layer in enumerate(self.layers):
            fired: set[str] = set()
            for unit in layer:
                if depth == 0:
                    window = unit.observe(stim)
                else:
                    window = [FiringPattern(uid, 9) for uid in sorted(below)]
                ok, _ = step_neuron(unit.neuron, window)
                if ok:
                    fired.add(unit.unit_id)
            fired_per_layer.append(fired)
            below = fired
        return fired_per_layer


def build_hierarchy(
    width: int,
    height: int,
    base_rf: int = 2,
    depth: int = 4,
    threshold: float = 1.0,
) -> Hierarchy:
    """Generic untuned hierarchy with receptive-field doubling per layer."""
    layers: list[list[VisualUnit]] = []
    rf = base_rf
    for d in range(depth):
        layer_units = []
        step = rf
        idx = 0
        for y0 in range(0, height, step):
            for x0 in range(0, width, step):
                rect = (x0, y0, min(x0 + rf - 1, width - 1), min(y0 + rf - 1, height - 1))
                layer_units.append(
                    make_unit(f"{LAYER_NAMES[d]}:{idx}", rect, threshold, LAYER_NAMES[d])
                )
                idx += 1
        layers.append(layer_units)
        rf *= 2
    return Hierarchy(width, height, layers)


# -- lateral plasticity ---------------------------------------------------


def lateral_update(
    a: VisualUnit,
    b: VisualUnit,
    fired_a_then_b: bool,
    eta_lat: float = DEFAULT_ETA_LAT,
    w_max: float = 100.0,
) -> float:
    """Sequential firing of a then b within one tick strengthens a->b and
    leaves a half-strength symmetric trace b->a.  Returns the a->b weight."""
    if a.unit_id == b.unit_id:
        raise VisionError("lateral update needs two distinct units")
    if fired_a_then_b:
        a.excitatory_lateral[b.unit_id] = min(
            a.excitatory_lateral.get(b.unit_id, 0.0) + eta_lat, w_max
        )
        b.excitatory_lateral[a.unit_id] = min(
            b.excitatory_lateral.get(a.unit_id, 0.0) + eta_lat / 2.0, w_max
        )
    return a.excitatory_lateral.get(b.unit_id, 0.0)


def lateral_complete(
    units: dict[str, VisualUnit],
    fired: set[str],
    windows: Optional[dict[str, list[FiringPattern]]] = None,
    theta_bidir: float = DEFAULT_THETA_BIDIR,
) -> set[str]:
    """Close the fired set over excitatory links at or above theta_bidir.

    Each laterally recruited unit also potentiates its own current window
    (when one is supplied), which is what lets a unit acquire the input
    pattern of a stimulus sitting outside its tuning but inside its field.
    """
    result = set(fired)
    frontier = sorted(result)
    while frontier:
        next_frontier = []
        for uid in frontier:
            unit = units.get(uid)
            if unit is None:
                continue
            for target_id in sorted(unit.excitatory_lateral):
                if target_id in result:
                    continue
                if unit.excitatory_lateral[target_id] >= theta_bidir:
                    result.add(target_id)
                    next_frontier.append(target_id)
                    if windows is not None and target_id in units:
                        window = windows.get(target_id, [])
                        if window:
                            cph_update(units[target_id].neuron, window, fired=True)
        frontier = sorted(next_frontier)
    return result


def inhibitory_update(
    pre: VisualUnit,
    post: VisualUnit,
    post_fired: bool,
    eta_inh: float = DEFAULT_ETA_INH,
    w_max: float = 100.0,
) -> float:
    """Anti-Hebbian step on a declared inhibitory edge, applied when ``pre``
    fired: a silent target strengthens suppression, a co-firing target
    weakens it."""
    if post.unit_id not in pre.inhibitory_lateral:
        raise VisionError(f"no inhibitory edge {pre.unit_id}->{post.unit_id}")
    w = pre.inhibitory_lateral[post.unit_id]
    if post_fired:
        w = max(w - eta_inh, 0.0)
    else:
        w = min(w + eta_inh, w_max)
    pre.inhibitory_lateral[post.unit_id] = w
    return w


def discover_assembly(
    units: dict[str, VisualUnit],
    theta_bidir: float = DEFAULT_THETA_BIDIR,
    label: str = "",
) -> Optional[CellAssembly]:
    """Maximal clique of bidirectional excitatory weights >= theta_bidir;
    ties broken toward the lexicographically smallest member tuple."""
    graph = nx.Graph()
    ids = sorted(units)
    graph.add_nodes_from(ids)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            ab = units[a].excitatory_lateral.get(b, 0.0)
            ba = units[b].excitatory_lateral.get(a, 0.0)
            if ab >= theta_bidir and ba >= theta_bidir:
                graph.add_edge(a, b)
    best: Optional[tuple[int, tuple[str, ...]]] = None
    for clique in nx.find_cliques(graph):
        if len(clique) < 2:
            continue
        entry = (-len(clique), tuple(sorted(clique)))
        if best is None or entry < best:
            best = entry
    if best is None:
        return None
    return CellAssembly(frozenset(best[1]), label)


# -- tick pipeline and protocols ------------------------------------------


@dataclass
class TickResult:
    fired: set[str]
    feedforward: set[str]
    windows: dict[str, list[FiringPattern]]


def run_tick(
    units: dict[str, VisualUnit],
    stim: FeatureStimulus,
    prev_fired: set[str],
    theta_bidir: float = DEFAULT_THETA_BIDIR,
    eta_lat: float = DEFAULT_ETA_LAT,
    eta_inh: float = DEFAULT_ETA_INH,
    learn: bool = True,
    lateral_learning: bool = True,
) -> TickResult:
    """One deterministic layer tick: feedforward + inhibition + lateral
    closure, then (optionally) plasticity.

    ``lateral_learning`` gates the sequential excitatory rule, which models
    attention following one moving object; streams of discrete, unrelated
    presentations train feedforward and inhibitory weights only.
    """
    windows = {uid: units[uid].observe(stim) for uid in sorted(units)}
    excitation = {
        uid: compute_excitation(units[uid].neuron, windows[uid]) for uid in sorted(units)
    }
    provisional = {
        uid for uid in units if excitation[uid] >= units[uid].neuron.threshold
    }
    fired = set()
    for uid in sorted(units):
        inhibition = sum(
            units[pre].inhibitory_lateral.get(uid, 0.0)
            for pre in provisional
            if pre != uid
        )
        if excitation[uid] - inhibition >= units[uid].neuron.threshold:
            fired.add(uid)
    feedforward = set(fired)
    if learn:
        # recruited units are potentiated once, in the loop below
        fired = lateral_complete(units, fired, None, theta_bidir)
        for uid in sorted(units):
            window = windows[uid]
            if window or uid in fired:
                cph_update(units[uid].neuron, window, fired=uid in fired)
        if lateral_learning:
            for a in sorted(prev_fired):
                for b in sorted(fired):
                    if a != b and a in units and b in units:
                        lateral_update(units[a], units[b], True, eta_lat)
        for pre_id in sorted(units):
            if pre_id not in fired:
                continue
            for post_id in sorted(units[pre_id].inhibitory_lateral):
                if post_id in units:
                    inhibitory_update(
                        units[pre_id], units[post_id], post_id in fired, eta_inh
                    )
        for uid in sorted(units):
            if units[uid].neuron.target_weight is not None:
                homeostatic_rescale(units[uid].neuron)
    else:
        fired = lateral_complete(units, fired, None, theta_bidir)
    return TickResult(fired, feedforward, windows)


@dataclass
class InvarianceReport:
    assembly: Optional[CellAssembly]
    fired_per_tick: list[set[str]]


def run_invariance_protocol(
    units: dict[str, VisualUnit],
    trajectory: list[FeatureStimulus],
    passes: int,
    theta_bidir: float = DEFAULT_THETA_BIDIR,
    eta_lat: float = DEFAULT_ETA_LAT,
) -> InvarianceReport:
    """Sweep a moving object along ``trajectory`` for ``passes`` repetitions,
    applying the full lateral pipeline each tick, then report the discovered
    assembly.  Degenerate schedules (no unit ever fires) are rejected."""
    if passes > 0 and trajectory:
        any_rf_hit = any(
            unit.observe(stim) for stim in trajectory for unit in units.values()
        )
        if not any_rf_hit:
            raise VisionError("trajectory never enters any receptive field")
    fired_per_tick: list[set[str]] = []
    for _ in range(passes):
        prev: set[str] = set()
        for stim in trajectory:
            result = run_tick(units, stim, prev, theta_bidir, eta_lat)
            fired_per_tick.append(result.fired)
            prev = result.feedforward
    return InvarianceReport(discover_assembly(units, theta_bidir), fired_per_tick)


def probe(
    units: dict[str, VisualUnit],
    stim: FeatureStimulus,
    theta_bidir: float = DEFAULT_THETA_BIDIR,
) -> set[str]:
    """Present a stimulus without learning; returns the closed fired set."""
    return run_tick(units, stim, set(), theta_bidir, learn=False).fired


def firing_correlations(
    fired_per_tick: list[set[str]], groups: dict[str, list[str]]
) -> dict[str, float]:
    """Pearson correlations of firing indicators: the max across-group pair
    ('cross') and the min within-group pair ('within')."""

    def corr(a: str, b: str) -> float:
        xs = [1.0 if a in f else 0.0 for f in fired_per_tick]
        ys = [1.0 if b in f else 0.0 for f in fired_per_tick]
        n = len(xs)
        if n == 0:
            return 0.0
        mx = sum(xs) / n
        my = sum(ys) / n
        cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
        vx = sum((x - mx) ** 2 for x in xs)
        vy = sum((y - my) ** 2 for y in ys)
        if vx <= 0.0 or vy <= 0.0:
            return 0.0
        return cov / (vx**0.5 * vy**0.5)

    names = sorted(groups)
    cross = []
    within = []
    for i, ga in enumerate(names):
        members_a = sorted(groups[ga])
        for j in range(len(members_a)):
            for k in range(j + 1, len(members_a)):
                within.append(corr(members_a[j], members_a[k]))
        for gb in names[i + 1 :]:
            for a in members_a:
                for b in sorted(groups[gb]):
                    cross.append(corr(a, b))
    return {
        "cross_max": max(cross) if cross else 0.0,
        "within_min": min(within) if within else 0.0,
    }


# -- canned stimuli used by protocols and scenarios ------------------------


def point_stimulus(
    width: int, height: int, x: int, y: int, feature: str = "ball", rate: int = 9
) -> FeatureStimulus:
    stim = FeatureStimulus(width, height)
    stim.set(x, y, feature, rate)
    return stim


def multi_stimulus(
    width: int, height: int, cells: Iterable[tuple[int, int, str, int]]
) -> FeatureStimulus:
    stim = FeatureStimulus(width, height)
    for x, y, feature, rate in cells:
        stim.set(x, y, feature, rate)
    return stim


@dataclass
class CompetitionReport:
    square_excitation: float
    circle_excitation: float
    fires_for_square: bool
    fires_for_circle: bool


def run_competition_protocol(
    shared: VisualUnit,
    square_stim: FeatureStimulus,
    circle_stim: FeatureStimulus,
    trials: int,
    rng: Random,
    square_ratio: float = 0.75,
    rescale_every: int = 4,
) -> CompetitionReport:
    """Frequency competition over one shared unit tuned to both objects.

    Squares arrive ``square_ratio`` of the time; firing potentiates the
    matching feature subsets and periodic homeostatic rescaling keeps the
    weight sum fixed, so the more frequent object crowds out the other until
    the unit fires for it alone."""
    for t in range(trials):
        stim = square_stim if rng.random() < square_ratio else circle_stim
        window = shared.observe(stim)
        fired, _ = step_neuron(shared.neuron, window)
        cph_update(shared.neuron, window, fired=fired)
        if (t + 1) % rescale_every == 0:
            homeostatic_rescale(shared.neuron)
    sq_exc = compute_excitation(shared.neuron, shared.observe(square_stim))
    ci_exc = compute_excitation(shared.neuron, shared.observe(circle_stim))
    theta = shared.neuron.threshold
    return CompetitionReport(sq_exc, ci_exc, sq_exc >= theta, ci_exc >= theta)
