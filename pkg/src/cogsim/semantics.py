"""Percept-level associative memory.

Percepts (labelled assemblies with a modality tag) are nodes; weighted
complementary inputs between them are the edges.  Offline replay of percept
contexts consolidates edges with the same subset-plasticity rule the sensory
layers use, at two granularities: whole assemblies as single patterns (the
edges spreading activation walks) and member units (the fine view that makes
partial-assembly arithmetic, e.g. dropout of one shared unit, computable).

Retrieval is iterative spreading activation over those edges.  Automatic
retrieval is a bare one-seed walk; controlled retrieval adds supplementary
percepts, per-percept bias, and suppression.  Interference between an old
schema and a contradicting fact is resolved by five protocol variants:
depression of uncorrelated edges, interleaved replay, dilution with
additional specifics, a direct inhibitory edge, and a trained conjunctive
inhibitory gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .plasticity import (
    FiringPattern,
    NeuronUnit,
    PlasticityError,
    compute_excitation,
    cph_update,
    format_key,
    homeostatic_rescale,
)

MODALITIES = ("visual", "auditory", "lexical", "emotional", "reward", "motor", "amodal")

DEFAULT_THETA_P = 1.0
DEFAULT_HOP_CAP = 6


class SemanticError(ValueError):
    pass


@dataclass(frozen=True)
class Percept:
    label: str
    modality: str
    assembly: tuple[str, ...]

    @property
    def percept_id(self) -> str:
        return f"{self.label}({self.modality})"


@dataclass(frozen=True)
class PerceptContext:
    tick: int
    active: frozenset[str]


@dataclass
class RelationalPrototype:
    """Incoming subset-weight map of a target, in units of one replay pass."""

    target: str
    weights: dict[tuple[str, ...], float]


@dataclass
class InhibitoryGate:
    """Conjunctive inhibitory unit: fires when every input percept is active,
    suppressing its target.  Weight follows the anti-Hebbian rule."""

    inputs: frozenset[str]
    target: str
    weight: float = 0.0
    eta: float = 1.0
    w_max: float = 100.0

    def train(self, post_fired: bool) -> float:
        if post_fired:
            self.weight = max(self.weight - self.eta, 0.0)
        else:
            self.weight = min(self.weight + self.eta, self.w_max)
        return self.weight


@dataclass(frozen=True)
class EdgeDelta:
    target: str
    key: tuple
    old: float
    new: float


class SemanticStore:
    """Registry of percepts plus their incoming weight stores."""

    def __init__(
        self,
        theta_p: float = DEFAULT_THETA_P,
        hop_cap: int = DEFAULT_HOP_CAP,
        eta_plus: float = 1.0,
        eta_minus: float = 0.25,
        cross_modal_scale: float = 1.0,
    ):
        self.theta_p = theta_p
        self.hop_cap = hop_cap
        self.eta_plus = eta_plus
        self.eta_minus = eta_minus
        # multiplier on potentiation when every source modality differs from
        # the target's (graded-hub stand-in; 1.0 disables it)
        self.cross_modal_scale = cross_modal_scale
        self.percepts: dict[str, Percept] = {}
        self._by_label: dict[tuple[str, str], str] = {}
        # incoming stores, assembly granularity (patterns are percept ids)
        self.percept_inputs: dict[str, NeuronUnit] = {}
        # incoming stores, unit granularity (patterns are member unit ids)
        self.unit_inputs: dict[str, NeuronUnit] = {}
        self.inhibitory_edges: dict[tuple[str, str], float] = {}
        self.gates: list[InhibitoryGate] = []

    # -- registration ------------------------------------------------------

    def register_percept(
        self,
        label: str,
        modality: str = "amodal",
        assembly_size: int = 1,
        units: Optional[Sequence[str]] = None,
    ) -> Percept:
        if modality not in MODALITIES:
            raise SemanticError(f"unknown modality {modality!r}")
        if (label, modality) in self._by_label:
            raise SemanticError(f"duplicate percept {label!r} in modality {modality}")
        pid = f"{label}({modality})"
        if units is None:
            if assembly_size < 1:
                raise SemanticError("assembly must be nonempty")
            units = tuple(f"{pid}#{i}" for i in range(assembly_size))
        else:
            units = tuple(units)
            if not units:
                raise SemanticError("assembly must be nonempty")
        percept = Percept(label, modality, units)
        self.percepts[pid] = percept
        self._by_label[(label, modality)] = pid
        return percept

    def lookup(self, label: str, modality: Optional[str] = None) -> Percept:
        if modality is not None:
            pid = self._by_label.get((label, modality))
            if pid is None:
                raise SemanticError(f"no percept {label!r} in modality {modality}")
            return self.percepts[pid]
        if label in self.percepts:  # full id given
            return self.percepts[label]
        hits = [pid for (lab, _), pid in sorted(self._by_label.items()) if lab == label]
        if not hits:
            raise SemanticError(f"no percept labelled {label!r}")
        if len(hits) > 1:
            raise SemanticError(f"ambiguous label {label!r}: {hits}")
        return self.percepts[hits[0]]

    def _percept_unit(self, pid: str) -> NeuronUnit:
        if pid not in self.percepts:
            raise SemanticError(f"unknown percept {pid!r}")
        unit = self.percept_inputs.get(pid)
        if unit is None:
            unit = NeuronUnit(
                pid, layer="percept", threshold=self.theta_p or 1.0,
                eta_plus=self.eta_plus, eta_minus=self.eta_minus,
            )
            self.percept_inputs[pid] = unit
        return unit

    def _unit_unit(self, pid: str) -> NeuronUnit:
        if pid not in self.percepts:
            raise SemanticError(f"unknown percept {pid!r}")
        unit = self.unit_inputs.get(pid)
        if unit is None:
            unit = NeuronUnit(
                pid, layer="assembly", threshold=self.theta_p or 1.0,
                eta_plus=self.eta_plus, eta_minus=self.eta_minus,
            )
            self.unit_inputs[pid] = unit
        return unit

    def resolve_ids(self, labels: Iterable[str]) -> list[str]:
        return [self.lookup(lab).percept_id for lab in labels]

    # -- consolidation -----------------------------------------------------

    def _edge_scale(self, window_pids: Sequence[str], target_pid: str) -> float:
        if self.cross_modal_scale == 1.0:
            return 1.0
        tgt = self.percepts[target_pid].modality
        if all(self.percepts[p].modality != tgt for p in window_pids):
            return self.cross_modal_scale
        return 1.0

    def _pair_update(
        self, src_ctx: Sequence[str], dst_ctx: Sequence[str]
    ) -> list[EdgeDelta]:
        deltas: list[EdgeDelta] = []
        window_pids = sorted(set(src_ctx))
        if not window_pids:
            return deltas
        percept_window = [FiringPattern(p, 9) for p in window_pids]
        unit_window = [
            FiringPattern(u, 9)
            for u in sorted({u for p in window_pids for u in self.percepts[p].assembly})
        ]
        active = set(window_pids) | set(dst_ctx)
        for target in sorted(set(dst_ctx)):
            scale = self._edge_scale(window_pids, target)
            for unit, window in (
                (self._percept_unit(target), percept_window),
                (self._unit_unit(target), unit_window),
            ):
                base_eta = unit.eta_plus
                unit.eta_plus = base_eta * scale
                try:
                    for d in cph_update(unit, window, fired=True):
                        deltas.append(EdgeDelta(target, d.key, d.old, d.new))
                finally:
                    unit.eta_plus = base_eta
        # percepts that matched the window but stayed silent are depressed
        for other in sorted(self.percept_inputs):
            if other in active:
                continue
            for d in cph_update(self.percept_inputs[other], percept_window, fired=False):
                deltas.append(EdgeDelta(other, d.key, d.old, d.new))
        for other in sorted(self.unit_inputs):
            if other in active:
                continue
            for d in cph_update(self.unit_inputs[other], unit_window, fired=False):
                deltas.append(EdgeDelta(other, d.key, d.old, d.new))
        return deltas

    def consolidate_replay(
        self,
        trace: Sequence[Iterable[str]],
        direction: str = "both",
        repeats: int = 1,
    ) -> list[EdgeDelta]:
        """Replay adjacent context pairs, strengthening each successor percept
        from the union of its predecessor's assemblies.  ``both`` alternates a
        forward and a backward sweep per repeat."""
        if direction not in ("forward", "backward", "both"):
            raise SemanticError(f"bad direction {direction!r}")
        contexts = [self.resolve_ids(ctx) for ctx in trace]
        if len(contexts) < 2:
            raise SemanticError("replay trace needs at least two contexts")
        deltas: list[EdgeDelta] = []
        for _ in range(repeats):
            if direction in ("forward", "both"):
                for i in range(len(contexts) - 1):
                    deltas.extend(self._pair_update(contexts[i], contexts[i + 1]))
            if direction in ("backward", "both"):
                for i in range(len(contexts) - 1, 0, -1):
                    deltas.extend(self._pair_update(contexts[i], contexts[i - 1]))
        return deltas

    def edge_weight(self, sources: Iterable[str], target: str) -> float:
        """Weight of one stored subset entry (assembly granularity)."""
        pids = sorted(self.resolve_ids(sources))
        key = tuple((p, 9) for p in pids)
        unit = self.percept_inputs.get(self.lookup(target).percept_id)
        if unit is None:
            return 0.0
        ci = unit.store.get(key)
        return ci.weight if ci else 0.0

    # -- retrieval ---------------------------------------------------------

    def _incoming_excitation(self, pid: str, active: set[str]) -> float:
        unit = self.percept_inputs.get(pid)
        if unit is None:
            return 0.0
        return compute_excitation(
            unit, [FiringPattern(p, 9) for p in sorted(active)]
        )

    def _inhibition(self, pid: str, active: set[str]) -> float:
        total = 0.0
        for (src, dst), w in sorted(self.inhibitory_edges.items()):
            if dst == pid and src in active:
                total += w
        for gate in self.gates:
            if gate.target == pid and gate.inputs <= active:
                total += gate.weight
        return total

    def retrieve(
        self,
        seed: Iterable[str],
        mode: str = "automatic",
        supplementary: Iterable[str] = (),
        bias: Optional[dict[str, float]] = None,
        suppress: Iterable[str] = (),
        hops: Optional[int] = None,
    ) -> list[frozenset[str]]:
        """Spreading activation from the seed; returns the active set after
        each hop (index 0 is the initial set).  The active set only grows;
        suppression clamps a percept's excitation to zero for the whole walk.
        """
        if hops is None:
            hops = self.hop_cap
        if hops < 1:
            raise SemanticError("hops must be >= 1")
        seed_ids = set(self.resolve_ids(seed))
        supp_ids = set(self.resolve_ids(supplementary))
        bias = {self.lookup(k).percept_id: v for k, v in (bias or {}).items()}
        suppress_ids = set(self.resolve_ids(suppress))
        if mode == "automatic":
            if supp_ids or bias or suppress_ids:
                raise SemanticError(
                    "automatic retrieval takes no supplementary/bias/suppress"
                )
            if len(seed_ids) != 1:
                raise SemanticError("automatic retrieval is one-for-one")
        elif mode != "controlled":
            raise SemanticError(f"bad mode {mode!r}")
        active = set(seed_ids) | supp_ids
        out = [frozenset(active)]
        for _ in range(hops):
            joined = []
            for pid in sorted(self.percepts):
                if pid in active or pid in suppress_ids:
                    continue
                exc = self._incoming_excitation(pid, active)
                exc += bias.get(pid, 0.0)
                exc -= self._inhibition(pid, active)
                if exc >= self.theta_p:
                    joined.append(pid)
            if not joined:
                break
            active.update(joined)
            out.append(frozenset(active))
        return out

    # -- prototypes ----------------------------------------------------------

    def build_prototype(
        self,
        observations: Sequence[tuple[Iterable[str], str]],
        repeats: int = 1,
    ) -> RelationalPrototype:
        """Consolidate each (variant feature set -> target) observation and
        read back the target's incoming weights in units of one pass."""
        if not observations:
            raise SemanticError("need at least one observation")
        targets = {self.lookup(t).percept_id for _, t in observations}
        if len(targets) != 1:
            raise SemanticError("prototype observations must share one target")
        target = next(iter(targets))
        for features, t in observations:
            self.consolidate_replay([list(features), [t]], "forward", repeats)
        unit = self.percept_inputs.get(target)
        w = self.eta_plus * repeats
        weights = {}
        if unit is not None:
            for key in sorted(unit.store):
                pids = tuple(p for p, _ in key)
                weights[pids] = unit.store[key].weight / w
        return RelationalPrototype(target, weights)

    # -- unit-granularity arithmetic ----------------------------------------

    def assembly_excitation(
        self,
        sources: Iterable[str],
        target: str,
        dropout: Optional[dict[str, Sequence[int]]] = None,
    ) -> float:
        """Excitation toward ``target`` from the member units of ``sources``,
        minus any dropped units (per-percept member indices)."""
        target_pid = self.lookup(target).percept_id
        unit = self.unit_inputs.get(target_pid)
        if unit is None:
            raise SemanticError(f"no unit-level weights toward {target!r}")
        dropped: set[str] = set()
        for label, indices in (dropout or {}).items():
            assembly = self.lookup(label).assembly
            for i in indices:
                dropped.add(assembly[i])
        active = []
        for pid in sorted(self.resolve_ids(sources)):
            for uid in self.percepts[pid].assembly:
                if uid not in dropped:
                    active.append(FiringPattern(uid, 9))
        return compute_excitation(unit, active)

    # -- interference protocols ----------------------------------------------

    INTERFERENCE_VARIANTS = (
        "weaken-uncorrelated",
        "interleaved-replay",
        "dilution",
        "direct-inhibition",
        "gated-inhibition",
    )

    def apply_interference_protocol(
        self,
        variant: str,
        roles: Optional[dict[str, str]] = None,
        **params,
    ) -> dict:
        """Run one schema-repair mechanism over the consolidated
        old-schema/counterexample percepts.

        ``roles`` maps the role names (exception, regular, category,
        old_fact, new_fact, specifics) onto percept labels; defaults follow
        the stock penguin/mynah/bird/fly/cannot-fly naming.
        """
        if variant not in self.INTERFERENCE_VARIANTS:
            raise SemanticError(f"unknown protocol variant {variant!r}")
        roles = roles or {}
        exception = self.lookup(roles.get("exception", "penguin")).percept_id
        regular = self.lookup(roles.get("regular", "mynah")).percept_id
        category = self.lookup(roles.get("category", "bird")).percept_id
        old_fact = self.lookup(roles.get("old_fact", "fly")).percept_id
        new_fact = self.lookup(roles.get("new_fact", "cannot fly")).percept_id
        unit = self.percept_inputs.get(new_fact)
        if unit is None or not unit.store:
            raise SemanticError("schema absent: nothing consolidated toward the new fact")

        if variant == "weaken-uncorrelated":
            trials = params.get("trials", 8)
            window = [
                FiringPattern(p, 9) for p in sorted({regular, category, old_fact})
            ]
            for _ in range(trials):
                cph_update(unit, window, fired=False)
            return {"variant": variant, "trials": trials}

        if variant == "interleaved-replay":
            cycles = params.get("cycles", 4)
            counter_repeats = params.get("counter_repeats", 8)
            for _ in range(cycles):
                self.consolidate_replay([[exception, category], [new_fact]], "forward", 1)
                self.consolidate_replay(
                    [[category], [old_fact]], "forward", counter_repeats
                )
            return {"variant": variant, "cycles": cycles}

        if variant == "dilution":
            # the exception's unique relations (e.g. water, blubber) must be
            # part of the schema already; the protocol consolidates them onto
            # the new fact so the old fact is one voice among many, then
            # rescales so the total drive is unchanged
            repeats = params.get("repeats", 2)
            specifics = [
                self.lookup(lab).percept_id
                for lab in params.get("specifics", ["water", "blubber"])
            ]
            unit.target_weight = unit.weight_sum()
            self.consolidate_replay(
                [[exception, category, old_fact] + specifics, [new_fact]],
                "forward",
                repeats,
            )
            factor = homeostatic_rescale(unit)
            return {"variant": variant, "rescale_factor": factor}

        if variant == "direct-inhibition":
            weight = params.get("weight", 10.0)
            self.inhibitory_edges[(new_fact, old_fact)] = weight
            return {"variant": variant, "weight": weight}

        # gated-inhibition
        trials = params.get("trials", 10)
        gate = InhibitoryGate(frozenset({exception, new_fact}), old_fact)
        for _ in range(trials):
            gate.train(post_fired=False)
        self.gates.append(gate)
        return {"variant": variant, "weight": gate.weight}

    # -- dumps ---------------------------------------------------------------

    def dump_edges(self) -> str:
        """``sources -> target : subset-key : weight`` per stored entry,
        assembly granularity, sorted, newline-terminated."""
        lines = []
        for target in sorted(self.percept_inputs):
            unit = self.percept_inputs[target]
            for key in sorted(unit.store):
                src = "+".join(p for p, _ in key)
                lines.append(
                    f"{src} -> {target} : {format_key(key)} : {unit.store[key].weight!r}"
                )
        return "".join(line + "\n" for line in lines)
