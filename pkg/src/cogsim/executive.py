"""Executive control: context->action mapping, priority selection, the
cue->command relation store, and the reward-prediction system.

The action network is a monolithic map from percept contexts (six abstraction
levels, flattened for matching) onto internal and external actions, scored by
the same subset-weight excitation as everywhere else, so candidates follow
the matching principle: more aligned percepts, higher score.  A separate
winner-take-all stage prioritizes, suppresses competing actions, and honours
a global stop command that removes every external action regardless of
learned weights.

Reward prediction is tabular TD: value entries are keyed by canonical
percept-context keys (time-stamped contexts reuse the temporal engine's
time-cell ids), the error is delta = R + gamma*V(next) - V(now), and dopamine
applies the error to synaptically tagged targets along four pathways: value
correction, context->context edges (positive errors only), action-map
weights, and striatal gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .plasticity import (
    ComplementaryInput,
    FiringPattern,
    NeuronUnit,
    compute_excitation,
    cph_update,
)
from .semantics import SemanticStore

PERCEPT_LEVELS = (
    "abstract_executive",
    "executive",
    "conceptual",
    "cognitive_map",
    "sensory",
    "motor",
)

GLOBAL_SUPPRESSORS = frozenset({"do not move!(amodal)"})

DEFAULT_ALPHA = 0.5
DEFAULT_ALPHA_S = 0.25
DEFAULT_TAG_TTL = 10
DEFAULT_GAMMA = 0.9
DEFAULT_THETA_A = 1.0
DEFAULT_GAIN = 1.0
DEFAULT_GAIN_MIN = 0.0


class ExecutiveError(ValueError):
    pass


class GatingError(ExecutiveError):
    pass


@dataclass
class PerceptLevelContext:
    abstract_executive: set[str] = field(default_factory=set)
    executive: set[str] = field(default_factory=set)
    conceptual: set[str] = field(default_factory=set)
    cognitive_map: set[str] = field(default_factory=set)
    sensory: set[str] = field(default_factory=set)
    motor: set[str] = field(default_factory=set)

    def flatten(self) -> set[str]:
        out: set[str] = set()
        for level in PERCEPT_LEVELS:
            out.update(getattr(self, level))
        return out


@dataclass(frozen=True)
class Action:
    action_id: str
    kind: str  # "internal" | "external"
    op: str = ""  # internal: ungate | protect | propagate | imagery | attention
    payload: tuple = ()

    def __post_init__(self):
        if self.kind not in ("internal", "external"):
            raise ExecutiveError(f"bad action kind {self.kind!r}")
        if self.kind == "internal" and self.op not in (
            "ungate", "protect", "propagate", "imagery", "attention",
        ):
            raise ExecutiveError(f"bad internal op {self.op!r}")


@dataclass(frozen=True)
class Candidate:
    action: Action
    score: float
    priority: float


def context_key(percepts: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(percepts)))


class ActionNetwork:
    """Stored context->action associations scored by subset excitation."""

    def __init__(self, theta_a: float = DEFAULT_THETA_A):
        self.theta_a = theta_a
        self.actions: dict[str, Action] = {}
        self.units: dict[str, NeuronUnit] = {}
        # fast pathway gain per (context key, action); defaults to 1.0
        self.striatal_gain: dict[tuple[tuple[str, ...], str], float] = {}
        self.gain_min = DEFAULT_GAIN_MIN

    def associate(
        self, context: Iterable[str], action: Action, repeats: int = 1
    ) -> None:
        self.actions[action.action_id] = action
        unit = self.units.setdefault(
            action.action_id,
            NeuronUnit(action.action_id, layer="ffa", threshold=self.theta_a),
        )
        window = [FiringPattern(p, 9) for p in context_key(context)]
        for _ in range(repeats):
            cph_update(unit, window, fired=True)

    def gain_for(self, key: tuple[str, ...], action_id: str) -> float:
        return self.striatal_gain.get((key, action_id), DEFAULT_GAIN)

    def propose(self, ctx: PerceptLevelContext | Iterable[str]) -> list[Candidate]:
        """Score every stored association against the flattened context;
        candidates at or above theta_a are returned with striatal priority."""
        flat = ctx.flatten() if isinstance(ctx, PerceptLevelContext) else set(ctx)
        key = context_key(flat)
        patterns = [FiringPattern(p, 9) for p in key]
        out = []
        for action_id in sorted(self.units):
            score = compute_excitation(self.units[action_id], patterns)
            if score >= self.theta_a:
                priority = score * self.gain_for(key, action_id)
                out.append(Candidate(self.actions[action_id], score, priority))
        return out

    def adjust_weight(self, key: tuple[str, ...], action_id: str, amount: float):
        """Dopamine pathway onto the slow map: moves the full-context entry."""
        unit = self.units.get(action_id)
        if unit is None:
            return
        pattern_key = tuple((p, 9) for p in key)
        ci = unit.store.get(pattern_key)
        old = ci.weight if ci else 0.0
        new = max(old + amount, 0.0)
        if new == 0.0:
            unit.store.pop(pattern_key, None)
        elif ci is None:
            unit.store[pattern_key] = ComplementaryInput(pattern_key, new)
        else:
            ci.weight = new

    def adjust_gain(self, key: tuple[str, ...], action_id: str, amount: float):
        gain = self.gain_for(key, action_id) + amount
        self.striatal_gain[(key, action_id)] = max(gain, self.gain_min)


def select_action(
    candidates: Sequence[Candidate],
    active_percepts: Iterable[str] = (),
    suppressors: frozenset[str] = GLOBAL_SUPPRESSORS,
) -> list[Action]:
    """Winner-take-all on priority (ties: lexicographic id).  An active
    global-suppression percept removes every external candidate first,
    whatever its learned context."""
    active = set(active_percepts)
    pool = list(candidates)
    if active & suppressors:
        pool = [c for c in pool if c.action.kind != "external"]
    if not pool:
        return []
    best = max(pool, key=lambda c: (c.priority, ))
    ties = [c for c in pool if c.priority == best.priority]
    winner = min(ties, key=lambda c: c.action.action_id)
    return [winner.action]


# -- relation store and fast buffer ----------------------------------------


@dataclass
class Rule:
    cue: frozenset[str]
    command: str
    expiry: Optional[int] = None

    def __post_init__(self):
        if not self.cue:
            raise ExecutiveError("rule cue must be nonempty")


class RelationStore:
    """Short-term cue->command memory (plus reward-value items for decision
    making).  Writes go through the fast buffer's two-step gating: cue first,
    command second; a protected store rejects writes."""

    def __init__(self):
        self.rules: list[Rule] = []
        self.value_items: list[tuple[str, float]] = []
        self.protected = False
        self._pending_cue: Optional[frozenset[str]] = None

    def present_cue(self, cue: Iterable[str]) -> None:
        if self.protected:
            raise GatingError("relation store is protected")
        self._pending_cue = frozenset(cue)
        if not self._pending_cue:
            raise ExecutiveError("rule cue must be nonempty")

    def present_command(self, command: str, expiry: Optional[int] = None) -> Rule:
        if self.protected:
            raise GatingError("relation store is protected")
        if self._pending_cue is None:
            raise GatingError("no cue presented before the command")
        rule = Rule(self._pending_cue, command, expiry)
        self.rules.append(rule)
        self._pending_cue = None
        return rule

    def store_rule(
        self, cue: Iterable[str], command: str, expiry: Optional[int] = None
    ) -> Rule:
        self.present_cue(cue)
        return self.present_command(command, expiry)

    def match_rules(self, ctx: Iterable[str], now: Optional[int] = None) -> list[str]:
        """Commands whose cue is a subset of the active context."""
        active = set(ctx)
        out = []
        for rule in self.rules:
            if rule.expiry is not None and now is not None and now > rule.expiry:
                continue
            if rule.cue <= active:
                out.append(rule.command)
        return sorted(set(out))

    def store_value(self, prospect: str, value: float) -> None:
        if self.protected:
            raise GatingError("relation store is protected")
        self.value_items.append((prospect, value))

    def best_prospect(self) -> Optional[str]:
        if not self.value_items:
            return None
        best_value = max(v for _, v in self.value_items)
        ties = sorted(p for p, v in self.value_items if v == best_value)
        return ties[0]


# -- reward prediction ------------------------------------------------------


@dataclass
class Tag:
    kind: str  # "context" | "transition" | "action"
    key: tuple
    ttl: int


@dataclass(frozen=True)
class TickDelta:
    offset: int
    delta: float
    reward: float


class RewardSystem:
    """Predicted-value table (VMPFC) plus a received-reward table (ventral
    OFC) and the four dopamine update pathways."""

    def __init__(
        self,
        gamma: float = DEFAULT_GAMMA,
        alpha: float = DEFAULT_ALPHA,
        alpha_s: float = DEFAULT_ALPHA_S,
        tag_ttl: int = DEFAULT_TAG_TTL,
        baseline: float = 0.0,
    ):
        if not (0.0 <= gamma <= 1.0):
            raise ExecutiveError("gamma must be in [0, 1]")
        self.gamma = gamma
        self.alpha = alpha
        self.alpha_s = alpha_s
        self.tag_ttl = tag_ttl
        self.baseline = baseline
        self.V: dict[tuple[str, ...], float] = {}
        self.received: dict[tuple[str, ...], float] = {}
        self.tags: list[Tag] = []

    # -- lookups -------------------------------------------------------------

    def v_lookup(self, percepts: Iterable[str]) -> float:
        """Exact-key lookup; unseen contexts fall back to an overlap-weighted
        average of stored entries (mixed-selectivity generalization)."""
        key = context_key(percepts)
        if key in self.V:
            return self.V[key]
        if not key:
            return 0.0
        ctx = set(key)
        num = 0.0
        den = 0.0
        for stored in sorted(self.V):
            overlap = len(ctx & set(stored))
            if overlap == 0:
                continue
            frac = overlap / len(set(stored) | ctx)
            num += self.V[stored] * frac
            den += frac
        return num / den if den else 0.0

    def predict_value(
        self,
        ctx: Iterable[str],
        rollout: Sequence[Iterable[str]] = (),
    ) -> float:
        """V(ctx) combined with gamma-discounted values of predicted
        successor contexts (the rollout from the prediction modules)."""
        total = self.v_lookup(ctx)
        discount = 1.0
        for future in rollout:
            discount *= self.gamma
            total += discount * self.v_lookup(future)
        return total

    def received_reward(self, ctx: Iterable[str]) -> float:
        return self.received.get(context_key(ctx), 0.0)

    def set_received(self, ctx: Iterable[str], value: float) -> None:
        self.received[context_key(ctx)] = value

    def compute_td_error(self, r_next: float, v_next: float, v_now: float) -> float:
        return r_next + self.gamma * v_next - v_now

    # -- tagging and dopamine --------------------------------------------------

    def tag_context(self, percepts: Iterable[str]) -> None:
        key = context_key(percepts)
        if key:
            self.tags.append(Tag("context", key, self.tag_ttl))

    def tag_transition(self, pre: Iterable[str], post: Iterable[str]) -> None:
        self.tags.append(
            Tag("transition", (context_key(pre), context_key(post)), self.tag_ttl)
        )

    def tag_action(self, percepts: Iterable[str], action_id: str) -> None:
        self.tags.append(
            Tag("action", (context_key(percepts), action_id), self.tag_ttl)
        )

    def decay_tags(self) -> None:
        self.tags = [Tag(t.kind, t.key, t.ttl - 1) for t in self.tags if t.ttl > 1]

    def apply_dopamine(
        self,
        delta: float,
        ffa: Optional[ActionNetwork] = None,
        semantic: Optional[SemanticStore] = None,
    ) -> dict[str, int]:
        """Apply one reward-prediction error to every live tag.

        Pathways: (1) value correction on tagged contexts; (2) tagged
        context->context edges strengthened, positive errors only; (3) tagged
        context->action weights moved in the slow map; (4) striatal gains
        moved in the fast pathway, floored.
        """
        report = {"context": 0, "transition": 0, "action": 0}
        if delta == 0.0:
            return report
        for tag in self.tags:
            if tag.kind == "context":
                self.V[tag.key] = self.V.get(tag.key, 0.0) + self.alpha * delta
                report["context"] += 1
            elif tag.kind == "transition":
                if delta > 0 and semantic is not None:
                    pre, post = tag.key
                    for target in post:
                        semantic.reinforce_edge(pre, target, self.alpha * delta)
                    report["transition"] += 1
            else:  # action
                key, action_id = tag.key
                if ffa is not None:
                    ffa.adjust_weight(key, action_id, self.alpha * delta)
                    ffa.adjust_gain(key, action_id, self.alpha_s * delta)
                    report["action"] += 1
        return report

    # -- conditioning trials -----------------------------------------------------

    def run_trial(
        self,
        cue: str,
        delay: int,
        magnitude: float = 1.0,
        deliver_at: Optional[int] = None,
        omit: bool = False,
    ) -> list[TickDelta]:
        """One cue->reward trial over time-stamped contexts.

        Offset 0 is the cue context {cue}; offset k is the time-cell context
        <cue, k>.  The reward lands at ``delay`` (or ``deliver_at`` when
        delayed) and ends the trial; omission runs to the expected tick with
        no reward.  The cue itself arrives unpredicted, so the pre-cue state
        is the empty context whose value is pinned at zero.
        """
        end = delay if deliver_at is None else deliver_at
        deltas: list[TickDelta] = []
        prev: tuple[str, ...] = ()
        for offset in range(end + 1):
            if offset == 0:
                state = (cue,)
            elif offset < end:
                state = (f"t:{cue}|{offset}",)
            else:
                state = ()  # reward consumed / trial over
            reward = 0.0
            if offset == end and not omit:
                reward = magnitude
            delta = self.compute_td_error(
                reward, self.v_lookup(state), self.v_lookup(prev)
            )
            deltas.append(TickDelta(offset, delta, reward))
            self.apply_dopamine(delta)
            self.decay_tags()
            if state:
                self.tag_context(state)
            prev = state
        self.tags.clear()
        return deltas

    def condition(
        self, cue: str, delay: int, magnitude: float = 1.0, trials: int = 30
    ) -> list[list[TickDelta]]:
        return [self.run_trial(cue, delay, magnitude) for _ in range(trials)]
