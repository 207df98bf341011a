"""POVM construction for photon-number-resolving and on-off detectors,
plus the two heralding strategies of the scheme.

The ideal strategy projects one photon onto the (E, late) and (F, early)
heralding modes and vacuum onto the six others.  The simplified strategy
keeps only two gated on-off detectors of efficiency eta on those same two
modes; the six disregarded modes get explicit identity assignments so a
strategy is always a total map over the heralding modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import branch_engine
from .branch_engine import BranchState
from .fock_dense import (
    FockRegister,
    ModeLabel,
    TruncationPolicy,
    apply_operator,
    partial_trace,
)

__all__ = [
    "POVMElement",
    "HeraldStrategy",
    "HeraldOutcome",
    "DegenerateOutcomeError",
    "onoff_povm",
    "ideal_herald",
    "simple_herald",
    "herald",
    "HERALD_CLICK_MODES",
    "HERALD_SILENT_MODES",
    "KEPT_MODES",
]

PROBABILITY_FLOOR = 1e-300


class DegenerateOutcomeError(RuntimeError):
    """Heralding probability fell below the configured floor."""


@dataclass(frozen=True)
class POVMElement:
    """One measurement operator on a single mode, diagonal in Fock basis.

    kind: 'fock' (projector |k><k|), 'off'/'on' (efficiency eta), 'identity'.
    The matrix can be materialized on any local dimension, which is what the
    branch engine needs.
    """

    kind: str
    mode: ModeLabel | None = None
    eta: float | None = None
    k: int | None = None

    def __post_init__(self):
        if self.kind in ("off", "on"):
            if self.eta is None or not 0.0 <= self.eta <= 1.0:
                raise ValueError("on/off elements need efficiency eta in [0, 1]")
        elif self.kind == "fock":
            if self.k is None or self.k < 0:
                raise ValueError("fock projector needs k >= 0")
        elif self.kind != "identity":
            raise ValueError(f"unknown POVM kind {self.kind!r}")

    def diagonal(self, dim: int) -> np.ndarray:
        if self.kind == "identity":
            return np.ones(dim)
        if self.kind == "fock":
            d = np.zeros(dim)
            if self.k < dim:
                d[self.k] = 1.0
            return d
        off = (1.0 - self.eta) ** np.arange(dim)
        return off if self.kind == "off" else 1.0 - off

    def matrix(self, dim: int) -> np.ndarray:
        return np.diag(self.diagonal(dim)).astype(complex)

    def on_mode(self, mode: ModeLabel) -> "POVMElement":
        return POVMElement(self.kind, mode, self.eta, self.k)


def onoff_povm(eta: float, cutoff: int) -> tuple[POVMElement, POVMElement]:
    """Off = sum_k (1-eta)^k |k><k|, On = 1 - Off; completeness is exact
    on the truncated space by construction.  ``cutoff`` fixes the default
    materialization used in tests; the elements render at any dimension.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    return POVMElement("off", eta=eta), POVMElement("on", eta=eta)


# canonical heralding layout of the scheme
_E = "e"
_L = "l"
HERALD_CLICK_MODES = (ModeLabel("E", _L), ModeLabel("F", _E))
HERALD_SILENT_MODES = (
    ModeLabel("C", _E),
    ModeLabel("C", _L),
    ModeLabel("D", _E),
    ModeLabel("D", _L),
    ModeLabel("E", _E),
    ModeLabel("F", _L),
)
KEPT_MODES = (ModeLabel("A", _E), ModeLabel("A", _L), ModeLabel("B"))


@dataclass(frozen=True)
class HeraldStrategy:
    """Per-mode POVM assignments plus the list of kept (unmeasured) modes."""

    assignments: dict
    kept: tuple[ModeLabel, ...]
    name: str = ""

    def __post_init__(self):
        for m in self.kept:
            if m in self.assignments:
                raise ValueError(f"kept mode {m} must not carry a POVM assignment")


def ideal_herald() -> HeraldStrategy:
    """One photon on (E,l) and (F,e), vacuum on the six other heralding modes."""
    assignments = {m: POVMElement("fock", mode=m, k=1) for m in HERALD_CLICK_MODES}
    for m in HERALD_SILENT_MODES:
        assignments[m] = POVMElement("fock", mode=m, k=0)
    return HeraldStrategy(assignments, KEPT_MODES, name="ideal")


def simple_herald(eta: float) -> HeraldStrategy:
    """On-off click on (E,l) and (F,e); identity on the six other modes."""
    _, on = onoff_povm(eta, cutoff=0)
    assignments = {m: on.on_mode(m) for m in HERALD_CLICK_MODES}
    for m in HERALD_SILENT_MODES:
        assignments[m] = POVMElement("identity", mode=m)
    return HeraldStrategy(assignments, KEPT_MODES, name="simple")


@dataclass
class HeraldOutcome:
    """Normalized conditional density matrix on kept modes + probability."""

    probability: float
    state: FockRegister | None
    diagnostics: dict = field(default_factory=dict)


def herald(
    state,
    strategy: HeraldStrategy,
    policy: TruncationPolicy = TruncationPolicy(),
    keep_dims: dict | None = None,
    prob_floor: float = PROBABILITY_FLOOR,
    want_state: bool = True,
) -> HeraldOutcome:
    """Apply a heralding strategy to either engine's state.

    probability = Tr[Pi rho]; conditional = Tr_detected[Pi rho]/probability.
    Modes present in the state but neither kept nor assigned are measured
    with identity (traced out), recorded in the diagnostics.
    """
    missing = [m for m in strategy.kept if m not in tuple(state.modes)]
    if missing:
        raise ValueError(f"state is missing kept modes {missing}")
    implicit = [
        m for m in state.modes if m not in strategy.kept and m not in strategy.assignments
    ]
    if isinstance(state, BranchState):
        res = branch_engine.expectation(
            state,
            strategy.assignments,
            strategy.kept,
            policy=policy,
            keep_dims=keep_dims,
            want_operator=want_state,
        )
        prob, op, dims = res.probability, res.operator, res.kept_dims
        kept = res.kept_modes
    elif isinstance(state, FockRegister):
        prob, op, kept, dims = _herald_dense(state, strategy, want_state)
    else:
        raise TypeError(f"herald does not understand state type {type(state)!r}")

    diagnostics = {"implicit_identity_modes": tuple(implicit), "strategy": strategy.name}
    if want_state and prob < prob_floor:
        raise DegenerateOutcomeError(
            f"heralding probability {prob:.3e} below floor {prob_floor:.1e}"
        )
    reg = None
    if want_state and op is not None:
        d = int(np.prod(dims))
        rho = op.reshape(d, d) / prob
        rho = 0.5 * (rho + rho.conj().T)
        reg = FockRegister(tuple(kept), tuple(dims), "mixed", rho.reshape(dims + dims))
    return HeraldOutcome(float(prob), reg, diagnostics)


def _herald_dense(state: FockRegister, strategy: HeraldStrategy, want_state: bool):
    """Direct dense herald on a fully materialized register."""
    work = state
    for mode, element in strategy.assignments.items():
        if mode not in work.modes:
            raise ValueError(f"strategy addresses mode {mode} absent from the state")
        d = work.dim(mode)
        diag = element.diagonal(d)
        sqrt_m = np.diag(np.sqrt(np.clip(diag, 0.0, None))).astype(complex)
        work = apply_operator(work, sqrt_m, (mode,))
    if work.kind == "pure":
        prob = float(np.vdot(work.array, work.array).real)
    else:
        prob = float(work.trace().real)
    if not want_state:
        return prob, None, strategy.kept, ()
    reduced = partial_trace(work, list(strategy.kept))
    # reorder to the strategy's kept order
    order = [reduced.modes.index(m) for m in strategy.kept]
    n = len(reduced.dims)
    arr = np.transpose(reduced.array, tuple(order) + tuple(o + n for o in order))
    dims = tuple(reduced.dims[i] for i in order)
    return prob, arr.reshape(int(np.prod(dims)), -1), strategy.kept, dims
