"""Wires sources, elements and detectors into the generation network and
exposes one-call experiment evaluations.

Network layout (all beam splitters balanced except BS1):

    BS1 (r, t) on (B, 5):    taps r*alpha off the CV input towards the
                             interferometer, keeps t*alpha on B.
    BS2 on (5, 4):           mixes the tap with the coherent injection
                             r*alpha; output ports become the interferometer
                             arms, port 4 -> arm 6 (late bin), port 5 ->
                             arm 7 (early bin).
    BS3 on (6, 7) per bin;   BS4 on (2, v) per bin;
    BS5 on (v, 7) per bin;   BS6 on (2, 6) per bin;
    port relabels:           6 -> F, 7 -> C, 2 -> E, v -> D.

With the convention out1 = t·in1 − r·in2, out2 = r·in1 + t·in2 this
reproduces the pre-detection state sign for sign: late-bin coherent pattern
(+,−,−,+)·ralpha/√2 on (C,D,E,F), early-bin pattern (−,+,−,+), and the DV
photon spreading as (a†_C + a†_D + a†_E + a†_F)/2.

The dense engine evolves the seven pre-detection-network modes exactly and
then contracts each time bin's four-mode detection network (plus diagonal
POVMs and vacuum ancillas) into an effective operator, built by dense
evolution of bin basis states.  That is algebraically identical to
materializing the eleven-mode state and tracing, but fits in memory at any
of the paper's operating points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import branch_engine
from .branch_engine import Branch, BranchState
from .detectors import (
    DegenerateOutcomeError,
    HeraldOutcome,
    HeraldStrategy,
    PROBABILITY_FLOOR,
    herald,
    ideal_herald,
    simple_herald,
)
from .fock_dense import (
    FockRegister,
    ModeLabel,
    TruncationPolicy,
    apply_operator,
    beam_splitter_matrix,
    coherent_state,
)
from .sources import CVSourceSpec, DVSourceSpec, cat_branches, cat_norm, squeezed_vacuum

__all__ = [
    "NetworkConfig",
    "ComponentProbabilities",
    "EngineCapabilityError",
    "MODE_B",
    "MODE_A_E",
    "MODE_A_L",
    "DETECTOR_MODES",
    "pre_detection_state",
    "run",
    "heralded_component_probabilities",
]

MODE_B = ModeLabel("B")
MODE_5 = ModeLabel("5")
MODE_4 = ModeLabel("4")
MODE_A_E = ModeLabel("A", "e")
MODE_A_L = ModeLabel("A", "l")
MODE_2_E = ModeLabel("2", "e")
MODE_2_L = ModeLabel("2", "l")
MODE_6 = {"e": ModeLabel("6", "e"), "l": ModeLabel("6", "l")}
MODE_7 = {"e": ModeLabel("7", "e"), "l": ModeLabel("7", "l")}
MODE_V = {"e": ModeLabel("v", "e"), "l": ModeLabel("v", "l")}

BALANCED = 1.0 / math.sqrt(2.0)

DETECTOR_MODES = tuple(
    ModeLabel(s, b) for s in ("C", "D", "E", "F") for b in ("e", "l")
)
# final identity of the four bin-network input ports after BS3..BS6
PORT_RELABEL = {"6": "F", "7": "C", "2": "E", "v": "D"}


class EngineCapabilityError(RuntimeError):
    """Requested engine cannot represent the configured sources."""


@dataclass(frozen=True)
class NetworkConfig:
    """One experiment configuration.

    alpha: CV input amplitude (cat size, or the kitten a squeezed input
    approximates); r: BS1 field reflection; eta: on-off efficiency for the
    simplified herald; herald: 'ideal' | 'simple'; engine: 'dense' |
    'branch' | 'auto' (auto = branch unless the CV input is squeezed vacuum
    or the branch count would exceed the limit).
    """

    alpha: float
    r: float
    eta: float = 1.0
    dv: DVSourceSpec = DVSourceSpec("ideal_pair")
    cv: CVSourceSpec | None = None
    herald: str = "simple"
    engine: str = "auto"
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    branch_limit: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("BS1 reflection must lie in [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("detector efficiency must lie in [0, 1]")
        if self.herald not in ("ideal", "simple"):
            raise ValueError(f"unknown herald {self.herald!r}")
        if self.engine not in ("auto", "dense", "branch"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.cv is None:
            object.__setattr__(self, "cv", CVSourceSpec("cat_plus", alpha=self.alpha))

    @property
    def t(self) -> float:
        return math.sqrt(1.0 - self.r * self.r)

    @property
    def alpha_f(self) -> float:
        return self.t * self.alpha

    @property
    def r_alpha(self) -> float:
        return self.r * self.alpha

    def strategy(self) -> HeraldStrategy:
        return ideal_herald() if self.herald == "ideal" else simple_herald(self.eta)


_BRANCHES_PER_COMPONENT = {"vacuum": 1, "pair": 8, "epsilon": 36}


def _components(dv: DVSourceSpec):
    w = dv.weights()
    comps = []
    if w.p0 > 0.0:
        comps.append(("vacuum", w.p0))
    if w.p1 > 0.0:
        comps.append(("pair", w.p1))
    if w.p_eps > 0.0:
        comps.append(("epsilon", w.p_eps))
    return comps


def _resolve_engine(cfg: NetworkConfig, components) -> str:
    if cfg.engine != "auto":
        if cfg.engine == "branch" and cfg.cv.kind == "squeezed_vacuum":
            raise EngineCapabilityError(
                "squeezed vacuum is not representable as a finite branch state; use the dense engine"
            )
        return cfg.engine
    if cfg.cv.kind == "squeezed_vacuum":
        return "dense"
    limit = cfg.branch_limit or branch_engine.DEFAULT_BRANCH_LIMIT
    estimate = 2 * sum(_BRANCHES_PER_COMPONENT[name] for name, _ in components)
    return "branch" if estimate <= limit else "dense"


def _branch_limit_for(cfg: NetworkConfig, components) -> int:
    if cfg.branch_limit is not None:
        return cfg.branch_limit
    estimate = 2 * sum(_BRANCHES_PER_COMPONENT[name] for name, _ in components)
    return max(branch_engine.DEFAULT_BRANCH_LIMIT, 2 * estimate)


def _dv_terms(component: str, weight: float = 1.0):
    """(coefficient, excitation map) monomials of one DV source component."""
    c = math.sqrt(weight)
    if component == "vacuum":
        return [(c, {})]
    if component == "pair":
        s = c / math.sqrt(2.0)
        return [
            (s, {MODE_A_E: 1, MODE_2_E: 1}),
            (s, {MODE_A_L: 1, MODE_2_L: 1}),
        ]
    if component == "epsilon":
        s = c / math.sqrt(3.0)
        return [
            (s / 2.0, {MODE_A_E: 2, MODE_2_E: 2}),
            (s / 2.0, {MODE_A_L: 2, MODE_2_L: 2}),
            (s, {MODE_A_E: 1, MODE_A_L: 1, MODE_2_E: 1, MODE_2_L: 1}),
        ]
    raise ValueError(f"unknown DV component {component!r}")


@dataclass(frozen=True)
class _Dims:
    b: int
    arm: int
    dv: int

    @staticmethod
    def for_config(cfg: NetworkConfig, components) -> "_Dims":
        pol = cfg.policy
        a_src = cfg.alpha
        if cfg.cv.kind == "squeezed_vacuum":
            a_src = max(a_src, 2.0 * math.sinh(abs(cfg.cv.zeta)))
        d_b = pol.source_cutoff(a_src) + 1
        amp5 = cfg.r * a_src
        arm_bound = (amp5 + abs(cfg.r_alpha)) / math.sqrt(2.0) + 1e-12
        # arms feed the detection network only; corner content beyond the
        # plain amplitude cutoff is negligible, so no source pad here
        d_arm = pol.cutoff_for_amplitude(arm_bound) + 4
        d_dv = 3 if any(name == "epsilon" for name, _ in components) else 2
        return _Dims(d_b, d_arm, d_dv)


# ---------------------------------------------------------------------------
# initial states and pre-detection evolution
# ---------------------------------------------------------------------------

PRE_MZ_MODES = (MODE_B, MODE_5, MODE_4, MODE_A_E, MODE_A_L, MODE_2_E, MODE_2_L)
POST_MZ_MODES = (MODE_B, MODE_7["e"], MODE_6["l"], MODE_A_E, MODE_A_L, MODE_2_E, MODE_2_L)


def _initial_branch(cfg: NetworkConfig, dv_terms) -> BranchState:
    if cfg.cv.kind != "cat_plus":
        raise EngineCapabilityError("branch engine supports only the cat CV input")
    branches = []
    for cv_coeff, cv_disp in cat_branches(cfg.cv.alpha):
        for dv_coeff, exc in dv_terms:
            disp = [0j] * len(PRE_MZ_MODES)
            disp[0] = cv_disp
            disp[2] = complex(cfg.r_alpha)
            branches.append(
                Branch(
                    complex(cv_coeff * dv_coeff),
                    tuple(disp),
                    tuple(exc.get(m, 0) for m in PRE_MZ_MODES),
                )
            )
    return BranchState(PRE_MZ_MODES, tuple(branches))


def _initial_dense(cfg: NetworkConfig, dv_terms, dims: _Dims) -> FockRegister:
    if cfg.cv.kind == "cat_plus":
        cv_vec = (
            coherent_state(cfg.cv.alpha, dims.b - 1)
            + coherent_state(-cfg.cv.alpha, dims.b - 1)
        ) / cat_norm(cfg.cv.alpha)
    else:
        cv_vec = squeezed_vacuum(cfg.cv.zeta, dims.b - 1)
    vac5 = np.zeros(dims.arm, dtype=complex)
    vac5[0] = 1.0
    inj4 = coherent_state(cfg.r_alpha, dims.arm - 1)

    d = dims.dv
    dv_arr = np.zeros((d, d, d, d), dtype=complex)
    norms = {}
    for coeff, exc in dv_terms:
        idx = tuple(exc.get(m, 0) for m in (MODE_A_E, MODE_A_L, MODE_2_E, MODE_2_L))
        # monomial (a†)^k|0> = sqrt(k!)|k>
        mono = math.prod(math.sqrt(math.factorial(k)) for k in idx)
        dv_arr[idx] += coeff * mono
    cv_part = FockRegister.from_product((MODE_B, MODE_5, MODE_4), (cv_vec, vac5, inj4))
    arr = np.tensordot(cv_part.array, dv_arr, axes=0)
    return FockRegister(
        PRE_MZ_MODES, (dims.b, dims.arm, dims.arm, d, d, d, d), "pure", arr
    )


def _evolve_post_mz_branch(state: BranchState, cfg: NetworkConfig, limit: int) -> BranchState:
    state = branch_engine.apply_beam_splitter(state, cfg.r, cfg.t, (MODE_B, MODE_5), limit)
    state = branch_engine.apply_beam_splitter(
        state, BALANCED, BALANCED, (MODE_5, MODE_4), limit
    )
    return state.relabel({MODE_5: MODE_7["e"], MODE_4: MODE_6["l"]})


def _evolve_post_mz_dense(state: FockRegister, cfg: NetworkConfig) -> FockRegister:
    u1 = beam_splitter_matrix(cfg.r, cfg.t, state.dim(MODE_B), state.dim(MODE_5))
    state = apply_operator(state, u1, (MODE_B, MODE_5))
    u2 = beam_splitter_matrix(BALANCED, BALANCED, state.dim(MODE_5), state.dim(MODE_4))
    state = apply_operator(state, u2, (MODE_5, MODE_4))
    return state.relabel({MODE_5: MODE_7["e"], MODE_4: MODE_6["l"]})


def _detection_network_branch(state: BranchState, limit: int) -> BranchState:
    state = state.with_modes(
        (MODE_6["e"], MODE_7["l"], MODE_V["e"], MODE_V["l"])
    )
    for b in ("e", "l"):
        m6, m7 = MODE_6[b], MODE_7[b]
        m2 = MODE_2_E if b == "e" else MODE_2_L
        mv = MODE_V[b]
        state = branch_engine.apply_beam_splitter(state, BALANCED, BALANCED, (m6, m7), limit)
        state = branch_engine.apply_beam_splitter(state, BALANCED, BALANCED, (m2, mv), limit)
        state = branch_engine.apply_beam_splitter(state, BALANCED, BALANCED, (mv, m7), limit)
        state = branch_engine.apply_beam_splitter(state, BALANCED, BALANCED, (m2, m6), limit)
        state = state.relabel(
            {
                m6: ModeLabel("F", b),
                m7: ModeLabel("C", b),
                m2: ModeLabel("E", b),
                mv: ModeLabel("D", b),
            }
        )
    return state.reorder((MODE_B, MODE_A_E, MODE_A_L) + DETECTOR_MODES)


def pre_detection_state(cfg: NetworkConfig, dv_component: str | None = None):
    """Full state over {A(e), A(l), B, (C..F)x(e,l)} right before the detectors."""
    comps = _components(cfg.dv) if dv_component is None else [(dv_component, 1.0)]
    engine = _resolve_engine(cfg, comps)
    terms = []
    for name, weight in comps:
        terms.extend(_dv_terms(name, weight if dv_component is None else 1.0))
    if engine == "branch":
        limit = _branch_limit_for(cfg, comps)
        state = _initial_branch(cfg, terms)
        state = _evolve_post_mz_branch(state, cfg, limit)
        return _detection_network_branch(state, limit)
    dims = _Dims.for_config(cfg, comps)
    state = _initial_dense(cfg, terms, dims)
    state = _evolve_post_mz_dense(state, cfg)
    # detection cutoff per policy (n_max covers r*alpha/sqrt(2) plus one DV
    # photon at the operating points); epsilon components add one photon
    det_cut = cfg.policy.detection_cutoff + max(0, dims.dv - 2)
    return _materialize_detection_dense(state, det_cut + 1)


def _materialize_detection_dense(state: FockRegister, det_dim: int) -> FockRegister:
    """Apply BS3..BS6 on the dense register, producing the 11-mode tensor.

    Detector axes are sliced back to det_dim after each bin; the content
    above det_dim is the negligible corner of the photon-number ladder and
    keeping it would square the memory footprint.
    """
    state = state.truncate_mode(MODE_6["l"], det_dim)
    state = state.truncate_mode(MODE_7["e"], det_dim)
    state = state.with_modes(
        (MODE_6["e"], MODE_7["l"], MODE_V["e"], MODE_V["l"]), (det_dim, det_dim, det_dim, det_dim)
    )
    for b in ("e", "l"):
        m6, m7 = MODE_6[b], MODE_7[b]
        m2 = MODE_2_E if b == "e" else MODE_2_L
        mv = MODE_V[b]
        for m in (m6, m7, m2, mv):
            state = state.pad_mode(m, max(state.dim(m), det_dim))
        for pair in ((m6, m7), (m2, mv), (mv, m7), (m2, m6)):
            u = beam_splitter_matrix(BALANCED, BALANCED, state.dim(pair[0]), state.dim(pair[1]))
            state = apply_operator(state, u, pair)
        for m in (m6, m7, m2, mv):
            state = state.truncate_mode(m, det_dim)
        state = state.relabel(
            {
                m6: ModeLabel("F", b),
                m7: ModeLabel("C", b),
                m2: ModeLabel("E", b),
                mv: ModeLabel("D", b),
            }
        )
    order = (MODE_B, MODE_A_E, MODE_A_L) + DETECTOR_MODES
    perm = [state.modes.index(m) for m in order]
    arr = np.transpose(state.array, perm)
    return FockRegister(order, tuple(state.dims[i] for i in perm), "pure", arr)


# ---------------------------------------------------------------------------
# dense herald through per-bin effective operators
# ---------------------------------------------------------------------------

def _bin_effective_operator(
    strategy: HeraldStrategy,
    b: str,
    d_light: int,
    d_dv: int,
    light_on_arm6: bool,
    d_out: int,
) -> np.ndarray:
    """Effective operator of one bin's detection network on (light, dv)
    inputs: W[(n,k),(n',k')] = <n,k| U† (⊗ POVM diag) U |n',k'> with U the
    four-mode BS3..BS6 network and vacuum on the two silent input ports.
    """
    batch_n = ModeLabel("_batch_n")
    batch_k = ModeLabel("_batch_k")
    m6, m7 = MODE_6[b], MODE_7[b]
    m2 = MODE_2_E if b == "e" else MODE_2_L
    mv = MODE_V[b]
    arr = np.zeros((d_light, d_dv, d_light, 1, d_dv, 1), dtype=complex)
    n_idx = np.arange(d_light)[:, None]
    k_idx = np.arange(d_dv)[None, :]
    arr[n_idx, k_idx, n_idx, 0, k_idx, 0] = 1.0
    modes = (batch_n, batch_k, m6 if light_on_arm6 else m7, m7 if light_on_arm6 else m6, m2, mv)
    reg = FockRegister(modes, arr.shape, "pure", arr)
    for m in (m6, m7, m2, mv):
        reg = reg.pad_mode(m, max(reg.dim(m), d_out))
    for pair in ((m6, m7), (m2, mv), (mv, m7), (m2, m6)):
        u = beam_splitter_matrix(BALANCED, BALANCED, reg.dim(pair[0]), reg.dim(pair[1]))
        reg = apply_operator(reg, u, pair)
    # port -> detector identity: 6->F, 7->C, 2->E, v->D
    port_modes = {"6": m6, "7": m7, "2": m2, "v": mv}
    weights = np.ones(1)
    for port, det in (("6", "F"), ("7", "C"), ("2", "E"), ("v", "D")):
        d_port = reg.dim(port_modes[port])
        el = strategy.assignments.get(ModeLabel(det, b))
        diag = el.diagonal(d_port) if el is not None else np.ones(d_port)
        weights = np.multiply.outer(weights, diag)
    weights = weights.reshape(-1)
    order = [reg.modes.index(m) for m in (batch_n, batch_k, m6, m7, m2, mv)]
    t = np.transpose(reg.array, order).reshape(d_light * d_dv, -1)
    w = (t.conj() * weights[None, :]) @ t.T
    return 0.5 * (w + w.conj().T)


def _dense_run_herald(
    psi7: FockRegister,
    cfg: NetworkConfig,
    strategy: HeraldStrategy,
    dims: _Dims,
    want_state: bool,
    prob_floor: float,
) -> HeraldOutcome:
    d_out = dims.arm + dims.dv - 1
    trim = cfg.policy.source_cutoff(abs(cfg.r_alpha) / math.sqrt(2.0)) + dims.dv
    d_out = min(d_out, max(trim, cfg.policy.detection_cutoff + dims.dv))
    w_e = _bin_effective_operator(strategy, "e", dims.arm, dims.dv, False, d_out)
    w_l = _bin_effective_operator(strategy, "l", dims.arm, dims.dv, True, d_out)
    order = (MODE_B, MODE_A_E, MODE_A_L, MODE_7["e"], MODE_2_E, MODE_6["l"], MODE_2_L)
    perm = [psi7.modes.index(m) for m in order]
    psi = np.transpose(psi7.array, perm)
    we4 = w_e.reshape(dims.arm, dims.dv, dims.arm, dims.dv)
    wl4 = w_l.reshape(dims.arm, dims.dv, dims.arm, dims.dv)
    phi = np.einsum("ECec,Bxyeclm->BxyEClm", we4, psi, optimize=True)
    phi = np.einsum("LMlm,BxyEClm->BxyECLM", wl4, phi, optimize=True)
    prob = float(np.vdot(psi, phi).real)
    diagnostics = {
        "alpha_f": cfg.alpha_f,
        "engine": "dense",
        "strategy": strategy.name,
        "bin_operator_dim": d_out,
    }
    if not want_state:
        return HeraldOutcome(max(prob, 0.0), None, diagnostics)
    if prob < prob_floor:
        raise DegenerateOutcomeError(
            f"heralding probability {prob:.3e} below floor {prob_floor:.1e}"
        )
    rho = np.einsum("BxyECLM,bwzECLM->xyBwzb", phi, psi.conj(), optimize=True)
    k = dims.b * dims.dv * dims.dv
    rho_m = rho.reshape(k, k) / prob
    rho_m = 0.5 * (rho_m + rho_m.conj().T)
    kept = (MODE_A_E, MODE_A_L, MODE_B)
    kdims = (dims.dv, dims.dv, dims.b)
    reg = FockRegister(kept, kdims, "mixed", rho_m.reshape(kdims + kdims))
    return HeraldOutcome(prob, reg, diagnostics)


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def run(
    cfg: NetworkConfig,
    dv_component: str | None = None,
    want_state: bool = True,
    prob_floor: float = PROBABILITY_FLOOR,
) -> HeraldOutcome:
    """Evolve the configured network and apply the heralding strategy.

    Returns the heralded outcome on kept modes {A(e), A(l), B} with
    diagnostics (alpha_f, engine used, branch count where applicable).
    """
    comps = _components(cfg.dv) if dv_component is None else [(dv_component, 1.0)]
    engine = _resolve_engine(cfg, comps)
    strategy = cfg.strategy()
    dims = _Dims.for_config(cfg, comps)
    terms = []
    for name, weight in comps:
        terms.extend(_dv_terms(name, weight if dv_component is None else 1.0))
    if engine == "branch":
        limit = _branch_limit_for(cfg, comps)
        state = _initial_branch(cfg, terms)
        state = _evolve_post_mz_branch(state, cfg, limit)
        state = _detection_network_branch(state, limit)
        keep_dims = {MODE_A_E: dims.dv, MODE_A_L: dims.dv, MODE_B: dims.b}
        outcome = herald(
            state,
            strategy,
            policy=cfg.policy,
            keep_dims=keep_dims,
            prob_floor=prob_floor if want_state else 0.0,
            want_state=want_state,
        )
        outcome.diagnostics.update(
            alpha_f=cfg.alpha_f,
            engine="branch",
            strategy=strategy.name,
            branch_count=len(state.branches),
        )
        return outcome
    psi7 = _evolve_post_mz_dense(_initial_dense(cfg, terms, dims), cfg)
    return _dense_run_herald(psi7, cfg, strategy, dims, want_state, prob_floor)


@dataclass
class ComponentProbabilities:
    """Weights and per-component heralding probabilities, plus their sum."""

    p0: float
    p1: float
    p_eps: float
    prob_vacuum: float
    prob_pair: float
    prob_epsilon: float

    @property
    def total(self) -> float:
        return (
            self.p0 * self.prob_vacuum
            + self.p1 * self.prob_pair
            + self.p_eps * self.prob_epsilon
        )


def heralded_component_probabilities(cfg: NetworkConfig) -> ComponentProbabilities:
    """Run the network separately on each DV source component.

    P' = p0 P(0) + p1 P(1) + p_eps P(eps); the vacuum component heralds with
    zero probability for an ideal cat input and nonzero for squeezed input.
    """
    if cfg.dv.kind == "ideal_pair":
        raise ValueError("component probabilities need a multipair or SPDC DV source")
    w = cfg.dv.weights()
    probs = {}
    for name in ("vacuum", "pair", "epsilon"):
        probs[name] = run(cfg, dv_component=name, want_state=False).probability
    return ComponentProbabilities(
        w.p0, w.p1, w.p_eps, probs["vacuum"], probs["pair"], probs["epsilon"]
    )
