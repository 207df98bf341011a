"""Input-state builders for the CV and DV arms.

CV side: even Schrödinger cat (|a> + |-a>)/N with N = sqrt(2) sqrt(1+e^{-2a^2}),
or a squeezed vacuum approximating a small cat.  DV side: the ideal time-bin
entangled pair, or its realistic replacement with vacuum and multipair
weights (SPDC weights p_k = (1-lam2) lam2^k combined over the two bins,
truncated at two photons per spatial mode).

All amplitudes are real nonnegative by convention; the relative minus sign
of the target state arises from the network, not the sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branch_engine import Branch, BranchState
from .fock_dense import ModeLabel, TruncationError, coherent_state

__all__ = [
    "DVSourceSpec",
    "CVSourceSpec",
    "cat_plus",
    "cat_norm",
    "squeezed_vacuum",
    "timebin_pair",
    "spdc_multipair",
    "MultipairWeights",
]


@dataclass(frozen=True)
class CVSourceSpec:
    """kind: 'cat_plus' (amplitude alpha >= 0) or 'squeezed_vacuum' (real zeta)."""

    kind: str
    alpha: float = 0.0
    zeta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cat_plus", "squeezed_vacuum"):
            raise ValueError(f"unknown CV source {self.kind!r}")
        if self.kind == "cat_plus" and self.alpha < 0:
            raise ValueError("cat amplitude is fixed real nonnegative")


@dataclass(frozen=True)
class DVSourceSpec:
    """kind: 'ideal_pair', 'truncated_multipair' (explicit weights) or 'spdc'."""

    kind: str
    p0: float = 0.0
    p1: float = 1.0
    p_eps: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ideal_pair", "truncated_multipair", "spdc"):
            raise ValueError(f"unknown DV source {self.kind!r}")
        if self.kind == "truncated_multipair":
            if min(self.p0, self.p1, self.p_eps) < 0:
                raise ValueError("multipair weights must be nonnegative")
            if abs(self.p0 + self.p1 + self.p_eps - 1.0) > 1e-12:
                raise ValueError("multipair weights must sum to 1")
        if self.kind == "spdc" and not 0.0 <= self.lam2 < 1.0:
            raise ValueError("SPDC excitation parameter must lie in [0, 1)")

    def weights(self) -> "MultipairWeights":
        if self.kind == "ideal_pair":
            return MultipairWeights(0.0, 1.0, 0.0)
        if self.kind == "truncated_multipair":
            return MultipairWeights(self.p0, self.p1, self.p_eps)
        p0, p1, p2, _ = spdc_multipair(self.lam2)
        return MultipairWeights(p0, p1, p2)


@dataclass(frozen=True)
class MultipairWeights:
    p0: float
    p1: float
    p_eps: float


def cat_norm(alpha: float) -> float:
    """N = sqrt(2) sqrt(1 + e^{-2 alpha^2})."""
    return math.sqrt(2.0) * math.sqrt(1.0 + math.exp(-2.0 * alpha * alpha))


def cat_plus(alpha: float, cutoff: int, eps_trunc: float | None = None) -> np.ndarray:
    """(|alpha> + |-alpha>)/N; odd Fock amplitudes cancel exactly."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    amps = coherent_state(alpha, cutoff) + coherent_state(-alpha, cutoff)
    amps = amps / cat_norm(alpha)
    if eps_trunc is not None:
        deficit = 1.0 - float(np.vdot(amps, amps).real)
        if deficit > eps_trunc:
            raise TruncationError(
                f"cat cutoff {cutoff} leaves norm deficit {deficit:.3e}", deficit=deficit
            )
    return amps


def cat_branches(alpha: float) -> list[tuple[complex, complex]]:
    """(coefficient, displacement) pairs of the two cat branches."""
    n = cat_norm(alpha)
    return [(1.0 / n, complex(alpha)), (1.0 / n, complex(-alpha))]


def squeezed_vacuum(zeta: float, cutoff: int, eps_trunc: float | None = None) -> np.ndarray:
    """S(zeta)|0> amplitudes: c_{2m} = (-tanh z)^m sqrt((2m)!)/(2^m m!) / sqrt(cosh z)."""
    if abs(zeta) > 1.5:
        raise ValueError("squeezing parameter outside the truncation-validated range |zeta|<=1.5")
    amps = np.zeros(cutoff + 1, dtype=complex)
    th = math.tanh(zeta)
    for m in range(cutoff // 2 + 1):
        logmag = 0.5 * math.lgamma(2 * m + 1) - m * math.log(2.0) - math.lgamma(m + 1)
        amps[2 * m] = ((-th) ** m) * math.exp(logmag)
    amps /= math.sqrt(math.cosh(zeta))
    if eps_trunc is not None:
        deficit = 1.0 - float(np.vdot(amps, amps).real)
        if deficit > eps_trunc:
            raise TruncationError(
                f"squeezed cutoff {cutoff} leaves norm deficit {deficit:.3e}", deficit=deficit
            )
    return amps


def timebin_pair(modes_1e, modes_1l, modes_2e, modes_2l):
    """Branch terms of (|1>_{1,e}|1>_{2,e} + |1>_{1,l}|1>_{2,l}) / sqrt(2).

    Returned as (coefficient, {mode: excitation}) pairs for the branch
    engine; the dense builders expand the same terms.
    """
    c = 1.0 / math.sqrt(2.0)
    return [
        (c, {modes_1e: 1, modes_2e: 1}),
        (c, {modes_1l: 1, modes_2l: 1}),
    ]


def epsilon_terms(modes_1e, modes_1l, modes_2e, modes_2l):
    """The normalized two-photon component of the SPDC pair source:

        (|2,2>_e + |2,2>_l + |1,1,1,1>) / sqrt(3)

    as (coefficient, {mode: excitation}) monomials; |2> = (a†)^2/sqrt(2) |0>,
    so the double-pair terms carry 1/2 against their creation monomials.
    """
    c = 1.0 / math.sqrt(3.0)
    return [
        (c / 2.0, {modes_1e: 2, modes_2e: 2}),
        (c / 2.0, {modes_1l: 2, modes_2l: 2}),
        (c, {modes_1e: 1, modes_1l: 1, modes_2e: 1, modes_2l: 1}),
    ]


def spdc_multipair(lam2: float):
    """SPDC weights for the combined early+late source, cut at two photons
    per spatial mode:

        p0 = (1-lam2)^2,  p1 = 2 (1-lam2)^2 lam2,  p2 = 3 (1-lam2)^2 lam2^2

    plus a description of the normalized two-photon state (empty at lam2=0,
    where the component is undefined).
    """
    if not 0.0 <= lam2 < 1.0:
        raise ValueError("lam2 must lie in [0, 1)")
    one = 1.0 - lam2
    p0 = one * one
    p1 = 2.0 * one * one * lam2
    p2 = 3.0 * one * one * lam2 * lam2
    eps_desc = () if lam2 == 0.0 else (
        ("2e2e", 1.0 / math.sqrt(3.0)),
        ("2l2l", 1.0 / math.sqrt(3.0)),
        ("1111", 1.0 / math.sqrt(3.0)),
    )
    return p0, p1, p2, eps_desc


def combine_two_bin_sources(p_m: list[float]):
    """Combination rule for two identical per-bin sources with weights p_k^m:

        p0 = (p0^m)^2,  p1 = 2 p0^m p1^m,  p2 = 2 p0^m p2^m + (p1^m)^2.
    """
    p0m, p1m, p2m = p_m[0], p_m[1], p_m[2]
    return p0m * p0m, 2.0 * p0m * p1m, 2.0 * p0m * p2m + p1m * p1m


def make_branch_monomial(modes, coeff, excitations: dict) -> Branch:
    disp = (0.0 + 0.0j,) * len(modes)
    exc = tuple(excitations.get(m, 0) for m in modes)
    return Branch(complex(coeff), disp, exc)
