"""Constructors for optical elements and channels used by both engines.

Unitary elements (beam splitter, displacement, squeeze) follow one
exponentiation path: build the generator in the truncated Fock basis and
expm it.  Channels (loss, depolarization) act on density matrices; loss is
literally a beam splitter coupling to a vacuum ancilla followed by a partial
trace, depolarization is the closed-form two-term Gaussian angle average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock_dense import (
    FockRegister,
    ModeLabel,
    apply_operator,
    beam_splitter_matrix,
    displacement_matrix,
    partial_trace,
    squeeze_matrix,
)

__all__ = [
    "ElementSpec",
    "beam_splitter",
    "displacement",
    "squeeze",
    "loss_channel",
    "depolarize_channel",
    "apply_element",
    "apply_loss",
    "apply_depolarization",
    "transmission_at_km",
]

#: fiber attenuation used throughout, dB per km (intensity)
FIBER_DB_PER_KM = 0.2


@dataclass(frozen=True)
class ElementSpec:
    """One optical element or channel, with its parameters.

    kind: beam_splitter(r, t) | displacement(beta) | squeeze(zeta)
          | loss(T) | depolarize(z, lc)
    """

    kind: str
    params: tuple
    targets: tuple[ModeLabel, ...] = ()

    def on(self, *targets: ModeLabel) -> "ElementSpec":
        return ElementSpec(self.kind, self.params, tuple(targets))


def beam_splitter(r: float, t: float) -> ElementSpec:
    if abs(r * r + t * t - 1.0) > 1e-12:
        raise ValueError(f"beam splitter violates r^2+t^2=1: got {r * r + t * t!r}")
    return ElementSpec("beam_splitter", (float(r), float(t)))


def displacement(beta: complex) -> ElementSpec:
    return ElementSpec("displacement", (complex(beta),))


def squeeze(zeta: float) -> ElementSpec:
    if isinstance(zeta, complex) and zeta.imag != 0.0:
        raise ValueError("only real squeezing parameters are supported")
    return ElementSpec("squeeze", (float(zeta),))


def loss_channel(transmission: float) -> ElementSpec:
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"loss transmission must lie in [0, 1], got {transmission}")
    return ElementSpec("loss", (float(transmission),))


def depolarize_channel(z_km: float, lc_km: float) -> ElementSpec:
    """Polarization scrambling over z km of fiber with correlation length L_C."""
    if z_km < 0.0:
        raise ValueError("propagation distance must be >= 0")
    if lc_km <= 0.0:
        raise ValueError("correlation length must be > 0")
    return ElementSpec("depolarize", (float(z_km), float(lc_km)))


def transmission_at_km(z_km: float, beta_db_per_km: float = FIBER_DB_PER_KM) -> float:
    """Beer-Lambert intensity transmission 10^(-beta z / 10); T(0) = 1 exactly."""
    if z_km == 0.0:
        return 1.0
    return 10.0 ** (-(beta_db_per_km * z_km) / 10.0)


# ---------------------------------------------------------------------------
# dense application
# ---------------------------------------------------------------------------

def apply_element(state: FockRegister, spec: ElementSpec, targets=None) -> FockRegister:
    """Apply an element to a dense register on the given (or spec's) targets."""
    targets = tuple(targets) if targets is not None else spec.targets
    if spec.kind == "beam_splitter":
        r, t = spec.params
        m1, m2 = targets
        u = beam_splitter_matrix(r, t, state.dim(m1), state.dim(m2))
        return apply_operator(state, u, (m1, m2))
    if spec.kind == "displacement":
        (beta,) = spec.params
        (m,) = targets
        return apply_operator(state, displacement_matrix(beta, state.dim(m)), (m,))
    if spec.kind == "squeeze":
        (zeta,) = spec.params
        (m,) = targets
        return apply_operator(state, squeeze_matrix(zeta, state.dim(m)), (m,))
    if spec.kind == "loss":
        (m,) = targets
        return apply_loss(state, m, spec.params[0])
    if spec.kind == "depolarize":
        z, lc = spec.params
        mh, mv = targets
        return apply_depolarization(state, mh, mv, z, lc)
    raise ValueError(f"unknown element kind {spec.kind!r}")


def apply_loss(state: FockRegister, mode: ModeLabel, transmission: float) -> FockRegister:
    """Couple ``mode`` to a vacuum ancilla through an unbalanced beam
    splitter of amplitude transmission sqrt(T), then trace out the ancilla.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError("transmission out of range")
    anc = ModeLabel("_loss_ancilla")
    d = state.dim(mode)
    work = state
    if work.kind == "mixed":
        # attach the ancilla on both sides by promoting through a product
        vac = np.zeros((d, d), dtype=complex)
        vac[0, 0] = 1.0
        arr = np.tensordot(work.array, vac, axes=0)
        n = len(work.dims)
        # ordering: ket..., bra..., anc_ket, anc_bra -> ket...+anc, bra...+anc
        arr = np.moveaxis(arr, 2 * n, n)
        work = FockRegister(work.modes + (anc,), work.dims + (d,), "mixed", arr)
    else:
        work = work.with_modes((anc,), (d,))
    t_amp = math.sqrt(transmission)
    r_amp = math.sqrt(max(0.0, 1.0 - transmission))
    u = beam_splitter_matrix(r_amp, t_amp, d, d)
    work = apply_operator(work, u, (mode, anc))
    return partial_trace(work, [m for m in work.modes if m != anc])


def _rotation_matrix(theta: float, dim_h: int, dim_v: int) -> np.ndarray:
    # active map [[cos, -sin], [sin, cos]] on (H, V): a BS with t=cos, r=sin
    return beam_splitter_matrix(math.sin(theta), math.cos(theta), dim_h, dim_v)


def apply_depolarization(
    state: FockRegister, mode_h: ModeLabel, mode_v: ModeLabel, z_km: float, lc_km: float
) -> FockRegister:
    """Gaussian average of polarization rotations, in closed form.

    With sigma^2 = 2/L_C and theta ~ N(0, sigma^2 z) the average of
    R(theta) rho R(theta)† is

        (1 + e^{-2 sigma^2 z})/2 * rho
          + (1 - e^{-2 sigma^2 z})/2 * R(-pi/2) rho R(-pi/2)†.
    """
    rho = state.to_mixed()
    sigma2 = 2.0 / lc_km
    decay = math.exp(-2.0 * sigma2 * z_km)
    w_keep = 0.5 * (1.0 + decay)
    w_flip = 0.5 * (1.0 - decay)
    if z_km == 0.0:
        return rho
    flip = apply_operator(
        rho, _rotation_matrix(-math.pi / 2.0, rho.dim(mode_h), rho.dim(mode_v)), (mode_h, mode_v)
    )
    return FockRegister(rho.modes, rho.dims, "mixed", w_keep * rho.array + w_flip * flip.array)


def depolarization_monte_carlo(
    state: FockRegister,
    mode_h: ModeLabel,
    mode_v: ModeLabel,
    z_km: float,
    lc_km: float,
    samples: int,
    seed: int = 0,
) -> FockRegister:
    """Monte-Carlo theta-average of the polarization rotation (test oracle).

    Samples theta ~ N(0, (2/L_C) z) and averages R(theta) rho R(theta)†
    through the mean of R(theta) ⊗ R(theta)* applied to the vectorized
    two-mode factor.
    """
    rho = state.to_mixed()
    rng = np.random.default_rng(seed)
    sigma = math.sqrt((2.0 / lc_km) * z_km)
    thetas = rng.normal(0.0, sigma, size=samples)
    dh, dv = rho.dim(mode_h), rho.dim(mode_v)
    d = dh * dv
    if dh == dv == 2:
        # On the polarization qubit the truncated rotation is exactly
        # R(theta) = P0 + cos(theta) P1 + sin(theta) P2 (the |11> corner is
        # frozen by the cutoff), so the sample mean of R ⊗ R* is a function
        # of the trigonometric sample moments; same estimator, vectorized.
        p0 = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
        p1 = np.diag([0.0, 1.0, 1.0, 0.0]).astype(complex)
        p2 = np.zeros((4, 4), dtype=complex)
        p2[2, 1] = -1.0  # |10><01| gets -sin
        p2[1, 2] = 1.0  # |01><10| gets +sin
        c, s = np.cos(thetas), np.sin(thetas)
        mats = (p0, p1, p2)
        moments = {
            (0, 0): 1.0,
            (0, 1): c.mean(), (1, 0): c.mean(),
            (0, 2): s.mean(), (2, 0): s.mean(),
            (1, 1): (c * c).mean(),
            (1, 2): (c * s).mean(), (2, 1): (c * s).mean(),
            (2, 2): (s * s).mean(),
        }
        kernel = np.zeros((d * d, d * d), dtype=complex)
        for (i, j), w in moments.items():
            kernel += w * np.kron(mats[i], mats[j].conj())
    else:
        kernel = np.zeros((d * d, d * d), dtype=complex)
        for theta in thetas:
            rmat = _rotation_matrix(float(theta), dh, dv)
            kernel += np.kron(rmat, rmat.conj())
        kernel /= samples

    ax_h, ax_v = rho.axis(mode_h), rho.axis(mode_v)
    n = len(rho.dims)
    arr = np.moveaxis(rho.array, (ax_h, ax_v, ax_h + n, ax_v + n), (0, 1, 2, 3))
    rest = arr.shape[4:]
    arr = arr.reshape(d * d, -1)
    arr = kernel @ arr
    arr = arr.reshape((dh, dv, dh, dv) + rest)
    arr = np.moveaxis(arr, (0, 1, 2, 3), (ax_h, ax_v, ax_h + n, ax_v + n))
    return FockRegister(rho.modes, rho.dims, "mixed", arr)
