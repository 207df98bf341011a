"""Closed-form library for every quantitative result of the scheme; the
cross-check counterpart of the engines.

Notation: x = |r alpha| is the tapped amplitude, alpha the CV input size,
eta the on-off detector efficiency, alpha_f = t alpha the heralded CV
amplitude.  Each function mirrors one closed form; the engines recompute
the same numbers from the network and the test suite holds the two routes
together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OperatingPoint",
    "p_ideal",
    "p1",
    "fidelity1",
    "p2",
    "fidelity_multipair",
    "ratio_spdc",
    "p0_squeezed",
    "P0NonConvergence",
    "fidelity_squeezed",
    "p1_window",
    "optimal_lambda2",
    "optimal_zeta",
    "remote_fidelity",
    "loss_density_matrices",
    "CVLossRecord",
    "DVLossRecord",
]


@dataclass(frozen=True)
class OperatingPoint:
    """Scalar parameters of one configuration; t = sqrt(1-r^2), alpha_f = t alpha."""

    alpha: float
    r: float
    eta: float = 1.0
    zeta: float | None = None
    lam2: float | None = None
    z_km: float | None = None

    @property
    def t(self) -> float:
        return math.sqrt(1.0 - self.r * self.r)

    @property
    def alpha_f(self) -> float:
        return self.t * self.alpha

    @property
    def r_alpha(self) -> float:
        return self.r * self.alpha


def _cat_denominator(alpha: float) -> float:
    return 1.0 + math.exp(-2.0 * alpha * alpha)


def p_ideal(pt: OperatingPoint) -> float:
    """Heralding probability of the photon-number-resolving strategy:

        P = (1/16) x^2 e^{-2x^2} / (1 + e^{-2 alpha^2}),  x = |r alpha|.
    """
    x2 = pt.r_alpha * pt.r_alpha
    return (x2 * math.exp(-2.0 * x2) / 16.0) / _cat_denominator(pt.alpha)


def p1(pt: OperatingPoint) -> float:
    """On-off heralding probability:

        P1 = (eta/8) (1 - e^{-eta x^2 / 2}) / (1 + e^{-2 alpha^2}).
    """
    x2 = pt.r_alpha * pt.r_alpha
    return (pt.eta / 8.0) * (-math.expm1(-pt.eta * x2 / 2.0)) / _cat_denominator(pt.alpha)


def _offdiag_coefficient(x2: float, eta: float) -> float:
    """eta (x^2/2) e^{-2x^2} / (1 - e^{-eta x^2/2}); -> 1 as x -> 0."""
    if x2 == 0.0:
        return 1.0
    return eta * (x2 / 2.0) * math.exp(-2.0 * x2) / (-math.expm1(-eta * x2 / 2.0))


def fidelity1(pt: OperatingPoint) -> float:
    """Fidelity of the on-off heralded state to the target:

        F1 = (1/2) [1 + eta (x^2/2) e^{-2x^2} / (1 - e^{-eta x^2/2})].
    """
    return 0.5 * (1.0 + _offdiag_coefficient(pt.r_alpha * pt.r_alpha, pt.eta))


def p2(pt: OperatingPoint) -> float:
    """Double-pair heralding probability:

        P2 = (eta/48) [12 - eta - (12 - 2 eta + (eta^2/2) x^2) e^{-eta x^2/2}
                       + eta e^{-2 alpha^2}] / (1 + e^{-2 alpha^2});

    P2 -> eta^2/48 as x -> 0.
    """
    eta = pt.eta
    x2 = pt.r_alpha * pt.r_alpha
    e_det = math.exp(-pt.eta * x2 / 2.0)
    e_cat = math.exp(-2.0 * pt.alpha * pt.alpha)
    num = 12.0 - eta - (12.0 - 2.0 * eta + 0.5 * eta * eta * x2) * e_det + eta * e_cat
    return (eta / 48.0) * num / (1.0 + e_cat)


# ---------------------------------------------------------------------------
# realistic DV input
# ---------------------------------------------------------------------------

def _spdc_weights(lam2: float):
    one = 1.0 - lam2
    return one * one, 2.0 * one * one * lam2, 3.0 * one * one * lam2 * lam2


def fidelity_multipair(pt: OperatingPoint) -> float:
    """F' = F1 / (1 + p_eps P(eps) / (p1 P1)) with P(eps) = P2 and SPDC weights."""
    if pt.lam2 is None:
        raise ValueError("fidelity_multipair needs lam2")
    _, w1, w2 = _spdc_weights(pt.lam2)
    pp1 = w1 * p1(pt)
    if pp1 <= 0.0:
        raise ZeroDivisionError("p1 P1 underflowed; the multipair ratio is undefined")
    ratio = w2 * p2(pt) / pp1
    return fidelity1(pt) / (1.0 + ratio)


def ratio_spdc(pt: OperatingPoint) -> float:
    """Small-x asymptote of p2 P2 / (p1 P1) for the SPDC source: lam2 / x^2."""
    if pt.lam2 is None:
        raise ValueError("ratio_spdc needs lam2")
    x2 = pt.r_alpha * pt.r_alpha
    if x2 == 0.0:
        raise ZeroDivisionError("asymptotic ratio diverges at r alpha = 0")
    return pt.lam2 / x2


# ---------------------------------------------------------------------------
# squeezed CV input: the vacuum-DV heralding probability series
# ---------------------------------------------------------------------------

class P0NonConvergence(RuntimeError):
    """Tail bound not certified within the configured summation range."""


def hyp2f1_terminating(k: int, x: int, c: float, w: float = -1.0) -> float:
    """2F1(-k, -x; c; w) as its terminating polynomial (k, x >= 0 integers)."""
    total = 1.0
    term = 1.0
    for n in range(min(k, x)):
        term *= (-(k - n)) * (-(x - n)) / ((c + n) * (n + 1.0)) * w
        total += term
    return total


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


def c_klx(k: int, l: int, x: int) -> float:
    """Balanced beam-splitter coefficient C_{k,l,x} (two terminating forms
    that agree on the overlap x = l)."""
    if x < 0 or x > k + l:
        return 0.0
    if x <= l:
        pref = math.exp(0.5 * (_log_binom(k + l - x, k) + _log_binom(l, x)))
        return pref * hyp2f1_terminating(k, x, l - x + 1.0)
    pref = math.exp(0.5 * (_log_binom(x, l) + _log_binom(k, x - l)))
    return ((-1.0) ** (x - l)) * pref * hyp2f1_terminating(l, k + l - x, x - l + 1.0)


def p0_squeezed(
    zeta: float,
    r: float,
    alpha: float,
    eta: float,
    tol: float = 1e-14,
    y_max: int = 200,
) -> float:
    """Probability of a (false) herald with squeezed-vacuum CV input and no
    photon from the DV side, as a triple sum over the total photon number y,
    the number z sent to the detection arms and the arm split q:

        P0 = e^{-x^2}/cosh(zeta) * sum_y sum_{z<=y} sum_{q<=z}
             [1-(1-eta/4)^{z-q}] [1-(1-eta/4)^q] |A(y,z,q)|^2

    with the interference amplitude A summed over the photons k4 the
    coherent injection contributes (k4 = y mod 2).  The outer sum stops once
    five consecutive y-terms decay monotonically and their geometric tail
    bound drops below tol (certifying total error < 10 tol).
    """
    if abs(zeta) > 1.5:
        raise ValueError("|zeta| <= 1.5 is the truncation-validated range")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    t = math.sqrt(1.0 - r * r)
    x = abs(r * alpha)
    half_tanh = -math.tanh(zeta) / 2.0
    pref = math.exp(-x * x) / math.cosh(zeta)
    loss = 1.0 - eta / 4.0

    total = 0.0
    decays = 0
    pair_sum = 0.0
    prev_pair = None
    for y in range(y_max + 1):
        term_y = 0.0
        for z in range(y + 1):
            amps = np.zeros(z + 1)
            for k4 in range(y % 2, z + 1, 2):
                m = (y - k4) // 2
                logmag = (
                    (y - z) * _safe_log(t)
                    + (z - k4) * _safe_log(r)
                    + 0.5 * _log_binom(y - k4, z - k4)
                    + k4 * _safe_log(x)
                    - 0.5 * math.lgamma(k4 + 1.0)
                    + 0.5 * _log_binom(y - k4, m)
                    - 0.5 * z * math.log(2.0)
                )
                if logmag == -math.inf:
                    continue
                mag = math.exp(logmag) * (half_tanh ** m)
                for q in range(z + 1):
                    amps[q] += mag * c_klx(k4, z - k4, q)
            for q in range(z + 1):
                w = (1.0 - loss ** (z - q)) * (1.0 - loss ** q)
                term_y += w * amps[q] * amps[q]
        total += term_y
        pair_sum += term_y
        if y % 2 == 0:
            continue
        # certify on parity-pair sums: even/odd terms carry different
        # powers of x and tanh(zeta), so raw terms need not be monotone
        if pair_sum == 0.0:
            if total == 0.0 and y >= 11:
                return 0.0
            if total > 0.0:
                return pref * total  # remaining terms underflowed to zero
        if prev_pair is not None and 0.0 < pair_sum < prev_pair:
            decays += 1
            ratio = pair_sum / prev_pair
            if decays >= 5 and pair_sum * ratio / (1.0 - ratio) < tol:
                return pref * total
        elif pair_sum > 0.0:
            decays = 0
        prev_pair = pair_sum if pair_sum > 0.0 else prev_pair
        pair_sum = 0.0
    raise P0NonConvergence(
        f"no certified tail bound below {tol:.1e} within y <= {y_max}"
    )


def _safe_log(v: float) -> float:
    return math.log(v) if v > 0.0 else -math.inf


def fidelity_squeezed(pt: OperatingPoint, p0_value: float | None = None) -> float:
    """F'_s = F1 / (1 + p0 P0/(p1 P1) + p_eps P(eps)/(p1 P1)), SPDC weights."""
    if pt.lam2 is None or pt.zeta is None:
        raise ValueError("fidelity_squeezed needs lam2 and zeta")
    w0, w1, w2 = _spdc_weights(pt.lam2)
    if p0_value is None:
        p0_value = p0_squeezed(pt.zeta, pt.r, pt.alpha, pt.eta)
    pp1 = w1 * p1(pt)
    if pp1 <= 0.0:
        raise ZeroDivisionError("p1 P1 underflowed; the fidelity ratio is undefined")
    return fidelity1(pt) / (1.0 + w0 * p0_value / pp1 + w2 * p2(pt) / pp1)


def herald_prob_squeezed(pt: OperatingPoint, p0_value: float | None = None) -> float:
    """P'_s = p0 P0 + p1 P1 + p_eps P(eps)."""
    if pt.lam2 is None or pt.zeta is None:
        raise ValueError("herald_prob_squeezed needs lam2 and zeta")
    w0, w1, w2 = _spdc_weights(pt.lam2)
    if p0_value is None:
        p0_value = p0_squeezed(pt.zeta, pt.r, pt.alpha, pt.eta)
    return w0 * p0_value + w1 * p1(pt) + w2 * p2(pt)


def p1_window(pt: OperatingPoint) -> tuple[float, float]:
    """Single-pair weight window (|x|^6 / r^4, |x|^2) inside which the
    squeezed-input fidelity optimum lives; flagged empty if lower >= upper.
    """
    x2 = pt.r_alpha * pt.r_alpha
    lower = x2 ** 3 / pt.r ** 4
    upper = x2
    if lower >= upper:
        raise ValueError(f"empty p1 window: ({lower:.3e}, {upper:.3e})")
    return lower, upper


def optimal_lambda2(pt: OperatingPoint, p0_value: float | None = None) -> tuple[float, float]:
    """Maximize F'_s over lam2; returns (lam2*, F'_s*).

    With ratios A/lam2 + B lam2 in the denominator the optimum sits at
    lam2* = sqrt(A/B); a log grid search plus the closed form agree.
    """
    if pt.zeta is None:
        raise ValueError("optimal_lambda2 needs zeta")
    if p0_value is None:
        p0_value = p0_squeezed(pt.zeta, pt.r, pt.alpha, pt.eta)
    pp1 = p1(pt)
    a = p0_value / (2.0 * pp1)
    b = 1.5 * p2(pt) / pp1
    lam2_star = math.sqrt(a / b)
    f_star = fidelity_squeezed(
        OperatingPoint(pt.alpha, pt.r, pt.eta, pt.zeta, lam2_star), p0_value
    )
    return lam2_star, f_star


def optimal_zeta(
    r: float, alpha: float, eta: float, lo: float = -0.5, hi: float = 0.0, tol: float = 1e-6
) -> tuple[float, float]:
    """Minimize P0 over the squeezing parameter by golden-section search."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc = p0_squeezed(c, r, alpha, eta)
    fd = p0_squeezed(d, r, alpha, eta)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = p0_squeezed(c, r, alpha, eta)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = p0_squeezed(d, r, alpha, eta)
    z = 0.5 * (a + b)
    return z, p0_squeezed(z, r, alpha, eta)


# ---------------------------------------------------------------------------
# long-distance behaviour
# ---------------------------------------------------------------------------

DB_PER_KM_DEFAULT = 0.2


def remote_fidelity(
    encoding: str,
    z_km: float,
    alpha_f: float,
    lc_km: float | None = None,
    beta_db_per_km: float = DB_PER_KM_DEFAULT,
) -> float:
    """Fidelity of the remotely prepared odd-cat CV state after the DV part
    travelled z km.

    time-bin:    1 at every distance.
    polarization: 1/2 + (E - s)/(2 (1 - E s)), E = e^{-z/L_C}, s = e^{-2 a^2}.
    single-rail: 1/2 + (T - s)/(2 (1 - T s)),  T = e^{-beta z/2} (amplitude),
                 beta the linear fiber absorption from the dB/km figure.
    """
    if z_km < 0.0:
        raise ValueError("distance must be >= 0")
    s = math.exp(-2.0 * alpha_f * alpha_f)
    if encoding == "timebin":
        return 1.0
    if encoding == "polarization":
        if lc_km is None:
            raise ValueError("polarization fidelity needs the correlation length lc_km")
        e = math.exp(-z_km / lc_km)
        return 0.5 + (e - s) / (2.0 * (1.0 - e * s))
    if encoding == "singlerail":
        beta_lin = beta_db_per_km * math.log(10.0) / 10.0
        t_amp = math.exp(-0.5 * beta_lin * z_km)
        return 0.5 + (t_amp - s) / (2.0 * (1.0 - t_amp * s))
    raise ValueError(f"unknown encoding {encoding!r}")


@dataclass(frozen=True)
class CVLossRecord:
    """Closed-form coefficients of the state after CV-side loss: diagonal
    weights 1/2 each, off-diagonal factor e^{-2 |r_cv alpha_f|^2}, and the
    reduced coherent amplitude sqrt(1 - r_cv^2) alpha_f."""

    diagonal_weight: float
    offdiag_factor: float
    reduced_amplitude: float


@dataclass(frozen=True)
class DVLossRecord:
    """Closed-form weights after DV-side loss: t_dv^2 on the intact state,
    r_dv^2 on the vacuum-DV mixture of |±alpha_f>."""

    kept_weight: float
    vacuum_weight: float
    amplitude: float


def loss_density_matrices(alpha_f: float, r_cv: float | None = None, r_dv: float | None = None):
    """Coefficient records of the lossy density matrices, for comparison
    against channel-evolved dense states."""
    records = {}
    if r_cv is not None:
        if not 0.0 <= r_cv <= 1.0:
            raise ValueError("r_cv out of range")
        t_cv = math.sqrt(1.0 - r_cv * r_cv)
        records["cv"] = CVLossRecord(
            diagonal_weight=0.5,
            offdiag_factor=math.exp(-2.0 * (r_cv * alpha_f) ** 2),
            reduced_amplitude=t_cv * alpha_f,
        )
    if r_dv is not None:
        if not 0.0 <= r_dv <= 1.0:
            raise ValueError("r_dv out of range")
        records["dv"] = DVLossRecord(
            kept_weight=1.0 - r_dv * r_dv,
            vacuum_weight=r_dv * r_dv,
            amplitude=alpha_f,
        )
    return records
