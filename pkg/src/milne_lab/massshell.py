"""Mass-shell algebra for massive collisionless particles.

Particles of unit mass live on the shell ``gbar(pt, pt) = -1`` of the raw
spacetime metric.  In nondimensional variables the spatial momentum ``p``
determines the time component ``p0`` through a quadratic constraint; this
module provides three independent evaluations of that root, the two
classical pointwise estimates relating ``|p|_g`` and ``p0``, and the
momentum and time derivatives of the auxiliary momentum functions that
feed the kinetic-moment evolution identities.

Conventions
-----------
* ``p`` is the nondimensional spatial momentum (contravariant, in the
  same frame as ``geom.g``); the raw momentum is ``pt^a = tau^2 p^a``.
* ``p0`` denotes the nondimensional time component; the raw root is
  ``pt^0 = tau^2 p0`` (the fixed ratio is reported, never hidden).
* ``phat`` is a convenience function with ``phat = sqrt(tau^2 <Xhat,p>^2
  + (1 - |Xhat|^2)(1 + tau^2 |p|^2))``; ``pbar = sqrt(1 + |p|^2_g)`` is
  the order-one Sobolev weight; ``pund = N p0``.
* Time derivatives are taken along paths that hold the *raw* momentum
  fixed (the comoving convention used by the moment identities), so the
  nondimensional ``p`` grows like ``tau^-2`` along the path.
"""

from __future__ import annotations

import numpy as np

from .geometry import LocalGeometry, TimeFrame

__all__ = [
    "SingularShiftError",
    "MomentumPoint",
    "compute_p0",
    "momentum_point",
    "phat",
    "pbar",
    "normalization_report",
    "pointwise_estimates_check",
    "vertical_derivatives",
    "time_derivatives",
]


class SingularShiftError(ValueError):
    """Raised when ``|X/N|_g >= 1`` makes the mass-shell root singular."""


def _dots(geom: LocalGeometry, p: np.ndarray):
    """Common inner products; ``p`` may be shaped (..., 3)."""
    p = np.asarray(p, dtype=float)
    g, X = geom.g, geom.X
    p2 = np.einsum("...a,ab,...b->...", p, g, p)
    Xp = np.einsum("a,ab,...b->...", X, g, p)
    X2 = float(X @ g @ X)
    return p, p2, Xp, X2


def _check_admissible(geom: LocalGeometry) -> float:
    X2 = float(geom.X @ geom.g @ geom.X)
    if not geom.N**2 - X2 > 0.0:
        raise SingularShiftError(
            f"shift dominates lapse: |X|_g^2 = {X2}, N^2 = {geom.N**2}")
    return X2


def phat(geom: LocalGeometry, p: np.ndarray, frame: TimeFrame) -> np.ndarray:
    """Auxiliary momentum function ``phat`` (positive when admissible)."""
    X2 = _check_admissible(geom)
    p, p2, Xp, _ = _dots(geom, p)
    tau, N = frame.tau, geom.N
    Xhat_p = Xp / N
    Xhat2 = X2 / N**2
    return np.sqrt(tau**2 * Xhat_p**2 + (1.0 - Xhat2) * (1.0 + tau**2 * p2))


def pbar(geom: LocalGeometry, p: np.ndarray) -> np.ndarray:
    """Sobolev weight ``sqrt(1 + |p|^2_g)``."""
    _, p2, _, _ = _dots(geom, p)
    return np.sqrt(1.0 + p2)


def compute_p0(geom: LocalGeometry, p: np.ndarray, frame: TimeFrame,
               method: str = "first_principles") -> np.ndarray:
    """Time component of the momentum on the mass shell.

    ``method="first_principles"`` assembles the raw spacetime metric in
    its lapse/shift block form and returns the positive (future-pointing)
    root of ``gbar(pt, pt) = -1`` for the raw momentum -- the
    authoritative definition.  ``"paper_primary"`` and
    ``"paper_alternative"`` evaluate the two closed forms for the
    nondimensional component; they agree with each other identically and
    with ``tau^2 * first_principles`` (see :func:`normalization_report`).
    """
    X2 = _check_admissible(geom)
    p, p2, Xp, _ = _dots(geom, p)
    tau, N = frame.tau, geom.N

    if method == "paper_primary":
        D = N**2 - X2
        return (tau * Xp + np.sqrt(tau**2 * Xp**2 + D * (1.0 + tau**2 * p2))) / D

    if method == "paper_alternative":
        ph = phat(geom, p, frame)
        Xhat_p = Xp / N
        return (1.0 + tau**2 * p2) / (N * (ph - tau * Xhat_p))

    if method == "first_principles":
        # raw blocks: lapse tau^-2 N, spatial metric tau^-2 g, shift tau^-1 X
        Nt = N / tau**2
        Xt = geom.X / tau
        gt = geom.g / tau**2
        pt = tau**2 * p
        Xt_low = gt @ Xt
        a = -Nt**2 + Xt @ Xt_low                       # gbar_00
        b = np.einsum("a,...a->...", Xt_low, pt)       # gbar_0a pt^a
        c = np.einsum("...a,ab,...b->...", pt, gt, pt) + 1.0
        disc = b**2 - a * c
        return (-b - np.sqrt(disc)) / a

    raise ValueError(f"unknown method {method!r}")


class MomentumPoint:
    """Bundle of the derived momentum functions at one (geom, p, frame).

    Attributes: ``p`` (spatial momentum), ``p0`` (nondimensional time
    component), ``phat``, ``pbar = sqrt(1 + |p|^2_g)``, ``pund = N p0``.
    """

    def __init__(self, geom: LocalGeometry, p: np.ndarray, frame: TimeFrame):
        self.geom = geom
        self.frame = frame
        self.p = np.asarray(p, dtype=float)
        self.p0 = compute_p0(geom, p, frame, method="paper_primary")
        self.phat = phat(geom, p, frame)
        self.pbar = pbar(geom, p)
        self.pund = geom.N * self.p0


def momentum_point(geom: LocalGeometry, p: np.ndarray,
                   frame: TimeFrame) -> MomentumPoint:
    return MomentumPoint(geom, p, frame)


def normalization_report(geom: LocalGeometry, p: np.ndarray,
                         frame: TimeFrame) -> dict:
    """Document the fixed normalization ratio between the two roots.

    The raw quadratic root equals ``tau^2`` times the closed-form
    nondimensional component on every admissible input.  The ratio is
    reported so the two conventions are never silently conflated.
    """
    raw = compute_p0(geom, p, frame, method="first_principles")
    closed = compute_p0(geom, p, frame, method="paper_primary")
    ratio = raw / closed
    expected = frame.tau**2
    return {
        "ratio": ratio,
        "expected": expected,
        "consistent": bool(np.all(np.abs(ratio / expected - 1.0) < 1e-10)),
        "note": ("raw mass-shell root = tau^2 * closed-form component; "
                 "agreement holds only after this fixed rescaling"),
    }


def mass_shell_residual(geom: LocalGeometry, p: np.ndarray, p0: np.ndarray,
                        frame: TimeFrame) -> np.ndarray:
    """``gbar(pt, pt) + 1`` for the raw momentum built from ``(p0, p)``.

    ``p0`` is the nondimensional component; the reconstruction uses the
    raw pair ``(tau^2 p0, tau^2 p)``.  Zero on the shell.  The algebra is
    arranged in order-one factors so the residual is cancellation-safe:
    ``residual = -N^2 p0^2 + |tau p + p0 X|^2_g + 1``.
    """
    p = np.asarray(p, dtype=float)
    tau, N, g, X = frame.tau, geom.N, geom.g, geom.X
    v = tau * p + p0[..., None] * X
    v2 = np.einsum("...a,ab,...b->...", v, g, v)
    return -(N * p0) ** 2 + v2 + 1.0


def pointwise_estimates_check(geom: LocalGeometry, p: np.ndarray,
                              frame: TimeFrame) -> dict:
    """Evaluate both classical momentum estimates and report both sides.

    Estimate 1: ``|p|_g / p0 <= 2|X|_g/|tau| + N sqrt(1-|Xhat|^2)/|tau|``.
    Estimate 2: ``p0 <= (1/N)(1-|Xhat|^2)^-1 [2|tau||Xhat||p| +
    sqrt(1-|Xhat|^2) sqrt(1+tau^2|p|^2)]``.
    """
    X2 = _check_admissible(geom)
    p, p2, Xp, _ = _dots(geom, p)
    tau, N = frame.tau, geom.N
    s = abs(tau)
    p0 = compute_p0(geom, p, frame, method="paper_primary")
    Xhat2 = X2 / N**2
    pnorm = np.sqrt(p2)

    lhs1 = pnorm / p0
    rhs1 = 2.0 * np.sqrt(X2) / s + N * np.sqrt(1.0 - Xhat2) / s
    lhs2 = p0
    rhs2 = (1.0 / N) / (1.0 - Xhat2) * (
        2.0 * s * np.sqrt(Xhat2) * pnorm
        + np.sqrt(1.0 - Xhat2) * np.sqrt(1.0 + tau**2 * p2)
    )
    return {
        "lhs1": lhs1, "rhs1": rhs1, "holds1": bool(np.all(lhs1 <= rhs1 * (1 + 1e-13))),
        "lhs2": lhs2, "rhs2": rhs2, "holds2": bool(np.all(lhs2 <= rhs2 * (1 + 1e-13))),
    }


# ---------------------------------------------------------------------------
# momentum (vertical) derivatives
# ---------------------------------------------------------------------------


def vertical_derivatives(geom: LocalGeometry, p: np.ndarray,
                         frame: TimeFrame) -> dict:
    """Momentum derivatives of ``p0`` and the pressure kernel.

    Returns ``{"Be_p0": dp0/dp^e, "Be_eta_kernel": d/dp^e of
    |p + tau^-1 p0 X|^2_g / phat}`` (lower index ``e``).  The kernel
    derivative is assembled by the chain rule from the closed forms of
    ``p0`` and ``phat`` so it matches high-order finite differences.
    """
    X2 = _check_admissible(geom)
    p, p2, Xp, _ = _dots(geom, p)
    tau, N, g, X = frame.tau, geom.N, geom.g, geom.X
    ph = phat(geom, p, frame)
    p0 = compute_p0(geom, p, frame, method="paper_primary")

    p_low = np.einsum("ab,...b->...a", g, p)
    X_low = g @ X
    Xhat_low = X_low / N
    Xhat_p = Xp / N
    Xhat2 = X2 / N**2

    Be_p0 = (tau * Xhat_low * p0[..., None]
             + tau**2 / N * p_low) / ph[..., None]

    # kernel K = |v|^2 / phat with v = p + tau^-1 p0 X
    v = p + (p0 / tau)[..., None] * X
    v_low = np.einsum("ab,...b->...a", g, v)
    v2 = np.einsum("...a,...a->...", v, v_low)
    vX = np.einsum("...a,a->...", v, X_low)
    Be_phat = tau**2 * (Xhat_p[..., None] * Xhat_low
                        + (1.0 - Xhat2) * p_low) / ph[..., None]
    Be_v2 = 2.0 * v_low + (2.0 / tau) * vX[..., None] * Be_p0
    Be_kernel = Be_v2 / ph[..., None] - (v2 / ph**2)[..., None] * Be_phat

    return {"Be_p0": Be_p0, "Be_eta_kernel": Be_kernel}


# ---------------------------------------------------------------------------
# time derivatives (comoving: raw momentum held fixed)
# ---------------------------------------------------------------------------


def time_derivatives(geom: LocalGeometry, p: np.ndarray, frame: TimeFrame,
                     dTg: np.ndarray, dTN: float, dTX: np.ndarray) -> dict:
    """Logarithmic-time derivatives of ``phat`` and ``p0``.

    The derivative is taken along a path of ``(g, N, X, tau)`` holding
    the *raw* momentum fixed, so the nondimensional ``p`` carries an
    implicit ``tau^-2`` growth; this is the convention under which the
    kinetic-moment integrals have a time-independent integration
    variable.
    """
    X2 = _check_admissible(geom)
    p, p2, Xp, _ = _dots(geom, p)
    tau, N, g, X = frame.tau, geom.N, geom.g, geom.X
    dTg = np.asarray(dTg, dtype=float)
    dTX = np.asarray(dTX, dtype=float)
    dTN = float(dTN)

    ph = phat(geom, p, frame)
    p0 = compute_p0(geom, p, frame, method="paper_primary")

    Xhat = X / N
    Xhat_p = Xp / N
    Xhat2 = X2 / N**2
    Xhat_p_dot = np.einsum("a,ab,...b->...", Xhat, dTg, p)
    Xhat2_dot = float(Xhat @ dTg @ Xhat)
    pp_dotg = np.einsum("...a,ab,...b->...", p, dTg, p)
    aux = dTX - dTN * Xhat  # appears contracted against p and Xhat
    p_aux = np.einsum("...a,ab,b->...", p, g, aux)
    Xhat_aux = float(Xhat @ g @ aux)

    dT_phat = (1.0 / (2.0 * ph)) * (
        2.0 * tau**2 * Xhat_p**2
        + 2.0 * tau**2 * Xhat_p * (Xhat_p_dot + p_aux / N)
        - (1.0 + tau**2 * p2) * (Xhat2_dot + 2.0 * Xhat_aux / N)
        + tau**2 * (1.0 - Xhat2) * (2.0 * p2 + pp_dotg)
    )

    dT_NX2 = -2.0 * N * dTN + float(X @ dTg @ X) + 2.0 * float((g @ X) @ dTX)
    p_dTX = np.einsum("...a,ab,b->...", p, g, dTX)
    Xp_dotg = np.einsum("a,ab,...b->...", X, dTg, p)
    # derived by implicit differentiation of the mass-shell quadratic at
    # fixed raw momentum; includes the metric-shift cross term
    # 2 tau p0 <X, p>_dTg that a naive term collection drops
    dT_p0 = 2.0 * p0 + (1.0 / (2.0 * N * ph)) * (
        4.0 * p0**2 * (-(N**2) + X2)
        + 6.0 * p0 * tau * Xp
        + 2.0 * tau**2 * p2
        + p0**2 * dT_NX2
        + 2.0 * tau * p0 * p_dTX
        + 2.0 * tau * p0 * Xp_dotg
        + tau**2 * pp_dotg
    )
    return {"dT_phat": dT_phat, "dT_p0": dT_p0}
