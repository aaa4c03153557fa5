"""Free energy of the pinning model and the derived scaling constants.

The free energy ``phi(delta, T)`` is the unique solution of

    passage_transform(T, phi) = exp(-delta),

found by bracketed bisection with a guarded Newton polish (the transform is
strictly decreasing, so bisection is unconditionally safe).  For the
single-interface geometry the inverse is available in closed form.  All other
quantities of the scaling theory (hop cost, Gaussian scale, contact density,
Poisson intensity at criticality, ...) are explicit functions of ``delta``
evaluated here.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import (
    INFINITE,
    _kernel_rows,
    horizon_for_tail,
    is_infinite,
    passage_transform,
    transform_pole,
    validate_spacing,
)

#: Residual |transform(root) - target| the root finder is expected to reach.
ROOT_RESIDUAL = 1e-12


def _bisect_newton(f, lo, hi, f_lo, f_hi, coarse=1e-4):
    """Root of a strictly decreasing ``f`` with f(lo) > 0 > f(hi).

    Coarse bisection first, then Newton steps with a numerical derivative.
    Newton runs only while its stencil and candidate stay strictly inside the
    bracket (near the transform pole it bails out immediately); a bisection
    flush down to machine width then guarantees the returned point carries the
    smallest residual double precision allows.
    """
    if f_lo < 0.0 or f_hi > 0.0:
        raise AssertionError("root finder called with an invalid bracket")
    while hi - lo > coarse:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(20):
        h = 1e-7 * max(abs(x), 1e-3)
        if x - h <= lo or x + h >= hi:
            break
        fx = f(x)
        if fx == 0.0:
            return x
        dfx = (f(x + h) - f(x - h)) / (2.0 * h)
        if dfx >= 0.0:
            break
        xn = x - fx / dfx
        if not (lo + h < xn < hi - h):
            break
        if fx > 0.0:
            lo = x
        else:
            hi = x
        if abs(xn - x) <= math.ulp(abs(xn) + 1e-16):
            return xn
        x = xn
    while True:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def free_energy_single(delta) -> float:
    """Free energy of the single-interface model, in closed form.

    Vanishes for delta <= 0 and grows like delta**2 / 2 near the transition.
    """
    if delta <= 0.0:
        return 0.0
    return 0.5 * delta - 0.5 * math.log(2.0 - math.exp(-delta))


def free_energy(delta, spacing) -> float:
    """Free energy ``phi(delta, T)`` of the pinning model.

    For finite spacing the defining equation has a root for every real
    ``delta``; for infinite spacing the closed single-interface form applies.
    """
    if is_infinite(spacing):
        return free_energy_single(delta)
    T = validate_spacing(spacing)
    if delta == 0.0:
        return 0.0  # transform equals 1 at lam = 0 exactly
    target = math.exp(-delta)

    def f(lam):
        return passage_transform(T, lam) - target

    lo = max(transform_pole(T) + 1e-9, -50.0)
    hi = 1.0
    f_hi = f(hi)
    for _ in range(64):
        if f_hi < 0.0:
            break
        hi *= 2.0
        f_hi = f(hi)
    return _bisect_newton(f, lo, hi, f(lo), f_hi)


def hop_cost(delta) -> float:
    """Exponential cost rate of an interface hop (delta > 0).

    The equilibrium hop transform decays like ``exp(-hop_cost * T)``; spacing
    ``log(N)/hop_cost`` is the critical growth speed.
    """
    if delta <= 0.0:
        raise ValueError("hop cost is defined for delta > 0 only")
    return 0.5 * delta + 0.5 * math.log(2.0 - math.exp(-delta))


def _slope_single(delta) -> float:
    """d/d delta of the single-interface free energy, delta > 0."""
    e = math.exp(-delta)
    return (1.0 - e) / (2.0 - e)


def _tilted_rows(delta, spacing, phi, tail_target=1e-13):
    """Tilted step masses exp(delta) * pmf(n) * exp(-phi n) up to a horizon
    whose certified first-moment tail is below ``tail_target``.

    Returns (stay_mass, hop_mass, mass, moment_tail_bound); raises if the
    horizon cap prevents reaching the target.
    """
    T = spacing
    rho0 = math.cos(math.pi / T)
    ratio = rho0 * math.exp(-phi)
    if ratio >= 1.0:
        raise AssertionError("tilted kernel is not summable")  # phi > pole rules this out

    def moment_tail(n):
        # sum_{m > n} m * 2 e^delta cos^{m-2} e^{-phi m}
        if rho0 <= 0.0:
            return 0.0
        lead = 2.0 * math.exp(delta) * rho0 ** (n - 1) * math.exp(-phi * (n + 1))
        return lead * ((n + 1) * (1.0 - ratio) + ratio) / (1.0 - ratio) ** 2

    horizon = max(horizon_for_tail(T, 1e-10), 16)
    for _ in range(40):
        if moment_tail(horizon) <= tail_target or horizon >= 10**7:
            break
        horizon *= 2
    bound = moment_tail(horizon)
    if bound > tail_target:
        raise ArithmeticError(
            f"tilted series tail {bound} above target {tail_target} "
            f"at horizon cap (delta={delta}, spacing={T})"
        )
    stay, hop = _kernel_rows(T, horizon)
    weights = math.exp(delta) * np.exp(-phi * np.arange(horizon + 1))
    return stay * weights, hop * weights, bound


def step_mean(delta, spacing) -> float:
    """Mean gap between contacts under the equilibrium tilted renewal law.

    Equals the reciprocal contact density.  Finite spacing sums the tilted
    series with a certified tail bound; the single-interface value is closed
    form (and requires delta > 0).
    """
    if is_infinite(spacing):
        if delta <= 0.0:
            raise ValueError("single-interface step mean requires delta > 0")
        return 1.0 / _slope_single(delta)
    T = validate_spacing(spacing)
    if T == 2:
        return 2.0
    phi = free_energy(delta, T)
    stay_m, hop_m, bound = _tilted_rows(delta, T, phi)
    n = np.arange(stay_m.size)
    mean = float(np.sum(n * (stay_m + 2.0 * hop_m)))
    # bound covers the truncated part of the first moment
    return mean + 0.5 * bound


def contact_density(delta, spacing) -> float:
    """Asymptotic fraction of time spent on interfaces (slope of phi)."""
    return 1.0 / step_mean(delta, spacing)


@dataclass(frozen=True)
class DerivedConstants:
    """Scaling constants of the localized phase at pinning strength delta.

    ``poisson_rate`` and ``first_hop_rate`` are evaluated at the offset
    ``zeta`` from the critical spacing; ``offset`` itself is only populated by
    :func:`regime_offset` callers that know the polymer length.
    """

    delta: float
    zeta: float
    free_energy: float
    hop_cost: float
    gaussian_scale: float
    contact_density: float
    step_mean: float
    poisson_rate: float
    first_hop_rate: float
    offset: float | None = None


def scaling_constants(delta, zeta=0.0) -> DerivedConstants:
    """Every constant of the scaling theory at (delta, zeta), delta > 0."""
    if delta <= 0.0:
        raise ValueError("scaling constants are defined for delta > 0")
    phi = free_energy_single(delta)
    cost = hop_cost(delta)
    slope = _slope_single(delta)
    root = math.sqrt(-math.expm1(-2.0 * phi))  # equals 1 - exp(-delta)
    scale = math.sqrt(2.0 * math.exp(delta) * slope * root)
    first_hop = 2.0 * math.exp(delta) * root * math.exp(-cost * zeta)
    return DerivedConstants(
        delta=delta,
        zeta=zeta,
        free_energy=phi,
        hop_cost=cost,
        gaussian_scale=scale,
        contact_density=slope,
        step_mean=1.0 / slope,
        poisson_rate=first_hop * slope,
        first_hop_rate=first_hop,
    )


def regime_offset(length, spacing, delta, critical_window=5.0):
    """Offset ``T - log(N)/hop_cost`` and the regime it selects.

    The offset sign classifies the scaling behaviour; the window around zero
    that counts as critical is the caller's modelling choice.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    offset = spacing - math.log(length) / hop_cost(delta)
    if offset < -critical_window:
        regime = "gaussian"
    elif offset > critical_window:
        regime = "single_interface"
    else:
        regime = "critical"
    return offset, regime


def hop_transform_ratio(delta, spacing) -> float:
    """Equilibrium hop transform divided by its large-spacing asymptote.

    Tends to 1 as the spacing grows (delta > 0 fixed).
    """
    from .kernels import hop_transform

    if delta <= 0.0:
        raise ValueError("asymptotic hop ratio requires delta > 0")
    T = validate_spacing(spacing, allow_infinite=False)
    phi = free_energy(delta, T)
    asymptote = (1.0 - math.exp(-delta)) * math.exp(-hop_cost(delta) * T)
    return hop_transform(T, phi) / asymptote
