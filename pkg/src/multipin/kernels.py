"""Exact first-passage kernels of the simple random walk on an interface grid.

The walk starts on an interface of the grid ``{k*T : k integer}`` with even
spacing ``T``.  The kernels give the joint law of the first time the walk
touches the grid again and of whether it came back to the same interface
("stay") or reached a neighbouring one ("hop", up or down with equal mass).

Two independent routes to the same objects are provided:

* probability series ``stay_pmf`` / ``hop_pmf`` from the trigonometric
  eigenexpansion of the two-barrier absorption problem, and
* closed-form Laplace transforms ``stay_transform`` / ``hop_transform``
  evaluated through the parameterisation ``cosh(mu) = exp(lam)``, which is
  stable arbitrarily close to ``lam = 0``.

``spacing = math.inf`` selects the single-interface geometry, where only the
total transform is available in closed form.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

INFINITE = math.inf

#: Largest horizon a kernel table may request before giving up on the target
#: tail bound and reporting the bound actually achieved.
MAX_HORIZON = 10**6


def is_infinite(spacing) -> bool:
    """True when ``spacing`` denotes the single-interface geometry."""
    return spacing == INFINITE


def validate_spacing(spacing, allow_infinite=True) -> float:
    """Check an interface spacing and return it normalised.

    Finite spacings must be even integers >= 2; ``math.inf`` is accepted when
    ``allow_infinite`` is set.
    """
    if is_infinite(spacing):
        if not allow_infinite:
            raise ValueError("operation requires a finite interface spacing")
        return INFINITE
    try:
        s = int(spacing)
    except (TypeError, ValueError):
        raise ValueError(f"invalid interface spacing {spacing!r}") from None
    if s != spacing or s < 2 or s % 2:
        raise ValueError(
            f"interface spacing must be an even integer >= 2 or inf, got {spacing!r}"
        )
    return s


def _check_time(n) -> int:
    m = int(n)
    if m != n or m < 1:
        raise ValueError(f"passage time must be an integer >= 1, got {n!r}")
    return m


@lru_cache(maxsize=None)
def _mode_tables(spacing):
    """Cosines, squared sines and alternating signs of the T-1 lattice modes.

    The mode at angle pi/2 (present for every even spacing) has its cosine
    pinned to exact 0.0 so that integer powers vanish identically instead of
    leaving ~1e-17 dust; 0.0**0 == 1.0 keeps the n = 2 contribution exact.
    """
    T = spacing
    nu = np.arange(1, T)
    angles = np.pi * nu / T
    cos = np.cos(angles)
    cos[nu == T // 2] = 0.0
    sin2 = np.sin(angles) ** 2
    signs = np.where(nu % 2 == 1, 1.0, -1.0)
    return cos, sin2, signs


def stay_pmf(spacing, n) -> float:
    """P(first grid contact happens at step ``n`` on the starting interface).

    Zero for odd ``n`` and for ``n < 2``.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_time(n)
    if n < 2 or n % 2:
        return 0.0
    cos, sin2, _ = _mode_tables(T)
    return float(np.sum(cos ** (n - 2) * sin2)) / T


def hop_pmf(spacing, n) -> float:
    """P(first grid contact happens at step ``n`` on the interface above).

    By symmetry this is also the mass of the interface below.  Zero unless
    ``n >= spacing`` with the right parity.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_time(n)
    if n < T or n % 2:
        return 0.0
    cos, sin2, signs = _mode_tables(T)
    value = float(np.sum(signs * cos ** (n - 2) * sin2)) / (2 * T)
    # alternating sum; clip the ~1e-17 cancellation dust
    return max(value, 0.0)


def passage_pmf(spacing, n) -> float:
    """P(first grid contact happens at step ``n``), any interface."""
    return stay_pmf(spacing, n) + 2.0 * hop_pmf(spacing, n)


def transform_pole(spacing) -> float:
    """Left edge of the transform domain (the transforms diverge there).

    For spacing 2 the passage time is deterministic and the transforms are
    entire, reported as ``-inf``.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    if T == 2:
        return -INFINITE
    return -0.5 * math.log1p(math.tan(math.pi / T) ** 2)


def _transform_pair(spacing, lam):
    """(stay, hop) Laplace transforms at exponent ``lam``, finite spacing.

    Evaluated through cosh(mu) = exp(lam): real mu for lam > 0, imaginary
    mu = i*theta for lam < 0.  Both branches are computed from expm1/atan
    forms that keep full relative precision near lam = 0, where the raw
    closed forms cancel catastrophically.
    """
    T = spacing
    if lam == 0.0:
        return 1.0 - 1.0 / T, 0.5 / T
    if lam > 0.0:
        s = math.sqrt(-math.expm1(-2.0 * lam))
        mu = lam + math.log1p(s)
        tm = math.tanh(mu)
        x = mu * T
        stay = 1.0 - tm / math.tanh(x)
        # 1/(2 sinh x) written as e^{-x} / (1 - e^{-2x}):
        # accurate for tiny x, underflows gracefully for huge x
        hop = tm * math.exp(-x) / (-math.expm1(-2.0 * x))
        return stay, hop
    if lam <= transform_pole(T):
        raise ValueError(
            f"transform exponent {lam} at or below the pole for spacing {T}"
        )
    t = math.sqrt(math.expm1(-2.0 * lam))
    x = math.atan(t) * T  # in (0, pi) above the pole
    stay = 1.0 - t / math.tan(x)
    hop = t / (2.0 * math.sin(x))
    return stay, hop


def stay_transform(spacing, lam) -> float:
    """sum_n stay_pmf(n) * exp(-lam * n), in closed form."""
    T = validate_spacing(spacing)
    if is_infinite(T):
        if lam < 0.0:
            raise ValueError("single-interface transform requires lam >= 0")
        return 1.0 - math.sqrt(-math.expm1(-2.0 * lam))
    return _transform_pair(T, lam)[0]


def hop_transform(spacing, lam) -> float:
    """sum_n hop_pmf(n) * exp(-lam * n), in closed form."""
    T = validate_spacing(spacing)
    if is_infinite(T):
        if lam < 0.0:
            raise ValueError("single-interface transform requires lam >= 0")
        return 0.0
    return _transform_pair(T, lam)[1]


def passage_transform(spacing, lam) -> float:
    """E(exp(-lam * first passage time)); strictly decreasing in ``lam``."""
    T = validate_spacing(spacing)
    if is_infinite(T):
        return stay_transform(T, lam)
    stay, hop = _transform_pair(T, lam)
    return stay + 2.0 * hop


def tail_envelope(spacing, n) -> float:
    """Geometric envelope ``passage_pmf(m) <= 2 cos(pi/T)^(m-2)`` summed over
    ``m > n``; a certified bound on the truncated mass."""
    T = validate_spacing(spacing, allow_infinite=False)
    rho = math.cos(math.pi / T)
    if rho <= 0.0:
        return 0.0
    return 2.0 * rho ** (n - 1) / (1.0 - rho)


@dataclass(frozen=True)
class KernelTable:
    """First-passage probabilities tabulated up to a certified horizon.

    Arrays are indexed by the passage time itself (entries 0 and 1 are zero).
    ``tail_bound`` dominates the total mass beyond ``horizon``.
    """

    spacing: int
    horizon: int
    stay: np.ndarray
    hop: np.ndarray
    total: np.ndarray
    tail_bound: float

    def __post_init__(self):
        covered = float(np.sum(self.total))
        if covered > 1.0 + 1e-9 or covered + self.tail_bound < 1.0 - 1e-9:
            raise AssertionError(
                f"kernel table mass {covered} + tail {self.tail_bound} "
                "is not consistent with a probability law"
            )


def _kernel_rows(spacing, horizon):
    """(stay, hop) arrays over n = 0..horizon for even ``spacing``."""
    T = spacing
    cos, sin2, signs = _mode_tables(T)
    stay = np.zeros(horizon + 1)
    hop = np.zeros(horizon + 1)
    stay_w = sin2 / T
    hop_w = signs * sin2 / (2 * T)
    # chunked so very large horizons do not allocate a horizon x T matrix
    for start in range(2, horizon + 1, 65536):
        stop = min(start + 65536, horizon + 1)
        ns = np.arange(start, stop)
        even = ns[ns % 2 == 0]
        if even.size == 0:
            continue
        powers = cos[None, :] ** (even[:, None] - 2)
        stay[even] = powers @ stay_w
        hop[even] = powers @ hop_w
    np.maximum(hop, 0.0, out=hop)
    hop[: min(T, horizon + 1)] = 0.0
    return stay, hop


def horizon_for_tail(spacing, tail_bound) -> int:
    """Smallest even horizon whose envelope tail is below ``tail_bound``,
    capped at ``MAX_HORIZON``."""
    T = validate_spacing(spacing, allow_infinite=False)
    rho = math.cos(math.pi / T)
    if rho <= 1e-12:
        return 4
    n = math.log(tail_bound * (1.0 - rho) / 2.0) / math.log(rho) + 1.0
    n = int(math.ceil(max(n, 4.0)))
    n += n % 2
    return min(n, MAX_HORIZON)


def build_kernel_table(spacing, tail_bound=1e-12, horizon=None) -> KernelTable:
    """Tabulate the first-passage kernels with a certified tail bound.

    The horizon is chosen from the geometric envelope so that the neglected
    mass is below ``tail_bound`` (subject to the ``MAX_HORIZON`` cap, in which
    case the achieved bound is simply reported).  An explicit ``horizon``
    overrides the choice.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    if horizon is None:
        horizon = horizon_for_tail(T, tail_bound)
    horizon = int(horizon)
    stay, hop = _kernel_rows(T, horizon)
    tail = tail_envelope(T, horizon)
    return KernelTable(
        spacing=T,
        horizon=horizon,
        stay=stay,
        hop=hop,
        total=stay + 2.0 * hop,
        tail_bound=tail,
    )
