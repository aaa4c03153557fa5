"""Tilted renewal process whose epochs reproduce the polymer's contacts.

Reweighting the first-passage kernel by ``exp(delta - phi * n)`` turns it into
a probability law on gaps (jointly with the interface-change mark), and the
constrained polymer's contact set is exactly this renewal process conditioned
to contain ``N``.  The module builds the step law with a certified truncation
tail, samples it in O(1) through an alias table (with an exact rejection
branch for the truncated tail), computes the renewal mass function by
convolution, and checks the exact partition-function identity against the
transfer-matrix oracle.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact_polymer
from .free_energy import free_energy, step_mean
from .kernels import (
    _kernel_rows,
    hop_pmf,
    horizon_for_tail,
    stay_pmf,
    validate_spacing,
)


class AliasTable:
    """Walker alias structure for O(1) draws from a finite distribution.

    Built once from nonnegative weights; draws are vectorised over numpy
    generators.  Weights are normalised internally.
    """

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("alias table needs a nonempty nonnegative weight vector")
        k = w.size
        scaled = w * (k / w.sum())
        self.accept = np.ones(k)
        self.alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            g = large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        for i in small + large:
            self.accept[i] = 1.0

    def draw(self, rng, size=None):
        """Sample slot indices; scalar when ``size`` is None."""
        n = 1 if size is None else size
        idx = rng.integers(0, self.alias.size, size=n)
        keep = rng.random(n) < self.accept[idx]
        out = np.where(keep, idx, self.alias[idx])
        return int(out[0]) if size is None else out


@dataclass(frozen=True)
class TiltedStepLaw:
    """Step law of the tilted renewal process for one (delta, spacing) pair.

    ``stay_mass[n]`` and ``hop_mass[n]`` are the masses of a gap ``n`` with
    mark 0 and with one signed mark (so the +1 and -1 marks weigh
    ``hop_mass[n]`` each).  The table covers ``n <= horizon``; ``tail_mass``
    is the exact residual ``1 - table mass``, bounded by ``tail_bound``.  The
    alias table has one extra slot for the tail event, which is resolved by
    rejection from the geometric envelope so draws are exact.
    """

    delta: float
    spacing: int
    phi: float
    horizon: int
    stay_mass: np.ndarray
    hop_mass: np.ndarray
    total_mass: np.ndarray
    hop_given_gap: np.ndarray
    tail_mass: float
    tail_bound: float
    mean: float
    alias: AliasTable = field(repr=False)

    @property
    def envelope_rate(self) -> float:
        """Geometric decay rate of the tilted kernel envelope."""
        return math.cos(math.pi / self.spacing) * math.exp(-self.phi)

    def gap_mass(self, n) -> float:
        """Total step mass at gap ``n``, table or on-demand beyond it."""
        if n <= self.horizon:
            return float(self.total_mass[n])
        q = stay_pmf(self.spacing, n) + 2.0 * hop_pmf(self.spacing, n)
        return math.exp(self.delta - self.phi * n) * q

    def hop_fraction(self, n) -> float:
        """P(|mark| = 1 | gap = n)."""
        if n <= self.horizon:
            return float(self.hop_given_gap[n])
        q0 = stay_pmf(self.spacing, n)
        q1 = hop_pmf(self.spacing, n)
        tot = q0 + 2.0 * q1
        return 2.0 * q1 / tot if tot > 0.0 else 0.0


def build_step_law(delta, spacing, tail_bound=1e-12) -> TiltedStepLaw:
    """Build the tilted step law with truncation tail below ``tail_bound``.

    The horizon comes from the tilted geometric envelope
    ``gap_mass(n) <= 2 e^delta (cos(pi/T) e^{-phi})^n / cos^2(pi/T)``;
    an unreachable bound within the horizon cap raises.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    phi = free_energy(delta, T)
    rho = math.cos(math.pi / T) * math.exp(-phi)
    if T == 2:
        horizon = 2
        bound = 0.0
    else:
        amp = 2.0 * math.exp(delta) / math.cos(math.pi / T) ** 2 / (1.0 - rho)
        # amp * rho^(horizon+1) <= tail_bound
        need = math.log(tail_bound / amp) / math.log(rho) - 1.0
        horizon = int(math.ceil(max(need, 4.0)))
        horizon += horizon % 2
        if horizon > 10**7:
            raise ArithmeticError(
                f"tilted tail bound {tail_bound} unreachable below the horizon "
                f"cap for delta={delta}, spacing={T}"
            )
        bound = amp * rho ** (horizon + 1)
    stay, hop = _kernel_rows(T, horizon)
    tilt = math.exp(delta) * np.exp(-phi * np.arange(horizon + 1))
    stay_mass = stay * tilt
    hop_mass = hop * tilt
    total = stay_mass + 2.0 * hop_mass
    covered = float(total.sum())
    tail_mass = max(1.0 - covered, 0.0)
    if tail_mass > bound + 1e-9:
        raise AssertionError(
            f"realised tail {tail_mass} exceeds certified bound {bound}"
        )
    with np.errstate(invalid="ignore"):
        hop_frac = np.where(total > 0.0, 2.0 * hop_mass / np.maximum(total, 1e-300), 0.0)
    alias = AliasTable(np.concatenate([total, [tail_mass]]))
    mean = float(np.dot(np.arange(horizon + 1), total))
    return TiltedStepLaw(
        delta=delta,
        spacing=T,
        phi=phi,
        horizon=horizon,
        stay_mass=stay_mass,
        hop_mass=hop_mass,
        total_mass=total,
        hop_given_gap=hop_frac,
        tail_mass=tail_mass,
        tail_bound=bound,
        mean=mean,
        alias=alias,
    )


def _sample_tail_gap(law, rng, weight_fn=None, weight_max=1.0):
    """Exact draw of a gap beyond the table horizon.

    Rejection from the geometric envelope restricted to even gaps; an optional
    ``weight_fn(n) <= weight_max`` reweights the draw (used by the conditioned
    path samplers).  The entry probability of this branch is ``tail_mass``, so
    the O(spacing) per-proposal cost is irrelevant.
    """
    T = law.spacing
    rho2 = law.envelope_rate ** 2
    base = law.horizon + 2
    e_delta = math.exp(law.delta)
    for _ in range(100000):
        k = rng.geometric(1.0 - rho2) - 1  # support 0, 1, 2, ...
        n = base + 2 * k
        envelope = 2.0 * e_delta * math.cos(math.pi / T) ** (n - 2) * math.exp(
            -law.phi * n
        )
        accept = law.gap_mass(n) / envelope
        if weight_fn is not None:
            accept *= weight_fn(n) / weight_max
        if rng.random() < accept:
            return n
    raise RuntimeError("tail rejection sampler failed to accept")  # unreachable


def sample_step(law, rng):
    """One exact draw (gap, mark) from the tilted step law."""
    gap = int(sample_steps(law, rng, 1)[0][0])
    if rng.random() < law.hop_fraction(gap):
        mark = 1 if rng.random() < 0.5 else -1
    else:
        mark = 0
    return gap, mark


def sample_steps(law, rng, size):
    """Vectorised exact draws of ``size`` gaps (no marks): (gaps, tail_count).

    Tail-slot hits are resolved one by one through the rejection branch.
    """
    slots = law.alias.draw(rng, size)
    gaps = slots.astype(np.int64)
    tail_hits = np.flatnonzero(slots == law.horizon + 1)
    for i in tail_hits:
        gaps[i] = _sample_tail_gap(law, rng)
    return gaps, tail_hits.size


@dataclass(frozen=True)
class RenewalMass:
    """Probability ``u(n)`` that ``n`` is a renewal epoch, for n = 0..length.

    Odd entries are exact zeros (the step law is supported on even gaps).
    """

    delta: float
    spacing: int
    length: int
    u: np.ndarray


def _convolve_mass(kernel_even, length_even, boundary=None):
    """Solve u[k] = boundary[k] + sum_j kernel[j] u[k-j] on the even grid.

    ``kernel_even[j]`` is the mass of gap ``2j``; ``boundary`` defaults to the
    renewal initial condition (u[0] = 1).
    """
    m = length_even + 1
    u = np.zeros(m)
    if boundary is None:
        u[0] = 1.0
        src = None
    else:
        src = boundary
        u[0] = src[0]
    kmax = kernel_even.size - 1
    krev = kernel_even[::-1]
    for k in range(1, m):
        j = min(k, kmax)
        acc = float(np.dot(krev[kmax - j : kmax], u[k - j : k]))
        if src is not None:
            acc += src[k]
        u[k] = acc
    return u


def renewal_mass(law, length) -> RenewalMass:
    """Renewal mass function of the tilted process up to ``length``."""
    n = int(length)
    if n < 0 or n % 2:
        raise ValueError("renewal mass is defined on even lengths >= 0")
    kernel_even = law.total_mass[::2]
    u_even = _convolve_mass(kernel_even, n // 2)
    u = np.zeros(n + 1)
    u[::2] = u_even
    return RenewalMass(delta=law.delta, spacing=law.spacing, length=n, u=u)


def partition_identity_check(delta, spacing, length, law=None, mass=None):
    """Exact identity: log Z_constrained = phi * N + log u(N).

    Returns (lhs, rhs, gap); ``law``/``mass`` may be passed to amortise table
    construction over a grid of lengths.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = int(length)
    if n % 2 or n <= 0:
        raise ValueError("the constrained identity needs a positive even length")
    if law is None:
        law = build_step_law(delta, T)
    if mass is None:
        mass = renewal_mass(law, n)
    lhs = exact_polymer.log_partition_constrained(n, delta, T)
    rhs = law.phi * n + math.log(mass.u[n])
    return lhs, rhs, abs(lhs - rhs)


def equilibrium_mass(delta, spacing) -> float:
    """Large-length limit of u(even n): twice the contact density."""
    return 2.0 / step_mean(delta, spacing)
