"""Exact small/medium-size oracles for the pinning model.

Partition functions by transfer dynamic programming (the reward is periodic
in the walk height, so the free and constrained sums live on the cylinder of
height residues), exhaustive 2^N enumeration for cross-checking, the
free-vs-constrained sandwich bounds, the exact mean contact fraction, and the
full endpoint law on the uncompressed height band.

All dynamic programs renormalise the state vector every step and accumulate
the log of the scale factors, so arbitrarily large rewards neither overflow
nor underflow.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import validate_spacing

#: Exhaustive enumeration cap (2^N paths).
BRUTE_FORCE_LIMIT = 20

#: Endpoint-law band DP cap (O(N^2) work and memory).
ENDPOINT_LIMIT = 4000


def _check_length(length, even=False):
    n = int(length)
    if n != length or n < 1:
        raise ValueError(f"polymer length must be a positive integer, got {length!r}")
    if even and n % 2:
        raise ValueError("constrained quantities need an even polymer length")
    return n


def _cylinder_sweep(length, delta, spacing, collect=None):
    """Transfer DP on height residues; returns (log Z_free, log Z_constrained).

    ``collect(step, state, log_scale)`` is invoked after every step for
    callers that need the whole profile.  The state vector is renormalised by
    its maximum each step; ``log_scale`` accumulates the normalisations.
    """
    T = spacing
    reward = math.exp(delta)
    state = np.zeros(T)
    state[0] = 1.0
    log_scale = 0.0
    up = np.empty(T)
    down = np.empty(T)
    for step in range(1, length + 1):
        # height s -> s +/- 1, reduced mod T; arrivals at residue 0 collect the reward
        up[1:] = state[:-1]
        up[0] = state[-1]
        down[:-1] = state[1:]
        down[-1] = state[0]
        state = 0.5 * (up + down)
        state[0] *= reward
        peak = state.max()
        state /= peak
        log_scale += math.log(peak)
        if collect is not None:
            collect(step, state, log_scale)
    pinned = log_scale + math.log(state[0]) if state[0] > 0.0 else -math.inf
    return log_scale + math.log(state.sum()), pinned


def log_partition(length, delta, spacing) -> float:
    """log of the free partition function, exact up to rounding; O(N*T)."""
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length)
    return _cylinder_sweep(n, delta, T)[0]


def log_partition_constrained(length, delta, spacing) -> float:
    """log of the partition function restricted to endpoints on the grid.

    Length 0 is the empty product (the walk starts pinned), so log Z = 0.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    if length == 0:
        return 0.0
    n = _check_length(length, even=True)
    return _cylinder_sweep(n, delta, T)[1]


def log_partition_constrained_profile(length, delta, spacing) -> np.ndarray:
    """log Z_constrained for every even prefix 2, 4, ..., length in one sweep.

    Entry ``k`` of the returned array is the value at length ``2k`` (entry 0
    is 0, the empty product).
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length, even=True)
    out = np.zeros(n // 2 + 1)

    def collect(step, state, log_scale):
        if step % 2 == 0:
            out[step // 2] = log_scale + math.log(state[0])

    _cylinder_sweep(n, delta, T, collect)
    return out


def log_partition_bruteforce(length, delta, spacing, constrained=False) -> float:
    """Partition function by exhaustive enumeration of all 2^N paths.

    Independent of the transfer DP; limited to ``length <= 20``.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is capped at length {BRUTE_FORCE_LIMIT}")
    if constrained and n % 2:
        raise ValueError("constrained brute force needs an even length")
    total = 0.0
    block = 1 << min(n, 16)
    codes = np.arange(block, dtype=np.uint32)
    bits = np.arange(n, dtype=np.uint32)
    for start in range(0, 1 << n, block):
        steps = (((codes + start)[:, None] >> bits) & 1).astype(np.int64) * 2 - 1
        heights = np.cumsum(steps, axis=1)
        contacts = (heights % T) == 0
        weights = np.exp(delta * contacts.sum(axis=1))
        if constrained:
            weights = weights * contacts[:, -1]
        total += float(weights.sum())
    return math.log(total) - n * math.log(2.0)


@dataclass(frozen=True)
class SandwichResult:
    """Outcome of the free-vs-constrained partition sandwich at one point.

    ``lower_slack`` and ``upper_slack`` are the log-scale margins by which the
    two inequalities hold (nonnegative when satisfied).
    """

    length: int
    delta: float
    spacing: int
    lower_ok: bool
    upper_ok: bool
    lower_slack: float
    upper_slack: float

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(length, delta, spacing, tolerance=1e-9) -> SandwichResult:
    """Check the free/constrained partition sandwich

        exp(-|delta|) Z_c(2 floor(N/2)) <= Z(N)
                 <= sqrt((N+1) exp(max(0, -delta)) Z_c(2N)).

    The penalty factor inside the root is required: doubling the polymer and
    time-reversing the second half turns the midpoint into a counted contact,
    which costs exp(delta) whenever the midpoint sat off the grid, a loss for
    delta < 0.  Without it the upper bound already fails at
    (length 1, delta -1, spacing 4), where the corrected bound is an equality.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length)
    log_free = log_partition(n, delta, T)
    log_low = -abs(delta) + log_partition_constrained(2 * (n // 2), delta, T)
    log_high = 0.5 * (
        math.log(n + 1.0)
        + max(0.0, -delta)
        + log_partition_constrained(2 * n, delta, T)
    )
    lower_slack = log_free - log_low
    upper_slack = log_high - log_free
    return SandwichResult(
        length=n,
        delta=delta,
        spacing=T,
        lower_ok=lower_slack >= -tolerance,
        upper_ok=upper_slack >= -tolerance,
        lower_slack=lower_slack,
        upper_slack=upper_slack,
    )


def contact_fraction(length, delta, spacing) -> float:
    """Exact E[contacts / N] under the polymer measure, by an augmented DP.

    Carries the weighted contact count alongside the weight; converges to the
    contact density as the length grows.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length)
    reward = math.exp(delta)
    z = np.zeros(T)
    z[0] = 1.0
    a = np.zeros(T)  # sum of weight * contact-count, same scaling as z
    for _ in range(n):
        z_up = np.roll(z, 1)
        z_down = np.roll(z, -1)
        a_up = np.roll(a, 1)
        a_down = np.roll(a, -1)
        z = 0.5 * (z_up + z_down)
        a = 0.5 * (a_up + a_down)
        a[0] += z[0]  # the arrival itself is one more contact
        z[0] *= reward
        a[0] *= reward
        peak = z.max()
        z /= peak
        a /= peak
    return float(a.sum() / z.sum()) / n


@dataclass(frozen=True)
class EndpointLaw:
    """Exact law of the endpoint height under the polymer measure.

    ``support`` holds the reachable heights (parity of the length) and
    ``probs`` the matching probabilities; ``prob_of`` returns 0 elsewhere.
    """

    length: int
    delta: float
    spacing: int
    support: np.ndarray
    probs: np.ndarray

    def prob_of(self, height) -> float:
        idx = np.searchsorted(self.support, height)
        if idx < self.support.size and self.support[idx] == height:
            return float(self.probs[idx])
        return 0.0

    def as_dict(self) -> dict:
        return {int(s): float(p) for s, p in zip(self.support, self.probs)}


def endpoint_law(length, delta, spacing) -> EndpointLaw:
    """Endpoint distribution by a full-band DP over heights -N..N; O(N^2)."""
    T = validate_spacing(spacing, allow_infinite=False)
    n = _check_length(length)
    if n > ENDPOINT_LIMIT:
        raise ValueError(f"endpoint law DP is capped at length {ENDPOINT_LIMIT}")
    size = 2 * n + 1  # index i <-> height i - n
    state = np.zeros(size)
    state[n] = 1.0
    heights = np.arange(size) - n
    on_grid = (heights % T) == 0
    reward = math.exp(delta)
    for _ in range(n):
        nxt = np.zeros(size)
        nxt[1:] += 0.5 * state[:-1]
        nxt[:-1] += 0.5 * state[1:]
        nxt[on_grid] *= reward
        state = nxt / nxt.max()
    keep = state > 0.0
    probs = state[keep] / state[keep].sum()
    return EndpointLaw(
        length=n,
        delta=delta,
        spacing=T,
        support=heights[keep],
        probs=probs,
    )
