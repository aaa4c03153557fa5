"""Exact samplers of the polymer's contact skeleton.

A skeleton is the sequence of contact times with the interface grid together
with the interface-change marks, the last contact time, and the height offset
of the free endpoint above the last interface touched.  Two exact samplers
are provided:

* ``ConstrainedSampler`` draws the contact set of the endpoint-pinned polymer
  (the tilted renewal process conditioned to contain ``N``) by the backward
  decomposition with the renewal mass function, and
* ``FreeSampler`` draws the skeleton marginal of the free polymer through
  suffix weights ``W(m) = G(m) + sum K(n) W(m - n)``, where ``G(m)`` is the
  tilted probability that the walk stays off the grid for ``m`` steps; at
  ``m`` remaining the chain stops with probability ``G(m)/W(m)`` and the
  endpoint offset is drawn from the no-contact band kernel.

Both conditioning weight sequences converge geometrically to constants, so
beyond a detected plateau the conditioned gap law coincides (to double
precision) with the unconditioned tilted law and is drawn in O(1) from the
alias table in vectorised batches; the remaining boundary region is sampled
by sequential inverse-CDF with early exit.  Gap draws beyond the tabulated
horizon are resolved exactly by rejection from the geometric envelope.
"""

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .free_energy import free_energy
from .kernels import validate_spacing
from .renewal import TiltedStepLaw, _convolve_mass, _sample_tail_gap, build_step_law

#: Stop probabilities neglected during the vectorised phase must sit below
#: this bound at the phase switch (certified at build time).
PHASE_STOP_BOUND = 1e-11


@dataclass(frozen=True)
class ContactSkeleton:
    """Contact times and marks of one polymer configuration.

    ``times`` are the strictly increasing contact epochs, ``marks[i]`` in
    {-1, 0, +1} tells whether contact ``i`` changed interface, and
    ``final_offset`` is the endpoint height relative to the last interface
    touched (0 exactly when the last contact is at ``length``).
    """

    length: int
    spacing: int
    delta: float
    times: np.ndarray
    marks: np.ndarray
    final_offset: int

    @property
    def last_contact(self) -> int:
        return int(self.times[-1]) if self.times.size else 0

    @property
    def endpoint(self) -> int:
        return self.spacing * int(self.marks.sum()) + self.final_offset

    def validate(self):
        """Raise if any structural invariant fails (sampler self-check)."""
        t = self.times
        eps = self.marks
        if t.size != eps.size:
            raise AssertionError("times and marks length mismatch")
        if t.size:
            gaps = np.diff(np.concatenate([[0], t]))
            if gaps.min() < 2 or int(t[-1]) > self.length:
                raise AssertionError("contact times not increasing within range")
            if np.any(gaps % 2):
                raise AssertionError("odd gap in skeleton")
            hop_gaps = gaps[np.abs(eps) == 1]
            if hop_gaps.size and hop_gaps.min() < self.spacing:
                raise AssertionError("hop gap shorter than the spacing")
        x = self.final_offset
        stretch = self.length - self.last_contact
        if stretch == 0:
            if x != 0:
                raise AssertionError("offset must vanish at a terminal contact")
        else:
            if not (0 < abs(x) < self.spacing) or (x - stretch) % 2:
                raise AssertionError("offset outside the no-contact band")
        if (self.endpoint - self.length) % 2:
            raise AssertionError("endpoint parity violates the walk parity")


@dataclass(frozen=True)
class SkeletonStats:
    """Derived processes of one skeleton."""

    endpoint: int
    contacts: int
    hops: int
    last_contact: int
    final_offset: int
    hop_times: np.ndarray
    first_hop_index: int  # 1-based index of the first hop mark; 0 if none
    first_hop_gap: int  # gap length at that mark; 0 if none
    interface_path: np.ndarray  # running interface index after each contact

    @property
    def final_interface(self) -> int:
        return int(self.interface_path[-1]) if self.interface_path.size else 0


def skeleton_statistics(skeleton) -> SkeletonStats:
    """Pure derivation of the processes the scaling theory tracks."""
    eps = skeleton.marks
    times = skeleton.times
    path = np.cumsum(eps, dtype=np.int64)
    hop_pos = np.flatnonzero(np.abs(eps) == 1)
    if hop_pos.size:
        first = int(hop_pos[0])
        prev = int(times[first - 1]) if first else 0
        first_gap = int(times[first]) - prev
    else:
        first, first_gap = -1, 0
    stats = SkeletonStats(
        endpoint=skeleton.endpoint,
        contacts=int(times.size),
        hops=int(hop_pos.size),
        last_contact=skeleton.last_contact,
        final_offset=skeleton.final_offset,
        hop_times=times[hop_pos],
        first_hop_index=first + 1,
        first_hop_gap=first_gap,
        interface_path=path,
    )
    return stats


class NoContactKernel:
    """Band dynamic program for walks that avoid the interface grid.

    Tracks the law of the walk height relative to the starting interface,
    killed on the grid {0, +/-T} (the origin only from step 1 on).  Provides
    the log survival probability and, per surviving step count, the
    conditional endpoint law, both extended lazily.
    """

    def __init__(self, spacing):
        self.spacing = validate_spacing(spacing, allow_infinite=False)
        T = self.spacing
        self._heights = np.arange(-(T - 1), T)
        self._log_surv = [0.0]
        self._surv_state = self._origin_state()
        self._rows = [(np.array([0]), np.array([1.0]))]
        self._row_state = self._origin_state()
        self._row_log = 0.0
        self._lock = threading.Lock()

    def _origin_state(self):
        state = np.zeros(2 * self.spacing - 1)
        state[self.spacing - 1] = 1.0
        return state

    @staticmethod
    def _step(state):
        nxt = np.zeros_like(state)
        nxt[1:] += 0.5 * state[:-1]
        nxt[:-1] += 0.5 * state[1:]
        nxt[state.size // 2] = 0.0  # arrival on the starting interface kills
        return nxt

    def log_survival(self, upto) -> np.ndarray:
        """log P(no grid contact during steps 1..m) for m = 0..upto."""
        with self._lock:
            while len(self._log_surv) <= upto:
                self._surv_state = self._step(self._surv_state)
                total = self._surv_state.sum()
                if total <= 0.0:
                    self._log_surv.append(-math.inf)
                    continue
                self._surv_state /= total
                self._log_surv.append(self._log_surv[-1] + math.log(total))
            return np.array(self._log_surv[: upto + 1])

    def row(self, steps):
        """(offsets, conditional probabilities) of the height after
        ``steps`` no-contact steps."""
        with self._lock:
            while len(self._rows) <= steps:
                self._row_state = self._step(self._row_state)
                total = self._row_state.sum()
                if total <= 0.0:
                    self._rows.append((np.array([], dtype=int), np.array([])))
                    self._row_state = np.zeros_like(self._row_state)
                    continue
                self._row_state /= total
                keep = self._row_state > 0.0
                self._rows.append(
                    (self._heights[keep].copy(), self._row_state[keep].copy())
                )
            return self._rows[steps]


def no_contact_endpoint(spacing, steps):
    """Endpoint law of a walk avoiding the grid for ``steps`` steps.

    Returns (offsets, masses, survival): masses are unconditional and sum to
    the survival probability; for ``steps = 0`` the walk sits at offset 0.
    """
    T = validate_spacing(spacing, allow_infinite=False)
    m = int(steps)
    if m < 0:
        raise ValueError("step count must be >= 0")
    kernel = _no_contact_kernel(T)
    offsets, cond = kernel.row(m)
    survival = math.exp(kernel.log_survival(m)[m]) if m else 1.0
    return offsets, cond * survival, survival


@lru_cache(maxsize=64)
def _no_contact_kernel(spacing) -> NoContactKernel:
    return NoContactKernel(spacing)


def _detect_plateau(values, rel):
    """Index from which ``values`` agrees with its final entry to ``rel``.

    ``rel`` must cover the slow linear drift the truncated kernel's mass
    deficiency imprints on the weights (slope ~ tail_mass per mean gap), on
    top of which the genuine transient decays geometrically.
    """
    limit = values[-1]
    dev = np.abs(values - limit) > rel * abs(limit)
    hits = np.flatnonzero(dev)
    return int(hits[-1]) + 1 if hits.size else 0


class _SamplerCore:
    """Machinery shared by the free and constrained samplers.

    Subclasses provide the conditioning weight table ``w`` (with its parity
    plateau values) and the phase switch; the core implements the vectorised
    unconditioned phase and exact tail-gap resolution.
    """

    law: TiltedStepLaw

    def _weight_at(self, m) -> float:
        if m < 0:
            return 0.0
        if m < len(self._w_list):
            return self._w_list[m]
        return self._w_plateau[m & 1]

    def _resolve_tail_gap(self, m, rng) -> int:
        """Exact tail-branch gap at ``m`` remaining, reweighted by the
        conditioning sequence."""
        return _sample_tail_gap(
            self.law,
            rng,
            weight_fn=lambda n: self._weight_at(m - n),
            weight_max=self._w_max,
        )

    def _draw_marks(self, gaps, rng):
        """Vectorised marks for a batch of gaps from the table range."""
        hop_frac = self.law.hop_given_gap[gaps]
        hops = rng.random(gaps.size) < hop_frac
        signs = np.where(rng.random(gaps.size) < 0.5, 1, -1)
        return np.where(hops, signs, 0).astype(np.int8)

    def _mark_of(self, gap, rng) -> int:
        if rng.random() < self.law.hop_fraction(gap):
            return 1 if rng.random() < 0.5 else -1
        return 0

    def _bulk_phase(self, m, rng, gap_chunks, mark_chunks):
        """Draw unconditioned gaps while more than ``switch`` remains.

        Commits whole alias batches up to the phase boundary; a tail-slot hit
        interrupts the batch and is resolved exactly at its true state.
        Returns the remaining budget at the phase switch.
        """
        law = self.law
        switch = self._switch
        tail_slot = law.horizon + 1
        while m > switch:
            expect = (m - switch) / law.mean
            batch = int(expect + 6.0 * math.sqrt(expect) + 16.0)
            slots = law.alias.draw(rng, batch)
            cums = np.cumsum(slots, dtype=np.int64)
            # pre-state of step i is m - cums[i-1]; commit while it exceeds switch
            commit = 1 + int(np.searchsorted(cums, m - switch, side="left"))
            commit = min(commit, batch)
            tails = np.flatnonzero(slots[:commit] == tail_slot)
            cut = int(tails[0]) if tails.size else commit
            if cut:
                gaps = slots[:cut].astype(np.int64)
                gap_chunks.append(gaps)
                mark_chunks.append(self._draw_marks(gaps, rng))
                m -= int(cums[cut - 1])
            if tails.size and m > switch:
                gap = self._resolve_tail_gap(m, rng)
                gap_chunks.append(np.array([gap], dtype=np.int64))
                mark_chunks.append(
                    np.array([self._mark_of(gap, rng)], dtype=np.int8)
                )
                m -= gap
        return m


class FreeSampler(_SamplerCore):
    """Exact skeleton sampler for the free polymer at one (delta, spacing).

    Tables are immutable after construction; ``sample`` only consumes the
    caller's generator, so replicas with independent streams are independent.
    """

    def __init__(self, delta, spacing, tail_bound=1e-12):
        self.delta = float(delta)
        self.spacing = validate_spacing(spacing, allow_infinite=False)
        self.law = build_step_law(self.delta, self.spacing, tail_bound)
        self.phi = self.law.phi
        self._kernel = _no_contact_kernel(self.spacing)
        rate = -math.log(self.law.envelope_rate)
        pad = int(math.ceil(46.0 / rate)) + 16
        length = self.law.horizon + pad + 256
        for _ in range(30):
            self._build_tables(length)
            plateau = max(self._plateau_even, self._plateau_odd)
            switch = plateau + self.law.horizon + int(math.ceil(12.0 / rate)) + 16
            if switch + 2 <= length and self._stop[switch] < PHASE_STOP_BOUND:
                break
            length *= 2
            if length > 10**7:
                raise ArithmeticError(
                    "conditioning weights fail to flatten below the table cap"
                )
        self._switch = switch
        self._w_list = self._w.tolist()
        self._g_list = self._g.tolist()
        self._k_list = self.law.total_mass.tolist()
        self._w_plateau = (self._w_even_lim, self._w_odd_lim)
        self._w_max = float(self._w.max())

    def _build_tables(self, length):
        log_surv = self._kernel.log_survival(length)
        m = np.arange(length + 1)
        self._g = np.exp(-self.phi * m + log_surv)
        kernel_even = self.law.total_mass[::2]
        w = np.empty(length + 1)
        w[::2] = _convolve_mass(kernel_even, (length) // 2, boundary=self._g[::2])
        w[1::2] = _convolve_mass(
            kernel_even, (length - 1) // 2, boundary=self._g[1::2]
        )
        self._w = w
        self._w_even_lim = float(w[length - (length % 2)])
        self._w_odd_lim = float(w[length - ((length + 1) % 2)])
        rel = max(1e-13, 8.0 * length * self.law.tail_mass)
        self._plateau_even = 2 * _detect_plateau(w[::2], rel)
        self._plateau_odd = 2 * _detect_plateau(w[1::2], rel) + 1
        with np.errstate(divide="ignore", invalid="ignore"):
            self._stop = self._g / self._w

    def suffix_weight(self, m) -> float:
        """Tilted free partition weight W(m); plateau value beyond tables."""
        return self._weight_at(int(m))

    def sample(self, length, rng) -> ContactSkeleton:
        """One exact skeleton of the free polymer of ``length`` steps."""
        n = int(length)
        if n < 0:
            raise ValueError("length must be >= 0")
        gap_chunks, mark_chunks = [], []
        m = self._bulk_phase(n, rng, gap_chunks, mark_chunks)
        w_list, g_list, k_list = self._w_list, self._g_list, self._k_list
        horizon = self.law.horizon
        gaps_sq, marks_sq = [], []
        while True:
            r = rng.random() * w_list[m]
            if r < g_list[m]:
                stretch = m
                break
            acc = g_list[m]
            nmax = min(m, horizon)
            gap = 0
            k = 2
            while k <= nmax:
                acc += k_list[k] * w_list[m - k]
                if acc >= r:
                    gap = k
                    break
                k += 2
            if not gap:
                if m > horizon:
                    gap = self._resolve_tail_gap(m, rng)
                else:
                    gap = nmax  # 1 ulp of CDF dust; mass < 1e-15
            gaps_sq.append(gap)
            marks_sq.append(self._mark_of(gap, rng))
            m -= gap
        if gaps_sq:
            gap_chunks.append(np.array(gaps_sq, dtype=np.int64))
            mark_chunks.append(np.array(marks_sq, dtype=np.int8))
        gaps = (
            np.concatenate(gap_chunks) if gap_chunks else np.array([], dtype=np.int64)
        )
        marks = (
            np.concatenate(mark_chunks) if mark_chunks else np.array([], dtype=np.int8)
        )
        if stretch:
            offsets, probs = self._kernel.row(stretch)
            pick = int(np.searchsorted(np.cumsum(probs), rng.random()))
            offset = int(offsets[min(pick, offsets.size - 1)])
        else:
            offset = 0
        return ContactSkeleton(
            length=n,
            spacing=self.spacing,
            delta=self.delta,
            times=np.cumsum(gaps),
            marks=marks,
            final_offset=offset,
        )


class ConstrainedSampler(_SamplerCore):
    """Exact skeleton sampler for the endpoint-pinned polymer.

    The backward decomposition draws each gap ``n`` with probability
    ``K(n) u(m - n)/u(m)`` and lands on 0 exactly.
    """

    def __init__(self, delta, spacing, tail_bound=1e-12):
        self.delta = float(delta)
        self.spacing = validate_spacing(spacing, allow_infinite=False)
        self.law = build_step_law(self.delta, self.spacing, tail_bound)
        self.phi = self.law.phi
        rate = -math.log(self.law.envelope_rate)
        half = (self.law.horizon // 2) + int(math.ceil(46.0 / rate)) + 128
        for _ in range(30):
            u_even = _convolve_mass(self.law.total_mass[::2], half)
            rel = max(1e-13, 8.0 * 2 * half * self.law.tail_mass)
            plateau = 2 * _detect_plateau(u_even, rel)
            switch = plateau + self.law.horizon + int(math.ceil(12.0 / rate)) + 16
            if switch + 2 <= 2 * half:
                break
            half *= 2
            if half > 5 * 10**6:
                raise ArithmeticError(
                    "renewal mass fails to flatten below the table cap"
                )
        self._switch = switch
        self._u_even = u_even
        u = np.zeros(2 * half + 1)
        u[::2] = u_even
        self._w_list = u.tolist()
        self._k_list = self.law.total_mass.tolist()
        self._w_plateau = (float(u_even[-1]), 0.0)
        self._w_max = float(u_even.max())

    def renewal_weight(self, m) -> float:
        """Renewal mass u(m); plateau value beyond the tables."""
        return self._weight_at(int(m))

    def sample(self, length, rng) -> ContactSkeleton:
        """One exact skeleton of the pinned polymer; ends at ``length``."""
        n = int(length)
        if n < 0 or n % 2:
            raise ValueError("the pinned polymer needs an even length >= 0")
        gap_chunks, mark_chunks = [], []
        m = self._bulk_phase(n, rng, gap_chunks, mark_chunks)
        u_list, k_list = self._w_list, self._k_list
        horizon = self.law.horizon
        gaps_sq, marks_sq = [], []
        while m > 0:
            r = rng.random() * u_list[m]
            acc = 0.0
            nmax = min(m, horizon)
            gap = 0
            k = 2
            while k <= nmax:
                acc += k_list[k] * u_list[m - k]
                if acc >= r:
                    gap = k
                    break
                k += 2
            if not gap:
                if m > horizon:
                    gap = self._resolve_tail_gap(m, rng)
                else:
                    gap = nmax
            gaps_sq.append(gap)
            marks_sq.append(self._mark_of(gap, rng))
            m -= gap
        if gaps_sq:
            gap_chunks.append(np.array(gaps_sq, dtype=np.int64))
            mark_chunks.append(np.array(marks_sq, dtype=np.int8))
        gaps = (
            np.concatenate(gap_chunks) if gap_chunks else np.array([], dtype=np.int64)
        )
        marks = (
            np.concatenate(mark_chunks) if mark_chunks else np.array([], dtype=np.int8)
        )
        return ContactSkeleton(
            length=n,
            spacing=self.spacing,
            delta=self.delta,
            times=np.cumsum(gaps),
            marks=marks,
            final_offset=0,
        )


@lru_cache(maxsize=16)
def _cached_free(delta, spacing) -> FreeSampler:
    return FreeSampler(delta, spacing)


@lru_cache(maxsize=16)
def _cached_constrained(delta, spacing) -> ConstrainedSampler:
    return ConstrainedSampler(delta, spacing)


def sample_free(delta, spacing, length, rng) -> ContactSkeleton:
    """One exact free-polymer skeleton (sampler tables are cached)."""
    return _cached_free(float(delta), int(spacing)).sample(length, rng)


def sample_constrained(delta, spacing, length, rng) -> ContactSkeleton:
    """One exact pinned-polymer skeleton (sampler tables are cached)."""
    return _cached_constrained(float(delta), int(spacing)).sample(length, rng)


def write_skeletons(path, skeletons):
    """Serialise skeletons to the line-oriented text format.

    Each record is a header ``N T delta mu x`` followed by one ``time mark``
    line per contact.
    """
    with open(path, "w") as fh:
        for skel in skeletons:
            fh.write(
                f"{skel.length} {skel.spacing} {skel.delta!r} "
                f"{skel.last_contact} {skel.final_offset}\n"
            )
            for t, e in zip(skel.times, skel.marks):
                fh.write(f"{t} {e}\n")


def read_skeletons(path):
    """Parse a skeleton file written by :func:`write_skeletons`."""
    out = []
    header = None
    times, marks = [], []

    def flush():
        if header is None:
            return
        out.append(
            ContactSkeleton(
                length=header[0],
                spacing=header[1],
                delta=header[2],
                times=np.array(times, dtype=np.int64),
                marks=np.array(marks, dtype=np.int8),
                final_offset=header[3],
            )
        )

    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) == 5:
                flush()
                times, marks = [], []
                header = (int(parts[0]), int(parts[1]), float(parts[2]), int(parts[4]))
            elif len(parts) == 2:
                times.append(int(parts[0]))
                marks.append(int(parts[1]))
            else:
                raise ValueError(f"unparseable skeleton line: {line!r}")
    flush()
    return out
