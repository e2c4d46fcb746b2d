"""Squaring/doubling stochastic processes on (0,1), driven by fair coin flips.

Three update rules share the squaring branch z -> z^2 on B = 1 and differ on
B = 0:

* EXTREMAL: z -> 2z - z^2, the mirror image of squaring (1-z is squared).
  This is a bounded martingale and exactly the erasure-probability process
  of a binary erasure channel under repeated polarization.
* LOWER: z -> z (hold).  Dominated by every in-class process with the same
  start, which turns tail questions into exact binomial sums.
* DOUBLING: z -> 2z with no clamp; an upper bound used only through log2 z,
  so values above 1 are kept.

State is carried as the pair (log2 z, log2(1-z)).  Each step writes the side
that the recursion makes exact (squaring doubles log2 z, the mirror branch
doubles log2(1-z)) and recovers the other side from the smaller one with a
log1p evaluation, so trajectories stay accurate next to both endpoints long
after z itself would underflow binary64.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import ResourceCapError

_LN2 = math.log(2.0)

DEFAULT_ENUM_CAP = 24


class Rule(enum.Enum):
    EXTREMAL = "extremal"
    LOWER = "lower"
    DOUBLING = "doubling"


def _require_open_unit(z0: float, name: str = "z0") -> None:
    if not 0.0 < z0 < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {z0}")


# ---------------------------------------------------------------------------
# log-domain scalar primitives
# ---------------------------------------------------------------------------

# Scalar helpers route through numpy so that scalar steps and the vectorized
# kernel round identically (libm pow(2, x) and exp2(x) can differ by an ulp).

def _exp2(x: float) -> float:
    return float(np.exp2(x))


def _log2_1p_pow2(x: float) -> float:
    # log2(1 + 2^x) for x <= 0
    return float(np.log1p(_exp2(x))) / _LN2


def _log2_1m_pow2(x: float) -> float:
    # log2(1 - 2^x) for x < 0; -inf when 2^x rounds up to 1
    t = _exp2(x)
    if t >= 1.0:
        return -math.inf
    return float(np.log1p(-t)) / _LN2


@dataclass(frozen=True)
class ZState:
    """A process value z in (0, 1) carried as (log2 z, log2(1-z)).

    For the DOUBLING rule z may exceed 1; then only log_z is meaningful and
    log_1mz is NaN.
    """

    log_z: float
    log_1mz: float

    @classmethod
    def from_value(cls, z: float) -> "ZState":
        _require_open_unit(z, "z")
        return cls(float(np.log2(z)), float(np.log1p(-z)) / _LN2)

    @property
    def value(self) -> float:
        try:
            return 2.0 ** self.log_z
        except OverflowError:
            return math.inf

    @property
    def one_minus_value(self) -> float:
        return 2.0 ** self.log_1mz


def _log2_one_plus_z(a: float, c: float) -> float:
    # log2(1 + z) from whichever representation of z is exact
    if a <= c:
        return _log2_1p_pow2(a)                 # z = 2^a is the small side
    return float(np.log2(2.0 - _exp2(c)))       # z = 1 - 2^c


def _log2_two_minus_z(a: float, c: float) -> float:
    # log2(2 - z) = log2(1 + (1 - z))
    if c <= a:
        return _log2_1p_pow2(c)                 # 1 - z = 2^c is the small side
    return float(np.log2(2.0 - _exp2(a)))


def _squared(a: float, c: float) -> ZState:
    # z -> z^2: doubling log2 z is the exact composition and is always kept;
    # log2(1-z) is recovered from it whenever z^2 lands on the small side.
    a2 = 2.0 * a
    c2 = c + _log2_one_plus_z(a, c)
    return ZState(a2, _log2_1m_pow2(a2) if a2 <= c2 else c2)


def _mirrored(a: float, c: float) -> ZState:
    # z -> 2z - z^2, i.e. (1-z) -> (1-z)^2: the mirror image of _squared.
    c2 = 2.0 * c
    a2 = a + _log2_two_minus_z(a, c)
    return ZState(_log2_1m_pow2(c2) if c2 <= a2 else a2, c2)


def step(state: ZState, b: int, rule: Rule) -> ZState:
    """Advance one polarization step: b = 1 squares, b = 0 follows the rule."""
    a = state.log_z
    if rule is Rule.DOUBLING:
        a = 2.0 * a if b else a + 1.0
        return ZState(a, _log2_1m_pow2(a) if a < 0.0 else math.nan)
    if b:
        return _squared(a, state.log_1mz)
    if rule is Rule.EXTREMAL:
        return _mirrored(a, state.log_1mz)
    return state  # Rule.LOWER holds on b = 0


# ---------------------------------------------------------------------------
# branch words and trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchWord:
    """A sequence of coin outcomes B1..Bn selecting the step taken at each level."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("branch word bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    @classmethod
    def from_index(cls, index: int, n: int) -> "BranchWord":
        """Read the n-bit binary expansion of index, most significant bit first."""
        if not 0 <= index < (1 << n):
            raise ValueError(f"index {index} out of range for {n} bits")
        return cls(tuple((index >> (n - 1 - j)) & 1 for j in range(n)))

    def to_index(self) -> int:
        out = 0
        for b in self.bits:
            out = (out << 1) | b
        return out

    @classmethod
    def random(cls, n: int, seed: int) -> "BranchWord":
        rng = np.random.default_rng(seed)
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))


def walk(z0: float, word: Iterable[int], rule: Rule) -> list[ZState]:
    """Log-domain trajectory of the process along a fixed branch word."""
    _require_open_unit(z0)
    states = [ZState.from_value(z0)]
    for b in word:
        states.append(step(states[-1], b, rule))
    return states


def iterate_values(z0: float, word: Iterable[int], rule: Rule) -> list[float]:
    """Plain binary64 trajectory; the reference iteration for cross-checks.

    Underflows on deep squaring runs; use walk() when the tail matters.
    """
    _require_open_unit(z0)
    z = float(z0)
    values = [z]
    for b in word:
        if b:
            z = z * z
        elif rule is Rule.EXTREMAL:
            z = 2.0 * z - z * z
        elif rule is Rule.DOUBLING:
            z = 2.0 * z
        values.append(z)
    return values


def sample_path(z0: float, n: int, rule: Rule, seed: int) -> list[ZState]:
    """A random trajectory of n steps; deterministic for a given seed."""
    return walk(z0, BranchWord.random(n, seed), rule)


# ---------------------------------------------------------------------------
# vectorized log-domain kernel (arrays of paths advanced one step at a time)
# ---------------------------------------------------------------------------

def _vec_log2_1m_pow2(x: np.ndarray) -> np.ndarray:
    t = np.exp2(x)
    with np.errstate(divide="ignore"):
        return np.log1p(-t) / _LN2


def _vec_step(a: np.ndarray, c: np.ndarray, b: np.ndarray, rule: Rule):
    """One step over arrays of states; returns the new (log2 z, log2(1-z))."""
    b1 = b.astype(bool)
    if rule is Rule.DOUBLING:
        a2 = np.where(b1, 2.0 * a, a + 1.0)
        below_one = a2 < 0.0
        c2 = np.where(below_one, _vec_log2_1m_pow2(np.where(below_one, a2, -1.0)), np.nan)
        return a2, c2

    z = np.exp2(a)
    w = np.exp2(c)  # 1 - z
    a_small = a <= c
    log2_1pz = np.where(a_small, np.log1p(z) / _LN2, np.log2(2.0 - w))
    log2_2mz = np.where(a_small, np.log2(2.0 - z), np.log1p(w) / _LN2)

    # Squared branch: 2a is exact and always kept; recover c when z^2 <= 1/2.
    sq_a = 2.0 * a
    sq_c = c + log2_1pz
    rec = sq_a <= sq_c
    sq_c = np.where(rec, _vec_log2_1m_pow2(np.where(rec, sq_a, -1.0)), sq_c)

    if rule is Rule.EXTREMAL:
        # Mirror branch: 2c is exact and always kept; recover a when z' >= 1/2.
        mi_c = 2.0 * c
        mi_a = a + log2_2mz
        rec = mi_c <= mi_a
        mi_a = np.where(rec, _vec_log2_1m_pow2(np.where(rec, mi_c, -1.0)), mi_a)
    elif rule is Rule.LOWER:
        mi_a, mi_c = a, c
    else:
        raise ValueError(f"unsupported rule {rule}")

    return np.where(b1, sq_a, mi_a), np.where(b1, sq_c, mi_c)


def _vec_start(z0: float, trials: int):
    a = np.full(trials, float(np.log2(z0)))
    c = np.full(trials, float(np.log1p(-z0)) / _LN2)
    return a, c


# ---------------------------------------------------------------------------
# exact finite distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZDistribution:
    """The exact law of the process after n steps under the uniform path measure.

    Atom values are stored as log2 z so that the deep lower tail stays
    resolvable; the value property and the CSV export convert back to plain
    floats (and underflow to 0 below 2^-1074).  Atoms are merged only on exact
    bit equality of log2 z -- no epsilon merging, which would corrupt tail
    probabilities.
    """

    z0: float
    n: int
    rule: Rule
    log2_values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        lv = np.ascontiguousarray(np.asarray(self.log2_values, dtype=np.float64))
        pr = np.ascontiguousarray(np.asarray(self.probs, dtype=np.float64))
        if lv.shape != pr.shape or lv.ndim != 1 or lv.size == 0:
            raise ValueError("log2_values and probs must be matching 1-D arrays")
        lv.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "log2_values", lv)
        object.__setattr__(self, "probs", pr)

    @property
    def size(self) -> int:
        return self.log2_values.size

    @property
    def values(self) -> np.ndarray:
        return np.exp2(self.log2_values)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(v), float(p)) for v, p in zip(self.values, self.probs)]

    def cdf_at_log2(self, t: float) -> float:
        """P(Z_n <= 2^t); the closed event, boundary atoms count."""
        i = int(np.searchsorted(self.log2_values, t, side="right"))
        return float(self.probs[:i].sum())

    def sf_at_log2(self, t: float) -> float:
        """P(Z_n >= 2^t), boundary atoms included."""
        i = int(np.searchsorted(self.log2_values, t, side="left"))
        return float(self.probs[i:].sum())

    def cdf_at(self, threshold: float) -> float:
        """P(Z_n <= threshold)."""
        if threshold <= 0.0:
            return 0.0
        if threshold >= 1.0:
            return 1.0
        return self.cdf_at_log2(math.log2(threshold))

    def mean(self) -> float:
        return float(np.sum(self.probs * np.exp2(self.log2_values)))

    def interior_mass(self, delta: float) -> float:
        """P(delta < Z_n < 1 - delta), the mass not yet polarized."""
        lo = int(np.searchsorted(self.log2_values, math.log2(delta), side="right"))
        hi = int(np.searchsorted(self.log2_values, math.log2(1.0 - delta), side="left"))
        return float(self.probs[lo:hi].sum())

    def to_csv(self, fp) -> None:
        fp.write(f"# z0={self.z0!r} n={self.n} rule={self.rule.value}\n")
        fp.write("value,prob\n")
        for v, p in zip(self.values, self.probs):
            fp.write(f"{float(v)!r},{float(p)!r}\n")


def _children_log2(vals: np.ndarray, rule: Rule) -> np.ndarray:
    squared = 2.0 * vals
    if rule is Rule.EXTREMAL:
        other = vals + np.log2(2.0 - np.exp2(vals))
    elif rule is Rule.LOWER:
        other = vals
    else:
        other = vals + 1.0
    return np.concatenate((other, squared))


def exact_distribution(
    z0: float, n: int, rule: Rule, cap: int = DEFAULT_ENUM_CAP
) -> ZDistribution:
    """Enumerate all 2^n branch words (each with probability 2^-n).

    Equal atoms are merged by exact bit equality; probabilities are dyadic
    rationals and sum to exactly 1 in binary64 for n <= 24.

    Raises ResourceCapError above the enumeration cap (raise it with
    --enum-cap).
    """
    _require_open_unit(z0)
    if n < 0:
        raise ValueError(f"step count must be nonnegative, got {n}")
    if n > cap:
        raise ResourceCapError(
            f"exact enumeration at n={n} exceeds the enumeration cap ({cap})",
            flag="--enum-cap",
        )
    log2v = np.array([float(np.log2(z0))])
    probs = np.array([1.0])
    for _ in range(n):
        children = _children_log2(log2v, rule)
        child_probs = np.concatenate((probs, probs)) * 0.5
        log2v, inverse = np.unique(children, return_inverse=True)
        probs = np.bincount(inverse, weights=child_probs, minlength=log2v.size)
    return ZDistribution(z0=z0, n=n, rule=rule, log2_values=log2v, probs=probs)


def cdf_at(dist: ZDistribution, threshold: float) -> float:
    """P(Z_n <= threshold) for an exact distribution."""
    return dist.cdf_at(threshold)


# ---------------------------------------------------------------------------
# Monte Carlo functionals and closed-form bounds
# ---------------------------------------------------------------------------

def q_halfmoment(z0: float, n: int, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of E[sqrt(Z_n (1 - Z_n))] for the extremal rule.

    Returns (estimate, standard error); deterministic for a given seed.
    """
    _require_open_unit(z0)
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    rng = np.random.default_rng(seed)
    a, c = _vec_start(z0, trials)
    for _ in range(n):
        bits = rng.integers(0, 2, size=trials, dtype=np.uint8)
        a, c = _vec_step(a, c, bits, Rule.EXTREMAL)
    q = np.exp2(0.5 * (a + c))
    est = float(q.mean())
    err = float(q.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return est, err


def hajek_bound(n: int) -> float:
    """The supermartingale bound E[sqrt(Q_n)] <= (1/2) (3/4)^(n/2)."""
    return 0.5 * 0.75 ** (0.5 * n)


def f_rho(rho: float, n: int) -> float:
    """The smaller root r of r(1-r) = rho^n, or 1 when no root exists.

    Thresholding Z_n at this value is equivalent to thresholding
    Q_n = Z_n (1 - Z_n) at rho^n on the lower branch.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie strictly inside (0, 1), got {rho}")
    x = 4.0 * rho ** n
    if 1.0 - x > 0.0:
        # (1 - sqrt(1 - x)) / 2 in a cancellation-free form
        return x / (2.0 * (1.0 + math.sqrt(1.0 - x)))
    return 1.0


def converse_binomial(z0: float, n: int, beta: float) -> float:
    """Exact P(L + log2 log2 (1/z0) <= n beta) for L ~ Binomial(n, 1/2).

    This is the probability that the hold-on-zero process stays at or above
    2^(-2^(beta n)) after n steps, hence a lower bound on the same tail for
    every in-class process started at z0.
    """
    _require_open_unit(z0)
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if n < 0:
        raise ValueError(f"step count must be nonnegative, got {n}")
    shift = math.log2(math.log2(1.0 / z0))
    t = n * beta - shift
    if t < 0.0:
        return 0.0
    kmax = min(math.floor(t), n)
    total = sum(math.comb(n, k) for k in range(kmax + 1))
    return float(Fraction(total, 1 << n))


def domination_check(z0_low: float, z0_high: float, n: int, seed: int) -> bool:
    """Samplewise ordering along one shared branch word.

    Drives LOWER(z0_low), EXTREMAL(z0_low), DOUBLING(z0_low) and
    EXTREMAL(z0_high) with the same coin flips and checks, at every step,
    LOWER <= EXTREMAL(z0_low) <= min(DOUBLING, 1) and
    EXTREMAL(z0_low) <= EXTREMAL(z0_high).
    """
    if not (0.0 < z0_low <= z0_high < 1.0):
        raise ValueError(f"need 0 < z0_low <= z0_high < 1, got ({z0_low}, {z0_high})")
    word = BranchWord.random(n, seed)
    low = walk(z0_low, word, Rule.LOWER)
    ext = walk(z0_low, word, Rule.EXTREMAL)
    dbl = walk(z0_low, word, Rule.DOUBLING)
    ext_hi = walk(z0_high, word, Rule.EXTREMAL)
    for lo, mid, up, hi in zip(low, ext, dbl, ext_hi):
        if not (lo.log_z <= mid.log_z <= min(up.log_z, 0.0)):
            return False
        if mid.log_z > hi.log_z:
            return False
    return True
