"""Polar coding over the binary erasure channel.

Construction is exact for the BEC: the Bhattacharyya parameter of every
synthesized channel follows the closed recursion eps -> 2 eps - eps^2
(degraded step) / eps -> eps^2 (upgraded step).  Synthesized channel i is
identified with the branch word read off the binary expansion of i, most
significant bit first, bit 0 taking the degraded step and bit 1 the upgraded
step -- so larger indices are statistically more reliable and successive
cancellation decodes channels in plain index order.

The encoder applies the recursive butterfly x = u G: one stage maps each
pair (a, b) to (a xor b, b), Theta(N log N) total work.  The erasure-channel
decoder passes exact three-valued messages (0 / 1 / erased) through the same
recursion; an information bit whose belief is still erased is a decode
failure, never a guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bdmc import Channel
from .errors import ResourceCapError
from .zprocess import BranchWord

ERASED = -1  # erasure mark in received words (int8 convention)

DEFAULT_SPECTRUM_CAP = 26

_WILSON_Z = 1.959963984540054  # two-sided 95%


def index_to_word(index: int, n: int) -> BranchWord:
    """Branch word of synthesized channel i: binary expansion of i, MSB first."""
    return BranchWord.from_index(index, n)


def word_to_index(word: BranchWord) -> int:
    return word.to_index()


def bec_z_spectrum(eps: float, n: int, cap: int = DEFAULT_SPECTRUM_CAP) -> np.ndarray:
    """Exact erasure probabilities of all 2^n synthesized channels of BEC(eps).

    In-place doubling recursion, O(N) memory.  Raises ResourceCapError beyond
    the stage cap (raise it with --spectrum-cap).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"erasure probability must lie inside (0, 1), got {eps}")
    if n < 0:
        raise ValueError(f"stage count must be nonnegative, got {n}")
    if n > cap:
        raise ResourceCapError(
            f"spectrum at n={n} stages exceeds the stage cap ({cap})",
            flag="--spectrum-cap",
        )
    v = np.empty(1 << n)
    v[0] = eps
    size = 1
    for _ in range(n):
        t = v[:size].copy()
        v[0 : 2 * size : 2] = 2.0 * t - t * t
        v[1 : 2 * size : 2] = t * t
        size *= 2
    return v


@dataclass(frozen=True)
class CodeSpec:
    """A constructed polar code: block length 2^n, info set, per-index Z values."""

    n: int
    block_length: int
    eps: float
    rate: float
    info_set: np.ndarray
    z_values: np.ndarray
    frozen_value: int = 0

    def __post_init__(self):
        info = np.ascontiguousarray(np.asarray(self.info_set, dtype=np.int64))
        z = np.ascontiguousarray(np.asarray(self.z_values, dtype=np.float64))
        info.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "z_values", z)

    @property
    def k(self) -> int:
        return int(self.info_set.size)

    @property
    def gamma(self) -> float:
        """Largest Z over the information set."""
        if self.k == 0:
            return 0.0
        return float(self.z_values[self.info_set].max())

    @property
    def union_bound(self) -> float:
        """Sum of Z over the information set; an upper bound on block error."""
        return float(self.z_values[self.info_set].sum())

    @property
    def frozen_set(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.block_length), self.info_set)

    @property
    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.block_length, dtype=bool)
        mask[self.info_set] = True
        return mask


def smallest_z_indices(z_values: np.ndarray, k: int) -> np.ndarray:
    """The k indices with the smallest Z, ties broken toward the lower index."""
    order = np.argsort(z_values, kind="stable")
    return np.sort(order[:k])


def construct(
    eps: float, n: int, rate: float, cap: int = DEFAULT_SPECTRUM_CAP
) -> CodeSpec:
    """Build the rate-floor(rate*N)/N code with the K most reliable indices.

    rate = 1 is allowed as the full-set limit (every index carries data).
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie inside (0, 1], got {rate}")
    z = bec_z_spectrum(eps, n, cap=cap)
    big_n = 1 << n
    k = int(math.floor(rate * big_n))
    return CodeSpec(
        n=n,
        block_length=big_n,
        eps=eps,
        rate=k / big_n,
        info_set=smallest_z_indices(z, k),
        z_values=z,
    )


def to_json_dict(spec: CodeSpec) -> dict:
    return {
        "n": spec.n,
        "eps": spec.eps,
        "rate": spec.rate,
        "info_set": [int(i) for i in spec.info_set],
        "gamma": spec.gamma,
        "union_bound": spec.union_bound,
    }


def from_json_dict(data: dict) -> CodeSpec:
    n = int(data["n"])
    eps = float(data["eps"])
    info = np.asarray(sorted(int(i) for i in data["info_set"]), dtype=np.int64)
    big_n = 1 << n
    if info.size and (info[0] < 0 or info[-1] >= big_n):
        raise ValueError("info_set indices out of range")
    if np.unique(info).size != info.size:
        raise ValueError("info_set indices must be distinct")
    return CodeSpec(
        n=n,
        block_length=big_n,
        eps=eps,
        rate=info.size / big_n,
        info_set=info,
        z_values=bec_z_spectrum(eps, n),
    )


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _butterfly_rows(u: np.ndarray) -> np.ndarray:
    """x = u G applied to each row of a (T, N) array, N a power of two."""
    x = np.ascontiguousarray(u, dtype=np.uint8)
    rows, big_n = x.shape
    bs = 2
    while bs <= big_n:
        h = bs // 2
        blk = x.reshape(-1, bs)
        out = np.empty_like(blk)
        out[:, 0::2] = blk[:, :h] ^ blk[:, h:]
        out[:, 1::2] = blk[:, h:]
        x = out.reshape(rows, big_n)
        bs *= 2
    return x


def _embed_messages(spec: CodeSpec, messages: np.ndarray) -> np.ndarray:
    u = np.zeros((messages.shape[0], spec.block_length), dtype=np.uint8)
    u += np.uint8(spec.frozen_value)
    u[:, spec.info_set] = messages
    return u


def encode(spec: CodeSpec, message) -> np.ndarray:
    """Encode K information bits into an N-bit codeword."""
    msg = np.asarray(message, dtype=np.uint8)
    if msg.shape != (spec.k,):
        raise ValueError(f"message must have length {spec.k}, got shape {msg.shape}")
    if msg.size and msg.max() > 1:
        raise ValueError("message bits must be 0 or 1")
    return _butterfly_rows(_embed_messages(spec, msg[None, :]))[0]


# ---------------------------------------------------------------------------
# successive cancellation decoding over the erasure channel
# ---------------------------------------------------------------------------

def _sc_decode_batch(spec: CodeSpec, received: np.ndarray):
    """Decode each row of a (T, N) received array with values {0, 1, ERASED}.

    Returns (messages, failed).  Rows flagged as failed had some information
    bit still erased when its turn came; their message content is arbitrary.
    """
    rec = np.ascontiguousarray(received, dtype=np.int8)
    trials, big_n = rec.shape
    if big_n != spec.block_length:
        raise ValueError(f"received words must have length {spec.block_length}")
    info_mask = spec.info_mask
    u = np.empty((trials, big_n), dtype=np.int8)
    failed = np.zeros(trials, dtype=bool)
    frozen = np.int8(spec.frozen_value)

    def node(beliefs: np.ndarray, lo: int) -> np.ndarray:
        size = beliefs.shape[1]
        if size == 1:
            if info_mask[lo]:
                bit = beliefs[:, 0]
                erased = bit < 0
                failed[erased] = True
                bit = np.where(erased, np.int8(0), bit)
            else:
                bit = np.full(trials, frozen, dtype=np.int8)
            u[:, lo] = bit
            return bit[:, None]
        y1 = beliefs[:, 0::2]
        y2 = beliefs[:, 1::2]
        minus = np.where((y1 >= 0) & (y2 >= 0), y1 ^ y2, np.int8(ERASED))
        a = node(minus, lo)
        plus = np.where(y2 >= 0, y2, np.where(y1 >= 0, y1 ^ a, np.int8(ERASED)))
        b = node(plus, lo + size // 2)
        x = np.empty_like(beliefs)
        x[:, 0::2] = a ^ b
        x[:, 1::2] = b
        return x

    node(rec, 0)
    return u[:, spec.info_set].astype(np.uint8), failed


def sc_decode_bec(spec: CodeSpec, received) -> np.ndarray | None:
    """Successive cancellation over the BEC; None signals a decode failure.

    received holds N symbols in {0, 1, ERASED}.  Failure is a result, not a
    fault: it means some information bit could not be resolved (the decoder
    never guesses).
    """
    rec = np.asarray(received, dtype=np.int8)
    if rec.shape != (spec.block_length,):
        raise ValueError(f"received word must have length {spec.block_length}")
    messages, failed = _sc_decode_batch(spec, rec[None, :])
    return None if failed[0] else messages[0]


# ---------------------------------------------------------------------------
# likelihood-domain SC over a general small DMC (cross-checking tool)
# ---------------------------------------------------------------------------

def sc_decode_dmc(
    channel: Channel, info_set, received_symbols, n: int, frozen_value: int = 0
) -> np.ndarray:
    """SC decoding over an arbitrary B-DMC in the likelihood domain, n <= 4.

    received_symbols are indices into the channel's output alphabet, one per
    use.  Ties at an information bit are resolved toward 0 (unlike the
    erasure decoder, which refuses); this routine exists to cross-check the
    production BEC decoder on small blocks.
    """
    if n > 4:
        raise ValueError("likelihood-domain SC is a cross-check tool, capped at n=4")
    big_n = 1 << n
    symbols = np.asarray(received_symbols, dtype=np.int64)
    if symbols.shape != (big_n,):
        raise ValueError(f"need {big_n} received symbols, got shape {symbols.shape}")
    info_mask = np.zeros(big_n, dtype=bool)
    info_mask[np.asarray(info_set, dtype=np.int64)] = True
    beliefs = channel.probs[symbols]  # (N, 2) likelihood pairs
    u = np.empty(big_n, dtype=np.uint8)

    def node(bel: np.ndarray, lo: int) -> np.ndarray:
        size = bel.shape[0]
        if size == 1:
            if info_mask[lo]:
                bit = 0 if bel[0, 0] >= bel[0, 1] else 1
            else:
                bit = frozen_value
            u[lo] = bit
            return np.array([bit], dtype=np.uint8)
        y1 = bel[0::2]
        y2 = bel[1::2]
        minus = np.empty((size // 2, 2))
        minus[:, 0] = y1[:, 0] * y2[:, 0] + y1[:, 1] * y2[:, 1]
        minus[:, 1] = y1[:, 1] * y2[:, 0] + y1[:, 0] * y2[:, 1]
        a = node(_norm_rows(minus), lo)
        idx = np.arange(size // 2)
        plus = np.empty((size // 2, 2))
        plus[:, 0] = y1[idx, a] * y2[:, 0]
        plus[:, 1] = y1[idx, 1 - a] * y2[:, 1]
        b = node(_norm_rows(plus), lo + size // 2)
        x = np.empty(size, dtype=np.uint8)
        x[0::2] = a ^ b
        x[1::2] = b
        return x

    node(beliefs, 0)
    return u[np.asarray(info_set, dtype=np.int64)]


def _norm_rows(pairs: np.ndarray) -> np.ndarray:
    s = pairs.sum(axis=1, keepdims=True)
    return np.divide(pairs, s, out=pairs, where=s > 0)


# ---------------------------------------------------------------------------
# block error rate simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlerResult:
    """Outcome of a block error Monte Carlo run with its Wilson 95% interval."""

    trials: int
    failures: int
    bler: float
    ci_low: float
    ci_high: float

    def to_csv(self, fp) -> None:
        fp.write("trial_count,failures,bler,ci_low,ci_high\n")
        fp.write(
            f"{self.trials},{self.failures},{self.bler!r},"
            f"{self.ci_low!r},{self.ci_high!r}\n"
        )


def wilson_interval(failures: int, trials: int, z: float = _WILSON_Z):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = failures / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = (
        z
        * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
        / denom
    )
    return max(0.0, center - half), min(1.0, center + half)


def simulate_bler(
    spec: CodeSpec,
    eps: float,
    trials: int,
    seed: int,
    threads: int = 1,
    chunk: int = 1 << 15,
) -> BlerResult:
    """Monte Carlo block error rate under i.i.d. erasures.

    A trial fails iff the decoder reports failure or the decoded message
    mismatches.  Deterministic for a given seed, independently of `threads`
    (work is split into fixed chunks with derived seeds and the failure
    counts are summed in chunk order).
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1), got {eps}")
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    sizes = [chunk] * (trials // chunk)
    if trials % chunk:
        sizes.append(trials % chunk)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run_chunk(args) -> int:
        ss, size = args
        rng = np.random.default_rng(ss)
        messages = rng.integers(0, 2, size=(size, spec.k), dtype=np.uint8)
        codewords = _butterfly_rows(_embed_messages(spec, messages))
        erased = rng.random((size, spec.block_length)) < eps
        received = np.where(erased, np.int8(ERASED), codewords.astype(np.int8))
        decoded, failed = _sc_decode_batch(spec, received)
        bad = failed | (decoded != messages).any(axis=1)
        return int(bad.sum())

    jobs = list(zip(seeds, sizes))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            failures = sum(pool.map(run_chunk, jobs))
    else:
        failures = sum(run_chunk(job) for job in jobs)

    lo, hi = wilson_interval(failures, trials)
    return BlerResult(trials, failures, failures / trials, lo, hi)
