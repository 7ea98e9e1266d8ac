"""Discrete RTT distributions and service confidence levels.

A distribution is a finite list of latency values (the upper edge of each
histogram bin, in ms) with a probability mass per value.  Confidence at a
bound ``tau`` is the mass on values ``<= tau``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TIERS = ("cloud", "fog")
DEFAULT_BIN_WIDTH = 5.0
_PROB_TOL = 1e-9


class InsufficientDataError(ValueError):
    pass


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    tau_ms: float
    gamma: float

    def __post_init__(self):
        if not self.tau_ms > 0:
            raise ValueError(f"service {self.id!r}: tau_ms must be > 0, got {self.tau_ms}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"service {self.id!r}: gamma must be in (0, 1], got {self.gamma}")


@dataclass(frozen=True, eq=False)
class LatencyDistribution:
    bin_edges: np.ndarray
    probs: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float).copy()
        probs = np.asarray(self.probs, dtype=float).copy()
        if edges.ndim != 1 or edges.shape != probs.shape or edges.size == 0:
            raise ValueError("bin_edges and probs must be non-empty 1-d arrays of equal length")
        if np.any(edges < 0) or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be non-negative and strictly increasing")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _PROB_TOL:
            raise ValueError(f"probabilities must be >= 0 and sum to 1 (sum={probs.sum()!r})")
        edges.flags.writeable = False
        probs.flags.writeable = False
        cdf = np.cumsum(probs)
        # the last bin closes the distribution exactly
        cdf[-1] = 1.0
        cdf.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", cdf)

    def __eq__(self, other):
        if not isinstance(other, LatencyDistribution):
            return NotImplemented
        return np.array_equal(self.bin_edges, other.bin_edges) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.bin_edges.tobytes(), self.probs.tobytes()))

    @classmethod
    def from_mapping(cls, mass: dict) -> "LatencyDistribution":
        items = sorted(mass.items())
        return cls(np.array([k for k, _ in items], float), np.array([v for _, v in items], float))

    def confidence(self, tau_ms: float) -> float:
        return confidence(self, tau_ms)

    def mean(self) -> float:
        return float(np.dot(self.bin_edges, self.probs))

    def to_dict(self) -> dict:
        return {"bins": self.bin_edges.tolist(), "probs": self.probs.tolist()}


def confidence(dist: LatencyDistribution, tau_ms: float) -> float:
    """Probability that the latency is at most ``tau_ms``."""
    if tau_ms < 0:
        raise ValueError(f"tau_ms must be >= 0, got {tau_ms}")
    k = np.searchsorted(dist.bin_edges, tau_ms, side="right")
    if k == 0:
        return 0.0
    return float(dist._cdf[k - 1])


def bin_upper_edges(samples, bin_width: float) -> np.ndarray:
    """Map each sample to the upper edge of its ``(k*w, (k+1)*w]`` bin."""
    x = np.asarray(samples, dtype=float)
    return np.ceil(x / bin_width) * bin_width


def from_samples(samples, bin_width: float = DEFAULT_BIN_WIDTH) -> LatencyDistribution:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("cannot build a latency distribution from zero samples")
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("RTT samples must be finite and non-negative")
    edges, counts = np.unique(bin_upper_edges(x, bin_width), return_counts=True)
    return LatencyDistribution(edges, counts / counts.sum())


def sample(dist: LatencyDistribution, rng: np.random.Generator, size=None):
    idx = rng.choice(dist.probs.size, size=size, p=dist.probs)
    if size is None:
        return float(dist.bin_edges[idx])
    return dist.bin_edges[idx]


class LatencyCatalog:
    """Distributions keyed by ``(location, mno, tier)``."""

    def __init__(self, entries: dict | None = None, counts: dict | None = None):
        self._entries: dict[tuple[str, str, str], LatencyDistribution] = {}
        self.counts: dict[tuple[str, str, str], int] = dict(counts or {})
        for key, dist in (entries or {}).items():
            self[key] = dist

    def __setitem__(self, key, dist: LatencyDistribution):
        location, mno, tier = key
        if tier not in TIERS:
            raise ValueError(f"unknown tier {tier!r}; expected one of {TIERS}")
        self._entries[(str(location), str(mno), tier)] = dist

    def __getitem__(self, key) -> LatencyDistribution:
        location, mno, tier = key
        try:
            return self._entries[(str(location), str(mno), tier)]
        except KeyError:
            raise KeyError(f"no {tier} latency distribution for location={location!r}, mno={mno!r}") from None

    def __contains__(self, key) -> bool:
        location, mno, tier = key
        return (str(location), str(mno), tier) in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries))

    def items(self):
        return [(k, self._entries[k]) for k in sorted(self._entries)]

    def pairs(self) -> set[tuple[str, str]]:
        return {(l, m) for l, m, _ in self._entries}

    def check_complete(self, locations=None, mnos=None):
        """Raise if some (location, mno) pair lacks a cloud or fog entry."""
        if locations is None or mnos is None:
            wanted = sorted(self.pairs())
        else:
            wanted = [(str(l), str(m)) for l in locations for m in mnos]
        for l, m in wanted:
            missing = [t for t in TIERS if (l, m, t) not in self._entries]
            if missing:
                raise ValueError(
                    f"(location={l!r}, mno={m!r}) has no {' or '.join(missing)} latency distribution"
                )

    def to_json(self) -> dict:
        profiles = []
        for (l, m, t), dist in self.items():
            entry = {"location": l, "mno": m, "tier": t, **dist.to_dict()}
            if (l, m, t) in self.counts:
                entry["count"] = int(self.counts[(l, m, t)])
            profiles.append(entry)
        return {"profiles": profiles}

    @classmethod
    def from_json(cls, doc: dict) -> "LatencyCatalog":
        cat = cls()
        for i, p in enumerate(doc["profiles"]):
            try:
                key = (p["location"], p["mno"], p["tier"])
                cat[key] = LatencyDistribution(p["bins"], p["probs"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"profiles[{i}]: {exc}") from None
            if "count" in p:
                cat.counts[key] = int(p["count"])
        return cat


TRACE_HEADER = ("location_id", "mno_id", "tier", "rtt_ms")


def read_traces(path) -> dict[tuple[str, str, str], list[float]]:
    """Parse an RTT trace CSV into per-(location, mno, tier) sample lists."""
    samples: dict[tuple[str, str, str], list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise TraceFormatError(f"{path}: line 1: expected header {','.join(TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise TraceFormatError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            loc, mno, tier, rtt = (c.strip() for c in row)
            if tier not in TIERS:
                raise TraceFormatError(f"{path}: line {lineno}: tier must be cloud or fog, got {tier!r}")
            try:
                value = float(rtt)
            except ValueError:
                raise TraceFormatError(f"{path}: line {lineno}: non-numeric rtt_ms {rtt!r}") from None
            if not math.isfinite(value) or value < 0:
                raise TraceFormatError(f"{path}: line {lineno}: rtt_ms must be finite and >= 0, got {rtt!r}")
            samples.setdefault((loc, mno, tier), []).append(value)
    return samples


def ingest_traces(path, bin_width: float = DEFAULT_BIN_WIDTH) -> LatencyCatalog:
    samples = read_traces(Path(path))
    if not samples:
        raise InsufficientDataError(f"{path}: no trace rows")
    cat = LatencyCatalog()
    for key in sorted(samples):
        cat[key] = from_samples(samples[key], bin_width)
        cat.counts[key] = len(samples[key])
    cat.check_complete()
    return cat
