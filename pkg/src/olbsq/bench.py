"""Operation counting and cost reports against the published cost tables.

Counters are logical: one per exponentiation, pairing or hash that appears in
a protocol formula. Sampling (generators, masks, proof randomness drawn by
hash-to-curve) is not counted. Because the dual-slot generators are produced
at sampling time, no formula is evaluated twice, so logical and backend
operation counts coincide.

Computation formulas (E: source exponentiation, Et: target exponentiation,
P: pairing, Hs: hash)::

    setup          (4+3m+3n+4mn)E + (m+n)Et + (1+mn)P
    user query     16E + 17Et + 15P + 13Hs
    user retrieve  3klE + 2(l+k+lk)Et + 2(l+k+lk)P + 2klHs
    provider       (11+3kl)E + (33+2kl)Et + (27+4kl)P + (13+2kl)Hs

Communication formulas, in element counts (G: source group, GT, Zp)::

    setup            (10+3m+3n+mn)G + (1+m+n+mn)GT
    user->provider   12G + 16GT + 36Zp
    provider->user   (1+3kl)G + (2+2kl+l+k)GT + (1+4kl)Zp
"""

from __future__ import annotations

import dataclasses
import enum
from collections import Counter
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from olbsq import counters
from olbsq.catalog import catalog_size_report, setup
from olbsq.counters import OpCounts
from olbsq.group import RandomSource, default_rng
from olbsq.messages import (
    encode_key_bundle,
    encode_provider_proof,
    encode_query,
    key_bundle_element_tally,
    query_element_tally,
)
from olbsq.transfer import decrypt_cells, derive_keys, recover_services
from olbsq.zkp import build_query, prove_sp1, prove_sp2, verify_query, verify_sp1

T = TypeVar("T")

METRICS = ("exp_source", "exp_target", "pairings", "hashes")
ELEMENT_KINDS = ("G", "GT", "Zp")


class Region(enum.Enum):
    SETUP = "setup"
    USER_QUERY = "user_query"
    USER_RETRIEVE = "user_retrieve"
    PROVIDER = "provider"


class Link(enum.Enum):
    SETUP = "setup"
    USER_TO_PROVIDER = "user_to_provider"
    PROVIDER_TO_USER = "provider_to_user"


def traced(region: Region, thunk: Callable[[], T]) -> tuple[T, OpCounts]:
    """Run ``thunk`` inside a fresh counting region; return its result and the counts."""
    with counters.counting() as counts:
        result = thunk()
    return result, counts


def trace(region: Region, thunk: Callable[[], object]) -> OpCounts:
    """Exact operation counts for one region. Nested tracing raises RuntimeError."""
    return traced(region, thunk)[1]


# --------------------------------------------------------- published formulas


def published_computation(region: Region, m: int, n: int, l: int, k: int) -> dict[str, int]:
    kl = k * l
    table = {
        Region.SETUP: (4 + 3 * m + 3 * n + 4 * m * n, m + n, 1 + m * n, 0),
        Region.USER_QUERY: (16, 17, 15, 13),
        Region.USER_RETRIEVE: (3 * kl, 2 * (l + k + kl), 2 * (l + k + kl), 2 * kl),
        Region.PROVIDER: (11 + 3 * kl, 33 + 2 * kl, 27 + 4 * kl, 13 + 2 * kl),
    }
    return dict(zip(METRICS, table[region]))


def published_communication(link: Link, m: int, n: int, l: int, k: int) -> dict[str, int]:
    kl = k * l
    table = {
        Link.SETUP: (10 + 3 * m + 3 * n + m * n, 1 + m + n + m * n, 0),
        Link.USER_TO_PROVIDER: (12, 16, 36),
        Link.PROVIDER_TO_USER: (1 + 3 * kl, 2 + 2 * kl + l + k, 1 + 4 * kl),
    }
    return dict(zip(ELEMENT_KINDS, table[link]))


def _merge_sides(tally: Counter) -> dict[str, int]:
    return {"G": tally.get("G1", 0) + tally.get("G2", 0), "GT": tally.get("GT", 0), "Zp": tally.get("Zp", 0)}


# --------------------------------------------------------------- measuring


@dataclasses.dataclass
class Measurement:
    m: int
    n: int
    l: int
    k: int
    counts: dict[Region, OpCounts]
    elements: dict[Link, dict[str, int]]
    decrypt_counts: OpCounts

    @property
    def variables(self) -> dict[str, int]:
        return {"m": self.m, "n": self.n, "l": self.l, "k": self.k}


def measure(
    m: int, n: int, l: int, k: int, rng: RandomSource | None = None, start: tuple[int, int] = (1, 1)
) -> Measurement:
    """Run one full session with every region traced.

    ``decrypt_counts`` isolates the unblinding step inside the retrieve
    region (the retrieve region also verifies the key proof).
    """
    rng = rng or default_rng()
    i, j = start
    plain = [[b""] * n for _ in range(m)]
    (sk, pp, cat), c_setup = traced(Region.SETUP, lambda: setup(m, n, plain, rng))

    proof1, c_sp1 = traced(Region.PROVIDER, lambda: prove_sp1(sk.h_frak, pp, rng))

    def user_query():
        if not verify_sp1(pp, proof1):
            raise RuntimeError("provider proof rejected")
        return build_query(pp, i, j, l, k, rng)

    (state, omega, proof_u), c_query = traced(Region.USER_QUERY, user_query)

    def provider():
        if not verify_query(pp, omega, proof_u):
            raise RuntimeError("query proof rejected")
        keys = derive_keys(sk, pp, omega)
        return keys, prove_sp2(sk, pp, omega, keys, rng)

    (keys, proof2), c_provider = traced(Region.PROVIDER, provider)
    _, c_retrieve = traced(Region.USER_RETRIEVE, lambda: recover_services(state, pp, keys, proof2, cat, omega))
    _, c_decrypt = traced(Region.USER_RETRIEVE, lambda: decrypt_cells(state, pp, keys, cat))

    c_query.bytes_sent_user = len(encode_query(omega, proof_u))
    c_provider = c_sp1 + c_provider
    c_provider.bytes_sent_provider = len(encode_provider_proof(proof1)) + len(encode_key_bundle(keys, proof2))

    return Measurement(
        m, n, l, k,
        counts={
            Region.SETUP: c_setup,
            Region.USER_QUERY: c_query,
            Region.USER_RETRIEVE: c_retrieve,
            Region.PROVIDER: c_provider,
        },
        elements={
            Link.SETUP: _merge_sides(Counter(catalog_size_report(pp))),
            Link.USER_TO_PROVIDER: _merge_sides(query_element_tally(omega, proof_u)),
            Link.PROVIDER_TO_USER: _merge_sides(key_bundle_element_tally(keys, proof2)),
        },
        decrypt_counts=c_decrypt,
    )


# ------------------------------------------------------------------ fitting


TERMS = {
    "grid": ("1", "m", "n", "mn"),
    "query": ("1", "l", "k", "lk"),
}


def _term_value(term: str, v: dict[str, int]) -> int:
    out = 1
    for ch in term:
        if ch != "1":
            out *= v[ch]
    return out


@dataclasses.dataclass(frozen=True)
class AffineFit:
    terms: tuple[str, ...]
    coefficients: tuple[float, ...]
    max_residual: float

    def formula(self) -> str:
        out = ""
        for term, c in zip(self.terms, self.coefficients):
            if abs(c) < 1e-9:
                continue
            mag = abs(c)
            c_txt = str(int(round(mag))) if abs(mag - round(mag)) < 1e-6 else f"{mag:.3f}"
            piece = c_txt if term == "1" else (term if c_txt == "1" else f"{c_txt}{term}")
            if not out:
                out = piece if c > 0 else f"-{piece}"
            else:
                out += f" + {piece}" if c > 0 else f" - {piece}"
        return out or "0"

    def exact_integers(self) -> bool:
        return self.max_residual < 1e-6 and all(abs(c - round(c)) < 1e-6 for c in self.coefficients)


def fit_affine(samples: Sequence[tuple[dict[str, int], float]], terms: Iterable[str]) -> AffineFit:
    """Least-squares fit of value ~ sum(coef * term) over the samples."""
    terms = tuple(terms)
    X = np.array([[_term_value(t, v) for t in terms] for v, _ in samples], dtype=float)
    y = np.array([val for _, val in samples], dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.max(np.abs(X @ coef - y))) if len(y) else 0.0
    return AffineFit(terms, tuple(float(c) for c in coef), resid)


DEFAULT_GRID_SWEEP = ((1, 1), (2, 3), (3, 2), (4, 4), (2, 2))
DEFAULT_QUERY_SWEEP = ((1, 1), (1, 2), (2, 1), (2, 2), (3, 2), (2, 3))


def sweep(
    rng: RandomSource | None = None,
    grid_sizes: Sequence[tuple[int, int]] = DEFAULT_GRID_SWEEP,
    query_sizes: Sequence[tuple[int, int]] = DEFAULT_QUERY_SWEEP,
    query_grid: tuple[int, int] = (4, 4),
) -> dict[tuple[str, str], AffineFit]:
    """Fit every counter of every region over a parameter sweep.

    Setup and setup communication are fitted in (m, n, mn); the transfer
    regions in (l, k, lk) on a fixed grid. Keys are (region or link, metric).
    """
    rng = rng or default_rng()
    samples: dict[tuple[str, str], list] = {}

    def add(key, variables, value):
        samples.setdefault(key, []).append((variables, value))

    for m, n in grid_sizes:
        plain = [[b""] * n for _ in range(m)]
        (_, pp, _), c = traced(Region.SETUP, lambda: setup(m, n, plain, rng))
        v = {"m": m, "n": n}
        for metric in METRICS:
            add((Region.SETUP.value, metric), v, getattr(c, metric))
        for kind, count in _merge_sides(Counter(catalog_size_report(pp))).items():
            add((Link.SETUP.value, kind), v, count)

    qm, qn = query_grid
    for l, k in query_sizes:
        meas = measure(qm, qn, l, k, rng)
        v = meas.variables
        for region in (Region.USER_QUERY, Region.USER_RETRIEVE, Region.PROVIDER):
            for metric in METRICS:
                add((region.value, metric), v, getattr(meas.counts[region], metric))
        for metric in METRICS:
            add(("user_decrypt", metric), v, getattr(meas.decrypt_counts, metric))
        for link in (Link.USER_TO_PROVIDER, Link.PROVIDER_TO_USER):
            for kind, count in meas.elements[link].items():
                add((link.value, kind), v, count)
        add(("user_query", "bytes_sent_user"), v, meas.counts[Region.USER_QUERY].bytes_sent_user)
        add(("provider", "bytes_sent_provider"), v, meas.counts[Region.PROVIDER].bytes_sent_provider)

    grid_keys = {Region.SETUP.value, Link.SETUP.value}
    return {
        key: fit_affine(pts, TERMS["grid"] if key[0] in grid_keys else TERMS["query"])
        for key, pts in samples.items()
    }


# ---------------------------------------------------------------- reporting


@dataclasses.dataclass(frozen=True)
class ComparisonRow:
    section: str  # "computation" or "communication"
    scope: str  # region or link name
    metric: str
    measured: int
    published: int

    @property
    def match(self) -> bool:
        return self.measured == self.published


@dataclasses.dataclass
class Report:
    m: int
    n: int
    l: int
    k: int
    rows: list[ComparisonRow]
    bytes_sent: dict[str, int]
    fits: dict[tuple[str, str], AffineFit] = dataclasses.field(default_factory=dict)

    def mismatches(self) -> list[ComparisonRow]:
        return [r for r in self.rows if not r.match]

    def key_values(self) -> list[str]:
        lines = []
        for r in self.rows:
            lines.append(f"{r.metric}({r.scope})={r.measured}")
            lines.append(f"table.{r.metric}({r.scope})={r.published}")
        for name, size in self.bytes_sent.items():
            lines.append(f"bytes({name})={size}")
        for (scope, metric), fit in sorted(self.fits.items()):
            lines.append(f"fit.{metric}({scope})={fit.formula()}")
        return lines

    def format(self) -> str:
        head = f"cost comparison for m={self.m} n={self.n} l={self.l} k={self.k}"
        out = [head, "=" * len(head)]
        out.append(f"{'section':<14}{'scope':<18}{'metric':<12}{'measured':>10}{'table':>10}  status")
        for r in self.rows:
            status = "match" if r.match else "MISMATCH"
            fit = self.fits.get((r.scope, r.metric))
            if fit is not None and not r.match:
                status += f"  measured form: {fit.formula()}"
            out.append(f"{r.section:<14}{r.scope:<18}{r.metric:<12}{r.measured:>10}{r.published:>10}  {status}")
        out.append("")
        for name, size in self.bytes_sent.items():
            out.append(f"{name}: {size} bytes on the wire")
        out.append("")
        out.extend(self.key_values())
        return "\n".join(out)


def compare_tables(
    meas: Measurement, fits: dict[tuple[str, str], AffineFit] | None = None
) -> Report:
    """Line up measured counters with the table formulas at the measured parameters.

    Mismatches are kept in the report; when ``fits`` is given, each mismatched
    row also shows the closed form fitted over the sweep.
    """
    m, n, l, k = meas.m, meas.n, meas.l, meas.k
    rows = []
    for region, counts in meas.counts.items():
        published = published_computation(region, m, n, l, k)
        for metric in METRICS:
            rows.append(ComparisonRow("computation", region.value, metric, getattr(counts, metric), published[metric]))
    for link, measured in meas.elements.items():
        published = published_communication(link, m, n, l, k)
        for kind in ELEMENT_KINDS:
            rows.append(ComparisonRow("communication", link.value, kind, measured[kind], published[kind]))
    bytes_sent = {
        "user_to_provider": meas.counts[Region.USER_QUERY].bytes_sent_user,
        "provider_to_user": meas.counts[Region.PROVIDER].bytes_sent_provider,
    }
    return Report(m, n, l, k, rows, bytes_sent, dict(fits or {}))
