"""Provider-side setup: secret key, public parameters and the encrypted grid.

The area is an m x n grid with 1-based coordinates: ``i`` picks the column
(1..m) and ``j`` the row (1..n). Cell (i, j) is blinded as::

    A[i,j] = g1^i * h1^j * g2^(x^i) * h2^(y^j)
    B[i,j] = e(A[i,j], hf) * M[i,j]

``M[i,j]`` is a fresh random target-group element. It is never used as data
directly. Instead it keys an AEAD layer (HKDF-SHA256 then ChaCha20-Poly1305)
over the real service bytes, so cells can hold arbitrary payloads.
"""

from __future__ import annotations

import dataclasses
import os
from pathlib import Path
from typing import NamedTuple, Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from olbsq import counters
from olbsq.codec import Reader, Writer
from olbsq.errors import DecodeError, IntegrityError
from olbsq.group import (
    DEFAULT_PARAMETER_SET,
    ORDER,
    DualPoint,
    ParameterSet,
    Point,
    RandomSource,
    Side,
    Target,
    default_rng,
    inv,
    pair,
    parameter_set,
    random_dual,
    random_nonzero_scalar,
    random_point,
    random_target,
)

CATALOG_MAGIC = b"OLBSQCAT"
SECRET_KEY_MAGIC = b"OLBSQKEY"
FORMAT_VERSION = 1

_PAYLOAD_INFO = b"olbsq/v1/payload-key"
_NONCE_SIZE = 12


class PowerTriple(NamedTuple):
    """(base^(t^i), base^(1/(a + t^i)), H^(t^i)) for one grid index."""

    power: Point
    signature: Point
    target: Target


@dataclasses.dataclass(frozen=True)
class SecretKey:
    alpha1: int
    alpha2: int
    beta1: int
    beta2: int
    x: int
    y: int
    h_frak: Point

    def __repr__(self) -> str:
        return "SecretKey(<redacted>)"


@dataclasses.dataclass(frozen=True)
class PublicParams:
    """Immutable public parameters. Families are stored 0-based; use the 1-based accessors."""

    m: int
    n: int
    g_frak: Point
    g1: DualPoint
    g2: DualPoint
    h1: DualPoint
    h2: DualPoint
    H: Target
    W1: Point
    W2: Point
    W1p: Point
    W2p: Point
    Gamma1: tuple[Point, ...]
    Gamma2: tuple[Point, ...]
    C: tuple[PowerTriple, ...]
    D: tuple[PowerTriple, ...]
    parameter_set: ParameterSet = DEFAULT_PARAMETER_SET

    def gamma1(self, i: int) -> Point:
        _check_index("i", i, self.m)
        return self.Gamma1[i - 1]

    def gamma2(self, j: int) -> Point:
        _check_index("j", j, self.n)
        return self.Gamma2[j - 1]

    def c(self, i: int) -> PowerTriple:
        _check_index("i", i, self.m)
        return self.C[i - 1]

    def d(self, j: int) -> PowerTriple:
        _check_index("j", j, self.n)
        return self.D[j - 1]


@dataclasses.dataclass(frozen=True)
class EncryptedCatalog:
    m: int
    n: int
    A: tuple[tuple[Point, ...], ...]
    B: tuple[tuple[Target, ...], ...]
    payload: tuple[tuple[bytes, ...], ...]

    def cell(self, i: int, j: int) -> tuple[Point, Target, bytes]:
        _check_index("i", i, self.m)
        _check_index("j", j, self.n)
        return self.A[i - 1][j - 1], self.B[i - 1][j - 1], self.payload[i - 1][j - 1]


@dataclasses.dataclass(frozen=True)
class ServiceCell:
    mask: Target
    payload: bytes


def _check_index(name: str, v: int, bound: int) -> None:
    if not 1 <= v <= bound:
        raise ValueError(f"{name}={v} outside [1, {bound}]")


def _powers(base: int, count: int) -> list[int]:
    """[base^1, ..., base^count] mod ORDER by repeated multiplication."""
    out, acc = [], 1
    for _ in range(count):
        acc = acc * base % ORDER
        out.append(acc)
    return out


def _key_is_usable(sk_scalars: tuple[int, ...], m: int, n: int) -> bool:
    alpha1, alpha2, beta1, beta2, x, y = sk_scalars
    if 0 in sk_scalars:
        return False
    if any((alpha1 + i) % ORDER == 0 for i in range(1, m + 1)):
        return False
    if any((beta1 + j) % ORDER == 0 for j in range(1, n + 1)):
        return False
    if any((alpha2 + xi) % ORDER == 0 for xi in _powers(x, m)):
        return False
    if any((beta2 + yj) % ORDER == 0 for yj in _powers(y, n)):
        return False
    return True


def _kdf(mask: Target) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=_PAYLOAD_INFO).derive(
        mask.to_bytes()
    )


def wrap_payload(mask: Target, payload: bytes, rng: RandomSource | None = None) -> bytes:
    """Encrypt ``payload`` under a key derived from ``mask``. Output is nonce || ciphertext."""
    rng = rng or default_rng()
    nonce = rng.randbytes(_NONCE_SIZE)
    return nonce + ChaCha20Poly1305(_kdf(mask)).encrypt(nonce, bytes(payload), None)


def unwrap_payload(mask: Target, ct: bytes) -> bytes:
    if len(ct) < _NONCE_SIZE + 16:
        raise IntegrityError("payload ciphertext too short")
    try:
        return ChaCha20Poly1305(_kdf(mask)).decrypt(ct[:_NONCE_SIZE], ct[_NONCE_SIZE:], None)
    except InvalidTag as exc:
        raise IntegrityError("payload authentication failed") from exc


def setup(
    m: int,
    n: int,
    services: Sequence[Sequence[bytes]],
    rng: RandomSource | None = None,
    params: ParameterSet | str = DEFAULT_PARAMETER_SET,
) -> tuple[SecretKey, PublicParams, EncryptedCatalog]:
    """Generate the provider key, public parameters and encrypted catalog.

    Args:
        m: Number of columns (i ranges over 1..m).
        n: Number of rows (j ranges over 1..n).
        services: ``services[i-1][j-1]`` is the payload of cell (i, j).
        rng: Randomness source; defaults to the OS CSPRNG.
        params: Parameter set (only BLS12-381 is registered).

    Returns:
        The tuple (SecretKey, PublicParams, EncryptedCatalog).
    """
    if isinstance(params, str):
        params = parameter_set(params)
    if m < 1 or n < 1:
        raise ValueError(f"grid must be at least 1x1, got {m}x{n}")
    if len(services) != m or any(len(col) != n for col in services):
        raise ValueError(f"services must be an {m}x{n} nested sequence")
    rng = rng or default_rng()

    # Generators and masks are sampling, not protocol exponentiations.
    with counters.suspended():
        while True:
            scalars = tuple(random_nonzero_scalar(rng) for _ in range(6))
            if _key_is_usable(scalars, m, n):
                break
        alpha1, alpha2, beta1, beta2, x, y = scalars
        g1, g2, h1, h2 = (random_dual(rng) for _ in range(4))
        g_frak = random_point(Side.LEFT, rng)
        h_frak = random_point(Side.RIGHT, rng)
        masks = [[random_target(rng) for _ in range(n)] for _ in range(m)]

    sk = SecretKey(alpha1, alpha2, beta1, beta2, x, y, h_frak)
    H = pair(g_frak, h_frak)
    xs, ys = _powers(x, m), _powers(y, n)

    pp = PublicParams(
        m=m,
        n=n,
        g_frak=g_frak,
        g1=g1,
        g2=g2,
        h1=h1,
        h2=h2,
        H=H,
        W1=g1.left ** alpha1,
        W2=g2.left ** alpha2,
        W1p=h1.left ** beta1,
        W2p=h2.left ** beta2,
        Gamma1=tuple(g1.right ** inv(alpha1 + i) for i in range(1, m + 1)),
        Gamma2=tuple(h1.right ** inv(beta1 + j) for j in range(1, n + 1)),
        C=tuple(PowerTriple(g2.left ** xi, g2.right ** inv(alpha2 + xi), H ** xi) for xi in xs),
        D=tuple(PowerTriple(h2.left ** yj, h2.right ** inv(beta2 + yj), H ** yj) for yj in ys),
        parameter_set=params,
    )

    A_cols, B_cols, P_cols = [], [], []
    for i in range(1, m + 1):
        A_col, B_col, P_col = [], [], []
        for j in range(1, n + 1):
            a = (g1.left ** i) * (h1.left ** j) * (g2.left ** xs[i - 1]) * (h2.left ** ys[j - 1])
            mask = masks[i - 1][j - 1]
            A_col.append(a)
            B_col.append(pair(a, h_frak) * mask)
            P_col.append(wrap_payload(mask, services[i - 1][j - 1], rng))
        A_cols.append(tuple(A_col))
        B_cols.append(tuple(B_col))
        P_cols.append(tuple(P_col))

    cat = EncryptedCatalog(m, n, tuple(A_cols), tuple(B_cols), tuple(P_cols))
    return sk, pp, cat


def decrypt_direct(sk: SecretKey, pp: PublicParams, cat: EncryptedCatalog, i: int, j: int) -> ServiceCell:
    """Read cell (i, j) with the provider key. Reference oracle for tests."""
    a, b, ct = cat.cell(i, j)
    mask = b / pair(a, sk.h_frak)
    return ServiceCell(mask, unwrap_payload(mask, ct))


def verify_public_params(pp: PublicParams) -> bool:
    """Publicly check the structure of PP with pairings (not counted).

    Checks that each dual generator shares one exponent across both slots, and
    that every Gamma and C/D signature verifies against W1, W1', W2, W2'.
    The targets C[i].3 and D[j].3 cannot be checked without the provider key.
    """
    with counters.suspended():
        base_l = Point.generator(Side.LEFT)
        base_r = Point.generator(Side.RIGHT)
        for dual in (pp.g1, pp.g2, pp.h1, pp.h2):
            if dual.left.is_identity() or pair(dual.left, base_r) != pair(base_l, dual.right):
                return False
        if pp.H.is_identity():
            return False
        gg1 = pair(pp.g1.left, pp.g1.right)
        hh1 = pair(pp.h1.left, pp.h1.right)
        gg2 = pair(pp.g2.left, pp.g2.right)
        hh2 = pair(pp.h2.left, pp.h2.right)
        for i, gamma in enumerate(pp.Gamma1, start=1):
            if pair(pp.W1 * pp.g1.left ** i, gamma) != gg1:
                return False
        for j, gamma in enumerate(pp.Gamma2, start=1):
            if pair(pp.W1p * pp.h1.left ** j, gamma) != hh1:
                return False
        for t in pp.C:
            if pair(pp.W2 * t.power, t.signature) != gg2:
                return False
        for t in pp.D:
            if pair(pp.W2p * t.power, t.signature) != hh2:
                return False
    return True


# ---------------------------------------------------------------- persistence


def _write_public_params(w: Writer, pp: PublicParams) -> None:
    w.point(pp.g_frak)
    for dual in (pp.g1, pp.g2, pp.h1, pp.h2):
        w.point(dual.left).point(dual.right)
    w.target(pp.H)
    for p in (pp.W1, pp.W2, pp.W1p, pp.W2p):
        w.point(p)
    for p in pp.Gamma1 + pp.Gamma2:
        w.point(p)
    for t in pp.C + pp.D:
        w.point(t.power).point(t.signature).target(t.target)


def _read_public_params(r: Reader, m: int, n: int, ps: ParameterSet) -> PublicParams:
    L, R = Side.LEFT, Side.RIGHT
    g_frak = r.point(L)
    duals = [DualPoint(r.point(L), r.point(R)) for _ in range(4)]
    H = r.target()
    W1, W2, W1p, W2p = (r.point(L) for _ in range(4))
    Gamma1 = tuple(r.point(R) for _ in range(m))
    Gamma2 = tuple(r.point(R) for _ in range(n))
    C = tuple(PowerTriple(r.point(L), r.point(R), r.target()) for _ in range(m))
    D = tuple(PowerTriple(r.point(L), r.point(R), r.target()) for _ in range(n))
    return PublicParams(m, n, g_frak, *duals, H, W1, W2, W1p, W2p, Gamma1, Gamma2, C, D, ps)


def _read_header(r: Reader, magic: bytes) -> tuple[int, int, ParameterSet]:
    if r.raw(len(magic)) != magic:
        raise DecodeError("bad magic")
    version = r.u8()
    if version != FORMAT_VERSION:
        raise DecodeError(f"unsupported format version {version}")
    m, n = r.u32(), r.u32()
    if m < 1 or n < 1:
        raise DecodeError("grid dimensions must be positive")
    try:
        ps = parameter_set(r.u8())
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    return m, n, ps


def _header(w: Writer, magic: bytes, m: int, n: int, ps: ParameterSet) -> None:
    w.raw(magic)
    w.u8(FORMAT_VERSION).u32(m).u32(n).u8(ps.curve_id)


def encode_public_params(pp: PublicParams) -> bytes:
    w = Writer()
    _header(w, CATALOG_MAGIC, pp.m, pp.n, pp.parameter_set)
    _write_public_params(w, pp)
    w.u32(0)  # no cell records
    return w.getvalue()


def encode_catalog(pp: PublicParams, cat: EncryptedCatalog) -> bytes:
    """Header, PP fields in declaration order, then cells row by row (j outer, i inner)."""
    if (pp.m, pp.n) != (cat.m, cat.n):
        raise ValueError("catalog and parameter dimensions differ")
    w = Writer()
    _header(w, CATALOG_MAGIC, pp.m, pp.n, pp.parameter_set)
    _write_public_params(w, pp)
    w.u32(pp.m * pp.n)
    for j in range(pp.n):
        for i in range(pp.m):
            w.point(cat.A[i][j]).target(cat.B[i][j]).blob(cat.payload[i][j])
    return w.getvalue()


def decode_catalog(data: bytes) -> tuple[PublicParams, EncryptedCatalog | None]:
    """Inverse of :func:`encode_catalog`; a PP-only file yields ``None`` for the catalog."""
    with counters.suspended():
        r = Reader(data)
        m, n, ps = _read_header(r, CATALOG_MAGIC)
        pp = _read_public_params(r, m, n, ps)
        count = r.u32()
        if count == 0:
            r.done()
            return pp, None
        if count != m * n:
            raise DecodeError(f"expected {m * n} cell records, found {count}")
        A = [[None] * n for _ in range(m)]
        B = [[None] * n for _ in range(m)]
        P = [[None] * n for _ in range(m)]
        for j in range(n):
            for i in range(m):
                A[i][j] = r.point(Side.LEFT)
                B[i][j] = r.target()
                P[i][j] = r.blob()
        r.done()
    cat = EncryptedCatalog(m, n, tuple(map(tuple, A)), tuple(map(tuple, B)), tuple(map(tuple, P)))
    return pp, cat


def encode_secret_key(sk: SecretKey, m: int, n: int, ps: ParameterSet = DEFAULT_PARAMETER_SET) -> bytes:
    w = Writer()
    _header(w, SECRET_KEY_MAGIC, m, n, ps)
    for s in (sk.alpha1, sk.alpha2, sk.beta1, sk.beta2, sk.x, sk.y):
        w.scalar(s)
    w.point(sk.h_frak)
    return w.getvalue()


def decode_secret_key(data: bytes) -> tuple[SecretKey, int, int]:
    r = Reader(data)
    m, n, _ = _read_header(r, SECRET_KEY_MAGIC)
    scalars = [r.scalar() for _ in range(6)]
    sk = SecretKey(*scalars, r.point(Side.RIGHT))
    r.done()
    if not _key_is_usable(tuple(scalars), m, n):
        raise DecodeError("secret key has a zero denominator for this grid")
    return sk, m, n


def save_catalog(path: str | Path, pp: PublicParams, cat: EncryptedCatalog | None = None) -> None:
    data = encode_catalog(pp, cat) if cat is not None else encode_public_params(pp)
    Path(path).write_bytes(data)


def load_catalog(path: str | Path) -> tuple[PublicParams, EncryptedCatalog | None]:
    return decode_catalog(Path(path).read_bytes())


def save_secret_key(path: str | Path, sk: SecretKey, pp: PublicParams) -> None:
    """Write the key readable by the owner only (mode 0600)."""
    data = encode_secret_key(sk, pp.m, pp.n, pp.parameter_set)
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.chmod(path, 0o600)


def load_secret_key(path: str | Path) -> tuple[SecretKey, int, int]:
    return decode_secret_key(Path(path).read_bytes())


def catalog_size_report(pp: PublicParams) -> dict[str, int]:
    """Element counts of the published parameters plus grid, by kind."""
    w = Writer()
    _write_public_params(w, pp)
    tally = dict(w.tally)
    tally["G1"] = tally.get("G1", 0) + pp.m * pp.n
    tally["GT"] = tally.get("GT", 0) + pp.m * pp.n
    return tally


__all__ = [
    "EncryptedCatalog",
    "PowerTriple",
    "PublicParams",
    "SecretKey",
    "ServiceCell",
    "decode_catalog",
    "decode_secret_key",
    "decrypt_direct",
    "encode_catalog",
    "encode_public_params",
    "encode_secret_key",
    "load_catalog",
    "load_secret_key",
    "save_catalog",
    "save_secret_key",
    "setup",
    "unwrap_payload",
    "verify_public_params",
    "wrap_payload",
]
