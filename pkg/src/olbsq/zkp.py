"""Non-interactive proofs for the transfer protocol (Fiat-Shamir over SHA-512).

Three proof systems:

* ``sp1``: the provider knows hf with H = e(gf, hf).
* ``query``: the user's commitments open to a start point (i, j) and a
  rectangle (l, k) that lies inside the grid. Membership is shown through
  Boneh-Boyen signatures Gamma1[i], Gamma2[j], Gamma1[i+l], Gamma2[j+k].
  Twelve relations, each with its own challenge over a pair of commitments.
* ``sp2``: every key K, L was derived from the committed query with the
  provider's (x, y, hf).

Challenges hash tagged element encodings (see :func:`olbsq.group.transcript`)
under a per-system domain tag. Each proof carries a fresh 32-byte nonce.

Pairing slots: gf, W1, W2, W1', W2', E1, E2, F1, J1 and K sit on the left;
hf, the Gamma families, C[.,2], D[.,2], F2, J2 and I1..I4 sit on the right.
g1, g2, h1, h2 exist on both sides.
"""

from __future__ import annotations

import dataclasses
from typing import TYPE_CHECKING

from olbsq.catalog import PublicParams
from olbsq.group import (
    ORDER,
    Point,
    RandomSource,
    Side,
    Target,
    default_rng,
    hash_to_scalar,
    pair,
    random_nonzero_scalar,
    random_point,
    random_scalar,
    transcript,
)

if TYPE_CHECKING:
    from olbsq.transfer import KeyBundle

NONCE_SIZE = 32
DOMAIN_SP1 = b"olbsq/v1/proof/provider-key"
DOMAIN_QUERY = b"olbsq/v1/proof/query"
DOMAIN_SP2 = b"olbsq/v1/proof/derived-keys"


def _challenge(domain: bytes, *items) -> int:
    return hash_to_scalar(domain, transcript(*items))


def _is(p, side: Side) -> bool:
    return isinstance(p, Point) and p.side is side


# ------------------------------------------------------------- provider key


@dataclasses.dataclass(frozen=True)
class ProofSP1:
    H_prime: Target
    c: int
    h_hat: Point
    msg: bytes


def prove_sp1(h_frak: Point, pp: PublicParams, rng: RandomSource | None = None) -> ProofSP1:
    """Schnorr-style proof of knowledge of hf behind pp.H."""
    rng = rng or default_rng()
    h_rand = random_point(Side.RIGHT, rng)
    msg = rng.randbytes(NONCE_SIZE)
    H_prime = pair(pp.g_frak, h_rand)
    c = _challenge(DOMAIN_SP1, pp.H, H_prime, msg)
    return ProofSP1(H_prime, c, h_rand / h_frak ** c, msg)


def verify_sp1(pp: PublicParams, proof: ProofSP1) -> bool:
    if not (
        isinstance(proof.H_prime, Target)
        and _is(proof.h_hat, Side.RIGHT)
        and isinstance(proof.c, int)
        and 0 <= proof.c < ORDER
        and len(proof.msg) == NONCE_SIZE
    ):
        return False
    if proof.c != _challenge(DOMAIN_SP1, pp.H, proof.H_prime, proof.msg):
        return False
    return proof.H_prime == pair(pp.g_frak, proof.h_hat) * pp.H ** proof.c


# -------------------------------------------------------------------- query


@dataclasses.dataclass(frozen=True)
class QueryCommitments:
    """The user's blinded query: rectangle size in clear plus ten group elements."""

    l: int
    k: int
    E1: Point
    E2: Point
    F1: Point
    F2: Point
    J1: Point
    J2: Point
    I1: Point
    I2: Point
    I3: Point
    I4: Point

    ELEMENT_FIELDS = ("E1", "E2", "F1", "F2", "J1", "J2", "I1", "I2", "I3", "I4")
    FIELD_SIDES = {
        "E1": Side.LEFT, "E2": Side.LEFT, "F1": Side.LEFT, "J1": Side.LEFT,
        "F2": Side.RIGHT, "J2": Side.RIGHT,
        "I1": Side.RIGHT, "I2": Side.RIGHT, "I3": Side.RIGHT, "I4": Side.RIGHT,
    }


@dataclasses.dataclass(frozen=True)
class UserQueryState:
    """Everything the user keeps secret between sending the query and decrypting.

    ``r`` holds r1..r10 at indices 0..9. ``gt_cache`` is filled by the prover
    with e(g2, g2) and e(h2, h2) so that key verification can reuse them.
    """

    i: int
    j: int
    l: int
    k: int
    r: tuple[int, ...]
    C_i1: Point
    C_i2: Point
    D_j1: Point
    D_j2: Point
    Gamma1_i: Point
    Gamma2_j: Point
    Gamma1_il: Point
    Gamma2_jk: Point
    gt_cache: dict = dataclasses.field(default_factory=dict, compare=False, repr=False)

    def __repr__(self) -> str:
        return f"UserQueryState(l={self.l}, k={self.k}, <secret>)"


@dataclasses.dataclass(frozen=True)
class ProofU:
    E1p: Point
    E2p: Point
    Theta: tuple[Target, ...]
    c: tuple[int, ...]
    z: tuple[int, ...]
    msg: bytes


def check_query_range(m: int, n: int, i: int, j: int, l: int, k: int) -> None:
    """Raise ValueError unless 1 <= i < i+l <= m and 1 <= j < j+k <= n."""
    if l < 1 or k < 1:
        raise ValueError(f"query size must be at least 1x1, got {l}x{k}")
    if not (1 <= i and i + l <= m):
        raise ValueError(f"columns {i}+{l} fall outside [1, {m}]")
    if not (1 <= j and j + k <= n):
        raise ValueError(f"rows {j}+{k} fall outside [1, {n}]")


def commit_query(
    pp: PublicParams, i: int, j: int, l: int, k: int, rng: RandomSource | None = None
) -> tuple[UserQueryState, QueryCommitments]:
    """Blind the start point and fetch the four membership signatures."""
    check_query_range(pp.m, pp.n, i, j, l, k)
    rng = rng or default_rng()
    r = tuple(random_nonzero_scalar(rng) for _ in range(10))
    r1, r2, r3, r4, r5, r6, r7, r8, r9, r10 = r
    gf = pp.g_frak
    C_i, D_j = pp.c(i), pp.d(j)
    state = UserQueryState(
        i, j, l, k, r,
        C_i.power, C_i.signature, D_j.power, D_j.signature,
        pp.gamma1(i), pp.gamma2(j), pp.gamma1(i + l), pp.gamma2(j + k),
    )
    omega = QueryCommitments(
        l=l,
        k=k,
        E1=gf ** (-r1) * pp.g1.left ** i,
        E2=gf ** (-r2) * pp.h1.left ** j,
        F1=gf ** r3 * state.C_i1,
        F2=state.C_i2 ** r4,
        J1=gf ** r5 * state.D_j1,
        J2=state.D_j2 ** r6,
        I1=state.Gamma1_i ** r7,
        I2=state.Gamma2_j ** r8,
        I3=state.Gamma1_il ** r9,
        I4=state.Gamma2_jk ** r10,
    )
    return state, omega


def _query_challenges(omega: QueryCommitments, E1p: Point, E2p: Point, T: tuple, msg: bytes) -> tuple[int, ...]:
    # T is 0-based: T[0] is Theta_1.
    pairs = (
        (omega.E1, E1p), (omega.E2, E2p),
        (T[4], T[5]), (T[6], T[7]), (T[8], T[14]), (T[9], T[15]),
        (T[0], T[1]), (T[2], T[3]),
        (T[5], T[10]), (T[7], T[11]), (T[8], T[12]), (T[9], T[13]),
    )
    return tuple(_challenge(DOMAIN_QUERY, a, b, msg) for a, b in pairs)


def prove_query(
    pp: PublicParams, omega: QueryCommitments, state: UserQueryState, rng: RandomSource | None = None
) -> ProofU:
    """Produce the query proof from the opening held in ``state``.

    Split from :func:`commit_query` so that tests can feed doctored openings.
    """
    rng = rng or default_rng()
    i, j = state.i, state.j
    r1, r2, r3, r4, r5, r6, r7, r8, r9, r10 = state.r
    r_, s_ = random_scalar(rng), random_scalar(rng)
    s1, s2, s3, s4, s5, s6, s7, s8, s9, s10 = (random_scalar(rng) for _ in range(10))
    msg = rng.randbytes(NONCE_SIZE)

    gf, g1, g2, h1, h2 = pp.g_frak, pp.g1, pp.g2, pp.h1, pp.h2
    E1p = gf ** s1 * g1.left ** r_
    E2p = gf ** s2 * h1.left ** s_

    gg1 = pair(g1.left, g1.right)
    hh1 = pair(h1.left, h1.right)
    gg2 = pair(g2.left, g2.right)
    hh2 = pair(h2.left, h2.right)
    state.gt_cache.update(gg2=gg2, hh2=hh2)

    T = (
        pair(gf, omega.F2) ** s3,
        gg2 ** s4,
        pair(gf, omega.J2) ** s5,
        hh2 ** s6,
        pair(g1.left, omega.I1) ** r_,
        gg1 ** s7,
        pair(h1.left, omega.I2) ** s_,
        hh1 ** s8,
        gg1 ** s9,
        hh1 ** s10,
        pair(gf, omega.I1) ** s1,
        pair(gf, omega.I2) ** s2,
        pair(gf, omega.I3) ** s1,
        pair(gf, omega.I4) ** s2,
        pair(g1.left, omega.I3) ** r_,
        pair(h1.left, omega.I4) ** s_,
    )
    c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12 = _query_challenges(omega, E1p, E2p, T, msg)

    p = ORDER
    z = (
        (s1 + c1 * r1) % p,
        (r_ - c1 * i) % p,
        (s2 + c2 * r2) % p,
        (s_ - c2 * j) % p,
        (s7 + c3 * r7) % p,
        (r_ - c3 * i) % p,
        (s_ - c4 * j) % p,
        (s8 + c4 * r8) % p,
        (s9 + c5 * r9) % p,
        (r_ - c5 * i) % p,
        (s10 + c6 * r10) % p,
        (s_ - c6 * j) % p,
        (s3 - c7 * r3) % p,
        (s4 - c7 * r4) % p,
        (s5 - c8 * r5) % p,
        (s6 - c8 * r6) % p,
        (s7 - c9 * r7) % p,
        (s1 + c9 * r1) % p,
        (s8 - c10 * r8) % p,
        (s2 + c10 * r2) % p,
        (s9 - c11 * r9) % p,
        (s1 + c11 * r1) % p,
        (s10 - c12 * r10) % p,
        (s2 + c12 * r2) % p,
    )
    return ProofU(E1p, E2p, T, (c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12), z, msg)


def build_query(
    pp: PublicParams, i: int, j: int, l: int, k: int, rng: RandomSource | None = None
) -> tuple[UserQueryState, QueryCommitments, ProofU]:
    """Commit to start point (i, j) for an l x k rectangle and prove it lies in the grid.

    Raises:
        ValueError: if the rectangle leaves the grid. Such a query has no valid proof.
    """
    rng = rng or default_rng()
    state, omega = commit_query(pp, i, j, l, k, rng)
    return state, omega, prove_query(pp, omega, state, rng)


def _query_well_typed(pp: PublicParams, omega: QueryCommitments, proof: ProofU) -> bool:
    if not (isinstance(omega.l, int) and isinstance(omega.k, int)):
        return False
    if not (1 <= omega.l <= pp.m - 1 and 1 <= omega.k <= pp.n - 1):
        return False
    for name, side in QueryCommitments.FIELD_SIDES.items():
        p = getattr(omega, name)
        if not _is(p, side) or p.is_identity():
            return False
    if not (_is(proof.E1p, Side.LEFT) and _is(proof.E2p, Side.LEFT)):
        return False
    if len(proof.Theta) != 16 or not all(isinstance(t, Target) for t in proof.Theta):
        return False
    if len(proof.c) != 12 or len(proof.z) != 24:
        return False
    if not all(isinstance(v, int) and 0 <= v < ORDER for v in proof.c + proof.z):
        return False
    return len(proof.msg) == NONCE_SIZE


def verify_query(pp: PublicParams, omega: QueryCommitments, proof: ProofU) -> bool:
    """Check all twelve challenges, then all twelve relations."""
    if not _query_well_typed(pp, omega, proof):
        return False
    T = proof.Theta
    if _query_challenges(omega, proof.E1p, proof.E2p, T, proof.msg) != tuple(proof.c):
        return False
    c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12 = proof.c
    (z1, z2, z3, z4, z5, z6, z7, z8, z9, z10, z11, z12,
     z13, z14, z15, z16, z17, z18, z19, z20, z21, z22, z23, z24) = proof.z
    l, k = omega.l, omega.k
    E1, E2, F1, F2, J1, J2, I1, I2, I3, I4 = (getattr(omega, f) for f in QueryCommitments.ELEMENT_FIELDS)
    gf, g1, g2, h1, h2 = pp.g_frak, pp.g1, pp.g2, pp.h1, pp.h2
    W1_inv, W1p_inv = pp.W1.inverse(), pp.W1p.inverse()

    if proof.E1p != gf ** z1 * g1.left ** z2 * E1 ** c1:
        return False
    if proof.E2p != gf ** z3 * h1.left ** z4 * E2 ** c2:
        return False

    gg1 = pair(g1.left, g1.right)
    hh1 = pair(h1.left, h1.right)
    g1_I1 = pair(g1.left, I1)
    h1_I2 = pair(h1.left, I2)
    g1_I3 = pair(g1.left, I3)
    h1_I4 = pair(h1.left, I4)
    gf_I1, gf_I2 = pair(gf, I1), pair(gf, I2)
    gf_I3, gf_I4 = pair(gf, I3), pair(gf, I4)

    checks = (
        lambda: T[4] * T[5] == g1_I1 ** z6 * gg1 ** z5 * pair(W1_inv, I1) ** c3,
        lambda: T[6] * T[7] == h1_I2 ** z7 * hh1 ** z8 * pair(W1p_inv, I2) ** c4,
        lambda: T[8] * T[14] == gg1 ** z9 * g1_I3 ** z10 * (pair(W1_inv, I3) * g1_I3 ** (-l)) ** c5,
        lambda: T[9] * T[15] == hh1 ** z11 * h1_I4 ** z12 * (pair(W1p_inv, I4) * h1_I4 ** (-k)) ** c6,
        lambda: T[0] * T[1] == pair(gf, F2) ** z13 * pair(g2.left, g2.right) ** z14 * pair(F1 * pp.W2, F2) ** c7,
        lambda: T[2] * T[3] == pair(gf, J2) ** z15 * pair(h2.left, h2.right) ** z16 * pair(J1 * pp.W2p, J2) ** c8,
        lambda: T[5] * T[10] == gg1 ** z17 * gf_I1 ** z18 * pair(E1 * pp.W1, I1) ** c9,
        lambda: T[7] * T[11] == hh1 ** z19 * gf_I2 ** z20 * pair(E2 * pp.W1p, I2) ** c10,
        lambda: T[8] * T[12] == gg1 ** z21 * gf_I3 ** z22 * pair(E1 * g1.left ** l * pp.W1, I3) ** c11,
        lambda: T[9] * T[13] == hh1 ** z23 * gf_I4 ** z24 * pair(E2 * h1.left ** k * pp.W1p, I4) ** c12,
    )
    return all(check() for check in checks)


# ------------------------------------------------------------- derived keys


@dataclasses.dataclass(frozen=True)
class CellProof:
    """Proof material for one key (K[mu,nu], L[mu,nu])."""

    Upsilon1: Point
    Upsilon2: Target
    Upsilon3: Target
    c1: int
    c2: int
    z1: int
    z2: int
    h_mu_nu: Point
    H_tilde: Target
    L_prime: Target


@dataclasses.dataclass(frozen=True)
class ProofSP2:
    """Per-cell proofs indexed ``cells[mu-1][nu-1]`` plus the shared nonce."""

    cells: tuple[tuple[CellProof, ...], ...]
    msg: bytes


def prove_sp2(
    sk, pp: PublicParams, omega: QueryCommitments, keys: "KeyBundle", rng: RandomSource | None = None
) -> ProofSP2:
    """Prove every key in ``keys`` came from ``omega`` and the provider's (x, y, hf).

    Each cell gets its own blinding exponents and its own random hf~; see the
    module notes in the project docs for why nothing is shared across cells.
    """
    rng = rng or default_rng()
    msg = rng.randbytes(NONCE_SIZE)
    l, k = omega.l, omega.k
    pair_C = {}
    pair_D = {}
    rows = []
    x_mu = 1
    for mu in range(1, l + 1):
        x_mu = x_mu * sk.x % ORDER
        if mu not in pair_C:
            pair_C[mu] = pair(pp.g2.left, pp.c(mu).signature)
        row = []
        y_nu = 1
        for nu in range(1, k + 1):
            y_nu = y_nu * sk.y % ORDER
            if nu not in pair_D:
                pair_D[nu] = pair(pp.h2.left, pp.d(nu).signature)
            K, L = keys.K[mu - 1][nu - 1], keys.L[mu - 1][nu - 1]
            omega_, psi = random_scalar(rng), random_scalar(rng)
            h_rand = random_point(Side.RIGHT, rng)
            U1 = omega.F1 ** omega_ * omega.J1 ** psi
            U2 = pair_C[mu] ** (-omega_)
            U3 = pair_D[nu] ** (-psi)
            c1 = _challenge(DOMAIN_SP2, K, U1, U2, U3, msg)
            c2 = _challenge(DOMAIN_SP2, L, pp.H, msg)
            row.append(
                CellProof(
                    Upsilon1=U1,
                    Upsilon2=U2,
                    Upsilon3=U3,
                    c1=c1,
                    c2=c2,
                    z1=(omega_ - c1 * x_mu) % ORDER,
                    z2=(psi - c1 * y_nu) % ORDER,
                    h_mu_nu=h_rand / sk.h_frak ** c2,
                    H_tilde=pair(pp.g_frak, h_rand),
                    L_prime=pair(K, h_rand),
                )
            )
        rows.append(tuple(row))
    return ProofSP2(tuple(rows), msg)


def _cell_well_typed(cp: CellProof) -> bool:
    return (
        _is(cp.Upsilon1, Side.LEFT)
        and _is(cp.h_mu_nu, Side.RIGHT)
        and all(isinstance(t, Target) for t in (cp.Upsilon2, cp.Upsilon3, cp.H_tilde, cp.L_prime))
        and all(isinstance(v, int) and 0 <= v < ORDER for v in (cp.c1, cp.c2, cp.z1, cp.z2))
    )


def verify_sp2(
    pp: PublicParams,
    omega: QueryCommitments,
    keys: "KeyBundle",
    proof: ProofSP2,
    gt_constants: tuple[Target, Target] | None = None,
) -> bool:
    """Check every cell's challenges and its five relations.

    Args:
        gt_constants: Optional (e(g2, g2), e(h2, h2)) already computed by the
            caller, typically taken from the query prover's cache.
    """
    l, k = omega.l, omega.k
    if len(proof.msg) != NONCE_SIZE or keys.H != pp.H:
        return False
    if not (1 <= l <= pp.m and 1 <= k <= pp.n):
        return False
    grids = (proof.cells, keys.K, keys.L)
    if any(len(g) != l or any(len(row) != k for row in g) for g in grids):
        return False
    if not all(_cell_well_typed(cp) for row in proof.cells for cp in row):
        return False
    if not all(_is(K, Side.LEFT) for row in keys.K for K in row):
        return False
    if not all(isinstance(L, Target) for row in keys.L for L in row):
        return False

    if gt_constants is None:
        gt_constants = (pair(pp.g2.left, pp.g2.right), pair(pp.h2.left, pp.h2.right))
    gg2, hh2 = gt_constants

    # Challenges first: cheap rejection before any pairing work.
    for mu in range(1, l + 1):
        for nu in range(1, k + 1):
            cp = proof.cells[mu - 1][nu - 1]
            K, L = keys.K[mu - 1][nu - 1], keys.L[mu - 1][nu - 1]
            if cp.c1 != _challenge(DOMAIN_SP2, K, cp.Upsilon1, cp.Upsilon2, cp.Upsilon3, proof.msg):
                return False
            if cp.c2 != _challenge(DOMAIN_SP2, L, pp.H, proof.msg):
                return False

    base = omega.E1 * omega.E2
    pairs_C = {}
    pairs_D = {}
    g1_mu = Point.identity(Side.LEFT)
    for mu in range(1, l + 1):
        g1_mu = g1_mu * pp.g1.left
        sig = pp.c(mu).signature
        pairs_C[mu] = (pair(pp.g2.left, sig), pair(pp.W2, sig) / gg2)
        h1_nu = Point.identity(Side.LEFT)
        for nu in range(1, k + 1):
            h1_nu = h1_nu * pp.h1.left
            if nu not in pairs_D:
                sig_d = pp.d(nu).signature
                pairs_D[nu] = (pair(pp.h2.left, sig_d), pair(pp.W2p, sig_d) / hh2)
            cp = proof.cells[mu - 1][nu - 1]
            K, L = keys.K[mu - 1][nu - 1], keys.L[mu - 1][nu - 1]
            e_C, ratio_C = pairs_C[mu]
            e_D, ratio_D = pairs_D[nu]
            if cp.Upsilon1 != omega.F1 ** cp.z1 * omega.J1 ** cp.z2 * (K / (base * g1_mu * h1_nu)) ** cp.c1:
                return False
            if cp.Upsilon2 != e_C ** (-cp.z1) * ratio_C ** cp.c1:
                return False
            if cp.Upsilon3 != e_D ** (-cp.z2) * ratio_D ** cp.c1:
                return False
            if cp.L_prime != pair(K, cp.h_mu_nu) * L ** cp.c2:
                return False
            if cp.H_tilde != pair(pp.g_frak, cp.h_mu_nu) * pp.H ** cp.c2:
                return False
    return True


__all__ = [
    "CellProof",
    "ProofSP1",
    "ProofSP2",
    "ProofU",
    "QueryCommitments",
    "UserQueryState",
    "build_query",
    "check_query_range",
    "commit_query",
    "prove_query",
    "prove_sp1",
    "prove_sp2",
    "verify_query",
    "verify_sp1",
    "verify_sp2",
]
