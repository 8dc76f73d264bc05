"""Service transfer: oblivious key derivation, recovery and session state machines.

Message flow for one session::

    provider --ProofSP1-->            user   (provider knows hf)
    provider <--(omega, ProofU)--     user   (blinded, range-proven query)
    provider --(KeyBundle, ProofSP2)--> user (keys for the l x k rectangle)

The user then strips its blinding from each L[mu,nu] and unmasks cells
(i+mu, j+nu) for mu in 1..l, nu in 1..k. The start cell itself is not
returned.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Sequence

from olbsq.catalog import EncryptedCatalog, PublicParams, SecretKey, unwrap_payload
from olbsq.errors import AbortReason, IntegrityError, ProtocolAbort
from olbsq.group import ORDER, Point, RandomSource, Target, default_rng, pair
from olbsq.zkp import (
    ProofSP1,
    ProofSP2,
    ProofU,
    QueryCommitments,
    UserQueryState,
    build_query,
    check_query_range,
    prove_sp1,
    prove_sp2,
    verify_query,
    verify_sp1,
    verify_sp2,
)


@dataclasses.dataclass(frozen=True)
class KeyBundle:
    """Provider reply: ``K[mu-1][nu-1]``, ``L[mu-1][nu-1]`` and the echoed H."""

    K: tuple[tuple[Point, ...], ...]
    L: tuple[tuple[Target, ...], ...]
    H: Target

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.K), len(self.K[0]) if self.K else 0


@dataclasses.dataclass(frozen=True)
class RecoveredServices:
    """Payloads keyed by absolute grid coordinates (column i, row j)."""

    cells: dict[tuple[int, int], bytes]

    def __getitem__(self, coord: tuple[int, int]) -> bytes:
        return self.cells[coord]

    def __len__(self) -> int:
        return len(self.cells)


def derive_keys(sk: SecretKey, pp: PublicParams, omega: QueryCommitments) -> KeyBundle:
    """Compute K[mu,nu] = E1 g1^mu E2 h1^nu F1^(x^mu) J1^(y^nu) and L = e(K, hf).

    Only the public commitments and (l, k) are read, never the start point.
    The powers x^mu and y^nu come from a running product, and the factors
    F1^(x^mu), J1^(y^nu) are computed once per row and column.
    """
    l, k = omega.l, omega.k
    if l < 1 or k < 1:
        raise ValueError(f"query size must be at least 1x1, got {l}x{k}")
    if l > pp.m - 1 or k > pp.n - 1:
        raise ValueError(f"query size {l}x{k} does not fit a {pp.m}x{pp.n} grid")

    F1_pow, x_mu = [], 1
    for _ in range(l):
        x_mu = x_mu * sk.x % ORDER
        F1_pow.append(omega.F1 ** x_mu)
    J1_pow, y_nu = [], 1
    for _ in range(k):
        y_nu = y_nu * sk.y % ORDER
        J1_pow.append(omega.J1 ** y_nu)

    base = omega.E1 * omega.E2
    K_rows, L_rows = [], []
    g1_mu = base
    for mu in range(l):
        g1_mu = g1_mu * pp.g1.left
        K_row, L_row = [], []
        acc = g1_mu
        for nu in range(k):
            acc = acc * pp.h1.left
            K = acc * F1_pow[mu] * J1_pow[nu]
            K_row.append(K)
            L_row.append(pair(K, sk.h_frak))
        K_rows.append(tuple(K_row))
        L_rows.append(tuple(L_row))
    return KeyBundle(tuple(K_rows), tuple(L_rows), pp.H)


def decrypt_cells(
    state: UserQueryState, pp: PublicParams, keys: KeyBundle, cat: EncryptedCatalog
) -> RecoveredServices:
    """Unblind every key and open the payloads. Assumes the key proof already passed.

    H^-(r1+r2) is computed once; each cell then costs two target-group
    exponentiations, so a single-cell query costs three.
    """
    r1, r2, r3, _, r5 = state.r[:5]
    H_blind = pp.H ** (-(r1 + r2))
    cells = {}
    for mu in range(1, state.l + 1):
        C3 = pp.c(mu).target
        for nu in range(1, state.k + 1):
            D3 = pp.d(nu).target
            P = keys.L[mu - 1][nu - 1] / (H_blind * C3 ** r3 * D3 ** r5)
            coord = (state.i + mu, state.j + nu)
            _, B, ct = cat.cell(*coord)
            try:
                cells[coord] = unwrap_payload(B / P, ct)
            except IntegrityError as exc:
                raise IntegrityError(f"cell {coord} failed authentication", cell=coord) from exc
    return RecoveredServices(cells)


def recover_services(
    state: UserQueryState,
    pp: PublicParams,
    keys: KeyBundle,
    proof: ProofSP2,
    cat: EncryptedCatalog,
    omega: QueryCommitments,
) -> RecoveredServices:
    """Verify the key proof, then decrypt the rectangle.

    Raises:
        ProtocolAbort: KEY_PROOF_INVALID when the proof does not verify.
        IntegrityError: a payload failed authentication; ``cell`` names it.
    """
    gt = (state.gt_cache["gg2"], state.gt_cache["hh2"]) if "gg2" in state.gt_cache else None
    if (omega.l, omega.k) != (state.l, state.k) or not verify_sp2(pp, omega, keys, proof, gt):
        raise ProtocolAbort(AbortReason.KEY_PROOF_INVALID, "derived-key proof rejected")
    return decrypt_cells(state, pp, keys, cat)


def ideal_functionality(
    plain: Sequence[Sequence[bytes]], i: int, j: int, l: int, k: int, b: int = 1
) -> RecoveredServices | None:
    """Trusted-party reference: the rectangle's payloads, or None for the refusal outcome.

    ``plain[i-1][j-1]`` is cell (i, j). ``b=0`` models the provider refusing.
    """
    m = len(plain)
    n = len(plain[0]) if m else 0
    if not b or l < 1 or k < 1 or i < 1 or j < 1 or i + l > m or j + k > n:
        return None
    return RecoveredServices(
        {(i + mu, j + nu): bytes(plain[i + mu - 1][j + nu - 1]) for mu in range(1, l + 1) for nu in range(1, k + 1)}
    )


# ----------------------------------------------------------- state machines


class SessionState(enum.Enum):
    INIT = "init"
    PROVIDER_PROVEN = "provider-proven"
    QUERY_SENT = "query-sent"
    KEYS_RECEIVED = "keys-received"
    DONE = "done"
    ABORTED = "aborted"


class _Session:
    state: SessionState

    def _expect(self, *allowed: SessionState) -> None:
        if self.state not in allowed:
            current = self.state
            self.state = SessionState.ABORTED
            raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, f"message not valid in state {current.value}")

    def _abort(self, reason: AbortReason, message: str) -> ProtocolAbort:
        self.state = SessionState.ABORTED
        return ProtocolAbort(reason, message)


class UserSession(_Session):
    """User side of one transfer. Transitions only forward; any failure aborts."""

    def __init__(
        self,
        pp: PublicParams,
        cat: EncryptedCatalog,
        i: int,
        j: int,
        l: int,
        k: int,
        rng: RandomSource | None = None,
    ):
        check_query_range(pp.m, pp.n, i, j, l, k)
        self.pp, self.cat = pp, cat
        self.i, self.j, self.l, self.k = i, j, l, k
        self.rng = rng or default_rng()
        self.state = SessionState.INIT
        self._query: UserQueryState | None = None
        self._omega: QueryCommitments | None = None

    def on_provider_proof(self, proof: ProofSP1) -> tuple[QueryCommitments, ProofU]:
        self._expect(SessionState.INIT)
        if not verify_sp1(self.pp, proof):
            raise self._abort(AbortReason.PROVIDER_PROOF_INVALID, "provider key proof rejected")
        self.state = SessionState.PROVIDER_PROVEN
        self._query, self._omega, proof_u = build_query(self.pp, self.i, self.j, self.l, self.k, self.rng)
        self.state = SessionState.QUERY_SENT
        return self._omega, proof_u

    def on_key_bundle(self, keys: KeyBundle, proof: ProofSP2) -> RecoveredServices:
        self._expect(SessionState.QUERY_SENT)
        self.state = SessionState.KEYS_RECEIVED
        try:
            result = recover_services(self._query, self.pp, keys, proof, self.cat, self._omega)
        except ProtocolAbort:
            self.state = SessionState.ABORTED
            raise
        except IntegrityError as exc:
            raise self._abort(AbortReason.INTEGRITY_FAILURE, str(exc)) from exc
        self.state = SessionState.DONE
        return result


class ProviderSession(_Session):
    """Provider side of one transfer. The secret key is only read."""

    def __init__(
        self,
        sk: SecretKey,
        pp: PublicParams,
        rng: RandomSource | None = None,
        max_cells: int | None = None,
    ):
        if max_cells is not None and max_cells < 1:
            raise ValueError("max_cells must be at least 1")
        self.sk, self.pp = sk, pp
        self.rng = rng or default_rng()
        self.max_cells = max_cells
        self.state = SessionState.INIT

    def start(self) -> ProofSP1:
        self._expect(SessionState.INIT)
        proof = prove_sp1(self.sk.h_frak, self.pp, self.rng)
        self.state = SessionState.PROVIDER_PROVEN
        return proof

    def on_query(self, omega: QueryCommitments, proof: ProofU) -> tuple[KeyBundle, ProofSP2]:
        self._expect(SessionState.PROVIDER_PROVEN)
        if self.max_cells is not None and omega.l * omega.k > self.max_cells:
            raise self._abort(
                AbortReason.QUERY_TOO_LARGE, f"{omega.l}x{omega.k} exceeds limit of {self.max_cells} cells"
            )
        if not verify_query(self.pp, omega, proof):
            raise self._abort(AbortReason.QUERY_PROOF_INVALID, "query proof rejected")
        self.state = SessionState.QUERY_SENT
        keys = derive_keys(self.sk, self.pp, omega)
        proof2 = prove_sp2(self.sk, self.pp, omega, keys, self.rng)
        self.state = SessionState.DONE
        return keys, proof2


def run_protocol(
    sk: SecretKey,
    pp: PublicParams,
    cat: EncryptedCatalog,
    i: int,
    j: int,
    l: int,
    k: int,
    rng: RandomSource | None = None,
) -> RecoveredServices:
    """Run one complete in-process session and return what the user recovers."""
    rng = rng or default_rng()
    user = UserSession(pp, cat, i, j, l, k, rng)
    provider = ProviderSession(sk, pp, rng)
    omega, proof_u = user.on_provider_proof(provider.start())
    keys, proof2 = provider.on_query(omega, proof_u)
    return user.on_key_bundle(keys, proof2)


__all__ = [
    "KeyBundle",
    "ProviderSession",
    "RecoveredServices",
    "SessionState",
    "UserSession",
    "decrypt_cells",
    "derive_keys",
    "ideal_functionality",
    "recover_services",
    "run_protocol",
]
