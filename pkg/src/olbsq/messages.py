"""Binary bodies of the three protocol messages (format version 1).

All group elements use the raw fixed-length encodings from ``olbsq.group``;
integers are big-endian.

ProviderProof body::

    H' (GT) | c (Zp) | h_hat (G2) | nonce (32 bytes)

Query body (same length for every l, k on a given curve)::

    l (u16) | k (u16) | E1 E2 F1 (G1) | F2 (G2) | J1 (G1) | J2 I1 I2 I3 I4 (G2)
    | E1' E2' (G1) | Theta_1..16 (GT) | c_1..12 (Zp) | z_1..24 (Zp) | nonce (32)

KeyBundle body, cells in order mu = 1..l outer, nu = 1..k inner::

    l (u16) | k (u16) | H (GT)
    | per cell: K (G1) L (GT) Y1 (G1) Y2 Y3 (GT) c1 c2 z1 z2 (Zp) h_mu_nu (G2) H~ L' (GT)
    | nonce (32)
"""

from __future__ import annotations

from collections import Counter

from olbsq.codec import Reader, Writer
from olbsq.errors import DecodeError
from olbsq.group import Side
from olbsq.transfer import KeyBundle
from olbsq.zkp import NONCE_SIZE, CellProof, ProofSP1, ProofSP2, ProofU, QueryCommitments

L_, R_ = Side.LEFT, Side.RIGHT


def encode_provider_proof(proof: ProofSP1) -> bytes:
    w = Writer().target(proof.H_prime).scalar(proof.c).point(proof.h_hat).raw(proof.msg)
    return w.getvalue()


def decode_provider_proof(data: bytes) -> ProofSP1:
    r = Reader(data)
    proof = ProofSP1(r.target(), r.scalar(), r.point(R_), r.raw(NONCE_SIZE))
    r.done()
    return proof


def _write_query(w: Writer, omega: QueryCommitments, proof: ProofU) -> None:
    w.u16(omega.l).u16(omega.k)
    for name in QueryCommitments.ELEMENT_FIELDS:
        w.point(getattr(omega, name))
    w.point(proof.E1p).point(proof.E2p)
    for t in proof.Theta:
        w.target(t)
    for s in tuple(proof.c) + tuple(proof.z):
        w.scalar(s)
    w.raw(proof.msg)


def encode_query(omega: QueryCommitments, proof: ProofU) -> bytes:
    if len(proof.Theta) != 16 or len(proof.c) != 12 or len(proof.z) != 24 or len(proof.msg) != NONCE_SIZE:
        raise ValueError("query proof has the wrong shape")
    w = Writer()
    _write_query(w, omega, proof)
    return w.getvalue()


def query_element_tally(omega: QueryCommitments, proof: ProofU) -> Counter:
    """Counts of G1, G2, GT and Zp elements in the query message."""
    w = Writer()
    _write_query(w, omega, proof)
    return w.tally


def decode_query(data: bytes) -> tuple[QueryCommitments, ProofU]:
    r = Reader(data)
    l, k = r.u16(), r.u16()
    elems = {name: r.point(QueryCommitments.FIELD_SIDES[name]) for name in QueryCommitments.ELEMENT_FIELDS}
    omega = QueryCommitments(l=l, k=k, **elems)
    E1p, E2p = r.point(L_), r.point(L_)
    theta = tuple(r.target() for _ in range(16))
    c = tuple(r.scalar() for _ in range(12))
    z = tuple(r.scalar() for _ in range(24))
    msg = r.raw(NONCE_SIZE)
    r.done()
    return omega, ProofU(E1p, E2p, theta, c, z, msg)


def _write_key_bundle(w: Writer, keys: KeyBundle, proof: ProofSP2) -> None:
    l, k = keys.shape
    if len(proof.cells) != l or any(len(row) != k for row in proof.cells):
        raise ValueError("key bundle and proof disagree on shape")
    w.u16(l).u16(k).target(keys.H)
    for mu in range(l):
        for nu in range(k):
            cp = proof.cells[mu][nu]
            w.point(keys.K[mu][nu]).target(keys.L[mu][nu])
            w.point(cp.Upsilon1).target(cp.Upsilon2).target(cp.Upsilon3)
            w.scalar(cp.c1).scalar(cp.c2).scalar(cp.z1).scalar(cp.z2)
            w.point(cp.h_mu_nu).target(cp.H_tilde).target(cp.L_prime)
    w.raw(proof.msg)


def encode_key_bundle(keys: KeyBundle, proof: ProofSP2) -> bytes:
    w = Writer()
    _write_key_bundle(w, keys, proof)
    return w.getvalue()


def key_bundle_element_tally(keys: KeyBundle, proof: ProofSP2) -> Counter:
    w = Writer()
    _write_key_bundle(w, keys, proof)
    return w.tally


def decode_key_bundle(data: bytes, expect: tuple[int, int] | None = None) -> tuple[KeyBundle, ProofSP2]:
    """Decode a key bundle. ``expect`` = (l, k) rejects a reply of the wrong size early."""
    r = Reader(data)
    l, k = r.u16(), r.u16()
    if l < 1 or k < 1:
        raise DecodeError("empty key bundle")
    if expect is not None and (l, k) != tuple(expect):
        raise DecodeError(f"key bundle is {l}x{k}, expected {expect[0]}x{expect[1]}")
    H = r.target()
    K_rows, L_rows, P_rows = [], [], []
    for _ in range(l):
        K_row, L_row, P_row = [], [], []
        for _ in range(k):
            K_row.append(r.point(L_))
            L_row.append(r.target())
            P_row.append(
                CellProof(
                    Upsilon1=r.point(L_),
                    Upsilon2=r.target(),
                    Upsilon3=r.target(),
                    c1=r.scalar(),
                    c2=r.scalar(),
                    z1=r.scalar(),
                    z2=r.scalar(),
                    h_mu_nu=r.point(R_),
                    H_tilde=r.target(),
                    L_prime=r.target(),
                )
            )
        K_rows.append(tuple(K_row))
        L_rows.append(tuple(L_row))
        P_rows.append(tuple(P_row))
    msg = r.raw(NONCE_SIZE)
    r.done()
    return KeyBundle(tuple(K_rows), tuple(L_rows), H), ProofSP2(tuple(P_rows), msg)
