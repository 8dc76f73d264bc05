"""Shared builders for the test suite."""

from __future__ import annotations

import dataclasses
import random
from typing import Iterator

from olbsq.catalog import setup
from olbsq.group import ORDER, Point, Side, random_nonzero_scalar, random_point, random_scalar, random_target
from olbsq.zkp import QueryCommitments, UserQueryState


def payload_grid(m: int, n: int, rng: random.Random | None = None) -> list[list[bytes]]:
    """Distinct payloads per cell, with varied lengths including empty."""
    rng = rng or random.Random(0)
    out = []
    for i in range(1, m + 1):
        col = []
        for j in range(1, n + 1):
            extra = rng.randbytes(rng.choice((0, 1, 7, 40)))
            col.append(f"cell({i},{j})".encode() + extra)
        out.append(col)
    return out


def make_world(m: int, n: int, seed: int = 0):
    """(sk, pp, cat, plain) for a seeded m x n grid."""
    rng = random.Random(seed)
    plain = payload_grid(m, n, rng)
    sk, pp, cat = setup(m, n, plain, rng)
    return sk, pp, cat, plain


def valid_queries(m: int, n: int) -> Iterator[tuple[int, int, int, int]]:
    for i in range(1, m):
        for l in range(1, m - i + 1):
            for j in range(1, n):
                for k in range(1, n - j + 1):
                    yield i, j, l, k


def forge_commitments(pp, i: int, j: int, l: int, k: int, rng, gammas: dict | None = None):
    """Build (state, omega) like an honest user, with any Gamma replaced by ``gammas``.

    Lets a cheating user put a home-made signature where no valid one exists
    (for example for i+l > m). Keys of ``gammas``: Gamma1_i, Gamma2_j,
    Gamma1_il, Gamma2_jk.
    """
    gammas = gammas or {}

    def sig(name, fn, idx):
        if name in gammas:
            return gammas[name]
        return fn(idx)

    r = tuple(random_nonzero_scalar(rng) for _ in range(10))
    r1, r2, r3, r4, r5, r6, r7, r8, r9, r10 = r
    C_i, D_j = pp.c(min(i, pp.m)), pp.d(min(j, pp.n))
    state = UserQueryState(
        i, j, l, k, r,
        C_i.power, C_i.signature, D_j.power, D_j.signature,
        sig("Gamma1_i", pp.gamma1, i), sig("Gamma2_j", pp.gamma2, j),
        sig("Gamma1_il", pp.gamma1, i + l), sig("Gamma2_jk", pp.gamma2, j + k),
    )
    gf = pp.g_frak
    omega = QueryCommitments(
        l=l, k=k,
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


# ------------------------------------------------------------ mutations


def flip_random_bit(b: bytes, rng) -> bytes:
    out = bytearray(b)
    pos = rng.randrange(len(out))
    out[pos] ^= 1 << rng.randrange(8)
    return bytes(out)


def mutate_value(value, rng):
    """A different value of the same type and, for points, the same side."""
    for _ in range(16):
        if isinstance(value, Point):
            new = random_point(value.side, rng) if rng.random() < 0.5 else value * Point.generator(value.side)
        elif isinstance(value, bytes):
            new = flip_random_bit(value, rng)
        elif isinstance(value, int):
            new = random_scalar(rng) if rng.random() < 0.5 else (value + rng.randrange(1, 1 << 16)) % ORDER
        else:
            new = random_target(rng) if rng.random() < 0.5 else value * value
        if new != value:
            return new
    raise AssertionError("could not produce a distinct mutation")


def replace(obj, **changes):
    return dataclasses.replace(obj, **changes)


def replace_index(seq: tuple, idx: int, value) -> tuple:
    out = list(seq)
    out[idx] = value
    return tuple(out)


def replace_cell(grid: tuple, mu: int, nu: int, value) -> tuple:
    rows = [list(r) for r in grid]
    rows[mu][nu] = value
    return tuple(tuple(r) for r in rows)


LEFT, RIGHT = Side.LEFT, Side.RIGHT


# ------------------------------------------------- field-wise proof mutants


def sp1_mutants(proof, rng, per_field: int = 10):
    """Yield (field, mutated proof) for every field of a provider key proof."""
    for name in ("H_prime", "c", "h_hat", "msg"):
        for _ in range(per_field):
            yield name, replace(proof, **{name: mutate_value(getattr(proof, name), rng)})


def query_mutants(pp, omega, proof, rng, per_field: int = 10):
    """Yield (field, omega', proof') for every serialized field of a query message."""
    for name in ("l", "k"):
        for _ in range(per_field):
            old = getattr(omega, name)
            new = old
            while new == old:
                new = rng.choice((rng.randint(1, max(pp.m, pp.n)), rng.randint(1, 0xFFFF)))
            yield name, replace(omega, **{name: new}), proof
    for name in QueryCommitments.ELEMENT_FIELDS:
        for _ in range(per_field):
            yield name, replace(omega, **{name: mutate_value(getattr(omega, name), rng)}), proof
    for name in ("E1p", "E2p", "msg"):
        for _ in range(per_field):
            yield name, omega, replace(proof, **{name: mutate_value(getattr(proof, name), rng)})
    for name, size in (("Theta", 16), ("c", 12), ("z", 24)):
        seq = getattr(proof, name)
        for idx in range(size):
            for _ in range(per_field):
                changed = replace_index(seq, idx, mutate_value(seq[idx], rng))
                yield f"{name}[{idx + 1}]", omega, replace(proof, **{name: changed})


CELL_FIELDS = ("Upsilon1", "Upsilon2", "Upsilon3", "c1", "c2", "z1", "z2", "h_mu_nu", "H_tilde", "L_prime")


def sp2_mutants(keys, proof, rng, per_field: int = 10):
    """Yield (field, keys', proof') for every serialized field of a key bundle."""
    for _ in range(per_field):
        yield "H", replace(keys, H=mutate_value(keys.H, rng)), proof
    for _ in range(per_field):
        yield "msg", keys, replace(proof, msg=mutate_value(proof.msg, rng))
    l, k = keys.shape
    for mu in range(l):
        for nu in range(k):
            for name in ("K", "L"):
                grid = getattr(keys, name)
                for _ in range(per_field):
                    changed = replace_cell(grid, mu, nu, mutate_value(grid[mu][nu], rng))
                    yield f"{name}[{mu + 1},{nu + 1}]", replace(keys, **{name: changed}), proof
            cp = proof.cells[mu][nu]
            for name in CELL_FIELDS:
                for _ in range(per_field):
                    new_cp = replace(cp, **{name: mutate_value(getattr(cp, name), rng)})
                    yield f"{name}[{mu + 1},{nu + 1}]", keys, replace(proof, cells=replace_cell(proof.cells, mu, nu, new_cp))
