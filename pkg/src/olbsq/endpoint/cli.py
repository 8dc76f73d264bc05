"""Command-line entry point: ``olbsq setup | serve | query | bench``.

Service files use the name ``r<row>_c<col>.bin`` where ``col`` is i (1..m)
and ``row`` is j (1..n). Missing files become empty payloads. Recovered
cells are written with the same naming.

The log level comes from ``--log-level`` or the ``OLBSQ_LOG_LEVEL``
environment variable.
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from pathlib import Path

from olbsq import bench
from olbsq.catalog import load_catalog, save_catalog, save_secret_key, setup
from olbsq.errors import OLBSQError, ProtocolAbort
from olbsq.zkp import check_query_range

from olbsq.endpoint.client import run_query
from olbsq.endpoint.server import ProviderConfig, serve

CATALOG_FILE = "catalog.bin"
PARAMS_FILE = "params.bin"
SECRET_KEY_FILE = "secret.key"
DEFAULT_PORT = 7461


def cell_filename(i: int, j: int) -> str:
    return f"r{j}_c{i}.bin"


def read_services(services_dir: Path, m: int, n: int) -> list[list[bytes]]:
    out = []
    for i in range(1, m + 1):
        col = []
        for j in range(1, n + 1):
            path = services_dir / cell_filename(i, j)
            col.append(path.read_bytes() if path.is_file() else b"")
        out.append(col)
    return out


def _rng(seed: int | None):
    return random.Random(seed) if seed is not None else None


def _split_host(host: str, port: int | None) -> tuple[str, int]:
    if port is None and ":" in host and not host.startswith("["):
        name, _, p = host.rpartition(":")
        return name, int(p)
    return host, port or DEFAULT_PORT


def cmd_setup(args: argparse.Namespace) -> int:
    services_dir, out_dir = Path(args.services_dir), Path(args.out_dir)
    if not services_dir.is_dir():
        print(f"error: services directory {services_dir} does not exist", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    services = read_services(services_dir, args.m, args.n)
    sk, pp, cat = setup(args.m, args.n, services, _rng(args.seed))
    save_catalog(out_dir / CATALOG_FILE, pp, cat)
    save_catalog(out_dir / PARAMS_FILE, pp)
    save_secret_key(out_dir / SECRET_KEY_FILE, sk, pp)
    print(f"wrote {out_dir / CATALOG_FILE}, {out_dir / PARAMS_FILE}, {out_dir / SECRET_KEY_FILE} (mode 0600)")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    config = ProviderConfig(
        catalog_path=args.catalog,
        secret_key_path=args.key,
        host=args.host,
        port=args.port,
        max_cells=args.max_cells,
        log_level=args.log_level,
    )
    try:
        serve(config)
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    pp, cat = load_catalog(args.catalog)
    if cat is None:
        print("error: the query needs the full catalog file, not a parameters-only file", file=sys.stderr)
        return 2
    try:
        check_query_range(pp.m, pp.n, args.i, args.j, args.l, args.k)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    host, port = _split_host(args.host, args.port)
    try:
        result = run_query(host, port, pp, cat, args.i, args.j, args.l, args.k, timeout=args.timeout)
    except ProtocolAbort as exc:
        print(f"error: session aborted: {exc}", file=sys.stderr)
        return 1
    except (OSError, OLBSQError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for (i, j), payload in sorted(result.cells.items()):
        (out_dir / cell_filename(i, j)).write_bytes(payload)
        print(f"{cell_filename(i, j)}\t{len(payload)} bytes")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        check_query_range(args.m, args.n, 1, 1, args.l, args.k)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rng = _rng(args.seed)
    meas = bench.measure(args.m, args.n, args.l, args.k, rng)
    fits = {} if args.no_fit else bench.sweep(rng)
    print(bench.compare_tables(meas, fits).format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="olbsq", description="Oblivious location-based service queries")
    parser.add_argument("--log-level", default=os.environ.get("OLBSQ_LOG_LEVEL", "WARNING"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("setup", help="encrypt a services directory into a catalog")
    p.add_argument("m", type=int, help="columns")
    p.add_argument("n", type=int, help="rows")
    p.add_argument("services_dir")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, help="deterministic randomness, for testing only")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("serve", help="run the provider daemon")
    p.add_argument("--catalog", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--max-cells", type=int, default=64, help="largest l*k served per query")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="fetch an l x k rectangle from a provider")
    p.add_argument("host", help="host or host:port")
    p.add_argument("i", type=int)
    p.add_argument("j", type=int)
    p.add_argument("l", type=int)
    p.add_argument("k", type=int)
    p.add_argument("--catalog", required=True, help="catalog file produced by setup")
    p.add_argument("--port", type=int)
    p.add_argument("--out", default=".")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="count operations and compare with the cost tables")
    p.add_argument("m", type=int)
    p.add_argument("n", type=int)
    p.add_argument("l", type=int)
    p.add_argument("k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-fit", action="store_true", help="skip the sweep that fits closed forms")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=str(args.log_level).upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, OLBSQError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
