"""Command-line surface: certification, rank queries, codecs, sampling, verification.

Graphs are given either as a path to a JSON file {"n": ..., "directed":
[[u,v], ...], "bidirected": [[u,v], ...]} or inline as an integer code
"n:d:b".  All randomness sits behind --seed, so every reported number is
reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import identify, oracle
from .flow import generic_rank, t_separating_cut
from .graph import GraphId, MixedGraph, decode_id, encode_id, graph_from_json, graph_to_json

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INFINITE_TO_ONE = 2
EXIT_UNKNOWN = 3

_CODE_RE = re.compile(r"^\d+:\d+:\d+$")


class InputError(Exception):
    pass


def load_graph(source: str) -> MixedGraph:
    """Read a graph from an inline n:d:b code or a JSON file path."""
    if _CODE_RE.match(source.strip()):
        try:
            return decode_id(GraphId.parse(source))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    path = Path(source)
    if not path.exists():
        raise InputError(f"no such file: {source}")
    try:
        return graph_from_json(path.read_text())
    except ValueError as exc:
        raise InputError(f"{source}: {exc}") from exc


def _parse_vertices(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"vertex list {text!r} must be comma-separated integers") from exc


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)


def _default_max_set_size() -> int | None:
    env = os.environ.get("SEMID_MAX_SET_SIZE")
    return int(env) if env else None


def _add_common(parser: argparse.ArgumentParser, seed: bool = True) -> None:
    parser.add_argument("--output", "-o", default=None, help="write result to file instead of stdout")
    parser.add_argument("--format", choices=("json", "table"), default="table",
                        help="output format (json is the stable contract)")
    if seed:
        parser.add_argument("--seed", type=int, default=0, help="base seed for all randomness")


def cmd_identify(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    report = identify.certify(
        g,
        max_set_size=args.max_set_size,
        verify=not args.no_verify,
        seed=args.seed,
        seeds=args.seeds,
        tolerance=args.tolerance,
    )
    if args.format == "json":
        _emit(json.dumps(report.to_json_dict(), indent=2), args.output)
    else:
        lines = []
        for edge, cert in report.certificates.items():
            method = f" via {cert.method}" if cert.method else ""
            extra = ""
            if cert.verification is not None:
                extra = f"  (max rel err {cert.verification['max_rel_err']:.2e} over {cert.verification['seeds']} seeds)"
            lines.append(f"{edge[0]}->{edge[1]}: {cert.status}{method}{extra}")
        lines.append(
            "parameterization: "
            + ("infinite-to-one (rank-deficient Jacobian)"
               if report.parameterization_infinite_to_one else "full-rank Jacobian")
        )
        _emit("\n".join(lines), args.output)
    counts = report.counts()
    if counts[identify.INFINITE_TO_ONE]:
        return EXIT_INFINITE_TO_ONE
    if counts[identify.UNKNOWN]:
        return EXIT_UNKNOWN
    return EXIT_OK


def cmd_rank(args: argparse.Namespace, with_cut: bool = False) -> int:
    g = load_graph(args.graph)
    S = _parse_vertices(args.sources)
    T = _parse_vertices(args.targets)
    for x in S + T:
        if not 1 <= x <= g.n:
            raise InputError(f"vertex {x} outside 1..{g.n}")
    rank = generic_rank(g, S, T)
    payload: dict = {"rank": rank}
    show_cut = with_cut or args.cut
    if show_cut:
        left, right = t_separating_cut(g, S, T)
        payload["cut"] = {"L": list(left), "R": list(right)}
    if args.format == "json":
        _emit(json.dumps(payload), args.output)
    elif show_cut:
        cut = payload["cut"]
        _emit(f"rank {rank}\nL = {cut['L']}\nR = {cut['R']}", args.output)
    else:
        _emit(str(rank), args.output)
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    try:
        gid = GraphId.parse(args.code)
        g = decode_id(gid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(graph_to_json(g), args.output)
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    _emit(str(encode_id(g)), args.output)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    params = oracle.sample_parameters(g, args.seed)
    sigma = oracle.covariance(params)
    payload = {
        "n": g.n,
        "seed": args.seed,
        "lambda": params.lam.tolist(),
        "omega": params.omega.tolist(),
        "sigma": sigma.tolist(),
    }
    if args.format == "json":
        _emit(json.dumps(payload, indent=2), args.output)
    else:
        with np.printoptions(precision=6, suppress=True):
            _emit(
                f"lambda =\n{params.lam}\nomega =\n{params.omega}\nsigma =\n{sigma}",
                args.output,
            )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    report = identify.certify(
        g, max_set_size=args.max_set_size, verify=False, seed=args.seed
    )
    identifiable = [c for c in report.certificates.values() if c.status == identify.IDENTIFIABLE]
    seeds = [args.seed + 7919 * i for i in range(args.seeds)]
    status = EXIT_OK
    try:
        errors = identify.verify_certificates(g, identifiable, seeds, args.tolerance)
    except identify.CertificateError as exc:
        _emit(f"verification FAILED: {exc}", args.output)
        return EXIT_INFINITE_TO_ONE
    if args.format == "json":
        payload = {
            "seeds": args.seeds,
            "tolerance": args.tolerance,
            "edges": [
                {"edge": list(edge), "max_rel_err": err} for edge, err in sorted(errors.items())
            ],
        }
        _emit(json.dumps(payload, indent=2), args.output)
    else:
        lines = [
            f"{u}->{w}: max rel err {err:.3e} over {args.seeds} seeds"
            for (u, w), err in sorted(errors.items())
        ]
        lines.append(f"all {len(errors)} identifiable edges within {args.tolerance:g}")
        _emit("\n".join(lines), args.output)
    return status


_ALGORITHMS = ("htc", "eid", "tsid", "eid+tsid")


def _run_algorithm(name: str, g: MixedGraph, max_set_size: int | None) -> set:
    if name == "htc":
        return identify.htc_identify(g).solved_edges
    if name == "eid":
        return identify.eid_identify(g).solved_edges
    if name == "tsid":
        return identify.tsid_identify(g, max_set_size=max_set_size).solved_edges
    return identify.eid_tsid_identify(g, max_set_size).solved_edges


def cmd_corpus(args: argparse.Namespace) -> int:
    path = Path(args.corpus)
    if not path.exists():
        raise InputError(f"no such file: {args.corpus}")
    algorithms = [a.strip() for a in args.algorithms.split(",")]
    for a in algorithms:
        if a not in _ALGORITHMS:
            raise InputError(f"unknown algorithm {a!r}; choose from {', '.join(_ALGORITHMS)}")
    rows = []
    totals = {a: 0 for a in algorithms}
    had_errors = False
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            g = decode_id(GraphId.parse(line))
        except ValueError as exc:
            print(f"{args.corpus}:{lineno}: skipped: {exc}", file=sys.stderr)
            had_errors = True
            continue
        row = {"code": line, "edges": len(g.directed)}
        for a in algorithms:
            solved = len(_run_algorithm(a, g, args.max_set_size))
            row[a] = solved
            if solved == len(g.directed):
                totals[a] += 1
        rows.append(row)
    summary = {
        "graphs": len(rows),
        "fully_identified": totals,
        "per_graph": rows,
    }
    if args.format == "json":
        _emit(json.dumps(summary, indent=2), args.output)
    else:
        lines = []
        for row in rows:
            cells = "  ".join(f"{a}={row[a]}/{row['edges']}" for a in algorithms)
            lines.append(f"{row['code']}  {cells}")
        lines.append(
            f"fully identified out of {len(rows)}: "
            + "  ".join(f"{a}={totals[a]}" for a in algorithms)
        )
        _emit("\n".join(lines), args.output)
    return EXIT_INPUT_ERROR if had_errors else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semid",
        description="per-edge generic identifiability certificates for linear SEM mixed graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="certify every directed edge")
    p.add_argument("graph", help="graph JSON file or inline n:d:b code")
    p.add_argument("--max-set-size", type=int, default=_default_max_set_size(),
                   help="bound on |S| in the determinantal search (default: vertex count; env SEMID_MAX_SET_SIZE)")
    p.add_argument("--no-verify", action="store_true", help="skip the numeric replay of certificates")
    p.add_argument("--seeds", type=int, default=3, help="number of verification seeds")
    p.add_argument("--tolerance", type=float, default=1e-6, help="max relative replay error")
    _add_common(p)
    p.set_defaults(func=cmd_identify)

    for name, with_cut in (("rank", False), ("cut", True)):
        p = sub.add_parser(name, help="generic rank of a covariance submatrix"
                           + (" with a minimum t-separating cut" if with_cut else ""))
        p.add_argument("graph")
        p.add_argument("-S", "--sources", required=True, help="comma-separated row vertices")
        p.add_argument("-T", "--targets", required=True, help="comma-separated column vertices")
        p.add_argument("--cut", action="store_true", help="also print a minimum t-separating cut")
        _add_common(p, seed=False)
        p.set_defaults(func=cmd_rank, with_cut=with_cut)

    p = sub.add_parser("decode", help="expand an n:d:b code to graph JSON")
    p.add_argument("code")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("encode", help="encode a graph JSON file as n:d:b")
    p.add_argument("graph")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("sample", help="sample parameters and covariance for a graph")
    p.add_argument("graph")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="replay identifiable edges over many seeds")
    p.add_argument("graph")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--max-set-size", type=int, default=_default_max_set_size())
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("corpus", help="batch-run solvers over a file of n:d:b codes")
    p.add_argument("corpus", help="file with one n:d:b code per line, '#' comments")
    p.add_argument("--algorithms", default="htc,eid,tsid,eid+tsid",
                   help="comma-separated subset of: " + ", ".join(_ALGORITHMS))
    p.add_argument("--max-set-size", type=int, default=_default_max_set_size())
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_corpus)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "tolerance", 1.0) <= 0:
            raise InputError("tolerance must be positive")
        max_set_size = getattr(args, "max_set_size", None)
        if max_set_size is not None and max_set_size < 1:
            raise InputError("max-set-size must be at least 1")
        if args.func is cmd_rank:
            return cmd_rank(args, with_cut=args.with_cut)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except identify.CertificateError as exc:
        print(f"certificate error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
