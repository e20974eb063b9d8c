"""Command-line interface.

Subcommands
-----------
graphs    enumerate stable dual graphs of (g, n)
basis     enumerate the strata-algebra basis of (g, n, r)
relation  evaluate one tautological relation as a basis vector
span      write the relation span as a MatrixMarket file
rank      certified rank and quotient report for (g, n, r)
verify    run internal consistency suites

Read-only reports are cached under TAUTREL_CACHE_DIR (default
~/.cache/tautrel), keyed by schema version, command, and parameters.
`--no-cache` recomputes and fails if the stored bytes differ from the
fresh output.  Exit codes: 0 success, 2 invalid parameters, 3 internal
consistency failure (including any FAIL from `verify`).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path

from .dualgraph import enumerate_graphs, graph_to_schema, make_graph
from .errors import InternalConsistencyError, InvalidParameterError
from .exactla import (
    PRIMES,
    _is_prime,
    certified_rank,
    format_fraction,
    rank_exact,
    write_matrix_market,
)
from .ideal import (
    ideal_closure_check,
    set_workers,
    span_job_to_schema,
    span_matrix,
)
from .kappaop import kappa_hat_op, kappa_hat_perm_sum, kappa_op, kappa_op_perm_sum
from .relations import RelationParams, enumerate_params, relation
from .series import check_ab_identity, edge_factor
from .strata import (
    TautVector,
    basis_index,
    enumerate_basis,
    forgetful_pullback,
    glue_pullback,
    glue_pushforward,
    glue_pushforward_tensor,
    monomial_to_schema,
    multiply,
    relabel_markings,
    tensor_from_factors,
    tensor_multiply,
)

SCHEMA_VERSION = 1

_JSON_SEP = (",", ":")


# ---------------------------------------------------------------------------
# caching


def _cache_dir() -> Path:
    env = os.environ.get("TAUTREL_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME")
    root = Path(base) if base else Path.home() / ".cache"
    return root / "tautrel"


def _cache_key(command: str, params: dict) -> str:
    return json.dumps(
        {"schema": SCHEMA_VERSION, "command": command, "params": params},
        sort_keys=True,
        separators=_JSON_SEP,
    )


def _cached_output(command: str, params: dict, no_cache: bool, compute) -> str:
    """Return the report text, serving byte-identical bytes from the cache.

    With no_cache the text is recomputed and, if a cache entry exists, the
    stored bytes must match exactly.
    """
    key = _cache_key(command, params)
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    base = _cache_dir()
    out_path = base / f"{digest}.out"
    meta_path = base / f"{digest}.json"
    if no_cache:
        text = compute()
        if out_path.exists() and out_path.read_bytes() != text.encode("utf-8"):
            raise InternalConsistencyError(
                f"cached output for {command} differs from a fresh computation"
            )
        return text
    if out_path.exists() and meta_path.exists():
        data = out_path.read_bytes()
        try:
            meta = json.loads(meta_path.read_text("utf-8"))
        except ValueError:
            meta = None
        if (
            isinstance(meta, dict)
            and meta.get("key") == key
            and meta.get("sha256") == hashlib.sha256(data).hexdigest()
        ):
            return data.decode("utf-8")
    text = compute()
    data = text.encode("utf-8")
    base.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(data)
    meta = {"key": key, "sha256": hashlib.sha256(data).hexdigest()}
    meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n", "utf-8")
    return text


# ---------------------------------------------------------------------------
# shared formatting


def _parse_int_tuple(text: str, what: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise InvalidParameterError(
            f"{what} must be a comma-separated list of integers"
        ) from exc


def _parse_primes(text: str) -> tuple:
    primes = _parse_int_tuple(text, "--prime")
    if not primes:
        raise InvalidParameterError("--prime needs at least one value")
    for p in primes:
        if p < 3 or not _is_prime(p):
            raise InvalidParameterError(f"{p} is not an odd prime")
    return primes


def _graph_text(G) -> str:
    genera = ",".join(str(h) for h in G.genera)
    legs = ";".join(",".join(str(m) for m in lv) or "-" for lv in G.legs)
    edges = ";".join(f"{a}-{b}" for a, b in G.edges) or "-"
    return f"genera=[{genera}] legs=[{legs}] edges=[{edges}]"


def _monomial_text(m) -> str:
    kap = ";".join(",".join(str(i) for i in kv) or "-" for kv in m.kappa)
    psi = ",".join(str(e) for e in m.psi) or "-"
    return f"{_graph_text(m.graph)} kappa=[{kap}] psi=[{psi}]"


def _render_sparsity(M, path: str) -> None:
    """Scatter plot of the nonzero pattern, row index growing downwards."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = []
    ys = []
    for i, row in enumerate(M.rows):
        for c in row:
            xs.append(c)
            ys.append(i)
    fig, ax = plt.subplots(figsize=(6.4, 6.4))
    ax.scatter(xs, ys, s=2.0, marker="s", linewidths=0, color="#1a1a2e")
    ax.set_xlim(-0.5, max(M.ncols - 0.5, 0.5))
    ax.set_ylim(max(M.nrows - 0.5, 0.5), -0.5)
    ax.set_xlabel("basis column")
    ax.set_ylabel("generator row")
    ax.set_title(f"{M.nrows} rows x {M.ncols} columns, {len(xs)} entries")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_graphs(args) -> int:
    g, n = args.genus, args.markings

    def compute() -> str:
        graphs = enumerate_graphs(g, n, args.max_edges)
        lines = []
        for i, G in enumerate(graphs):
            if args.format == "json":
                lines.append(
                    json.dumps(
                        {"index": i, **graph_to_schema(G)},
                        sort_keys=True,
                        separators=_JSON_SEP,
                    )
                )
            else:
                lines.append(f"{i}: {_graph_text(G)}")
        lines.append("")
        return "\n".join(lines)

    params = {"g": g, "n": n, "max_edges": args.max_edges, "format": args.format}
    sys.stdout.write(_cached_output("graphs", params, args.no_cache, compute))
    return 0


def _cmd_basis(args) -> int:
    g, n, r = args.genus, args.markings, args.degree

    def compute() -> str:
        basis = enumerate_basis(g, n, r)
        lines = []
        for i, m in enumerate(basis):
            if args.format == "json":
                lines.append(
                    json.dumps(
                        {"index": i, "monomial": monomial_to_schema(m)},
                        sort_keys=True,
                        separators=_JSON_SEP,
                    )
                )
            else:
                lines.append(f"{i}: {_monomial_text(m)}")
        lines.append("")
        return "\n".join(lines)

    params = {"g": g, "n": n, "r": r, "format": args.format}
    sys.stdout.write(_cached_output("basis", params, args.no_cache, compute))
    return 0


def _relation_entries(p: RelationParams) -> list:
    vec = relation(p)
    index = basis_index(p.g, p.n, p.r)
    return sorted((index[m], m, c) for m, c in vec.terms.items())


def _relation_json(entries) -> str:
    payload = [
        {"index": i, "coeff": format_fraction(c), "monomial": monomial_to_schema(m)}
        for i, m, c in entries
    ]
    return json.dumps(payload, sort_keys=True, separators=_JSON_SEP) + "\n"


def _cmd_relation(args) -> int:
    g, n, r = args.genus, args.markings, args.degree
    sigma = _parse_int_tuple(args.sigma, "--sigma")
    avec = (0,) * n if args.a is None else _parse_int_tuple(args.a, "--a")
    p = RelationParams(g, n, r, sigma, avec)

    def compute() -> str:
        entries = _relation_entries(p)
        if args.format == "json":
            return _relation_json(entries)
        lines = [f"{i} {format_fraction(c)} {_monomial_text(m)}" for i, m, c in entries]
        lines.append("")
        return "\n".join(lines)

    params = {
        "g": g,
        "n": n,
        "r": r,
        "sigma": list(p.sigma),
        "a": list(p.a),
        "format": args.format,
    }
    if args.out:
        Path(args.out).write_text(_relation_json(_relation_entries(p)), "utf-8")
        sys.stdout.write(compute())
    else:
        sys.stdout.write(_cached_output("relation", params, args.no_cache, compute))
    return 0


def _summary_text(summary: dict, order: tuple) -> str:
    parts = [f"{key}={summary[key]}" for key in order if key in summary]
    return " ".join(parts) + "\n"


def _cmd_span(args) -> int:
    set_workers(args.threads)
    g, n, r = args.genus, args.markings, args.degree
    M = span_matrix(g, n, r)
    write_matrix_market(args.out, M)
    summary = {
        "rows": M.nrows,
        "cols": M.ncols,
        "entries": sum(len(row) for row in M.rows),
        "matrix": args.out,
    }
    if args.jobs_out:
        with open(args.jobs_out, "w", encoding="utf-8") as fh:
            for i, job in enumerate(M.provenance):
                record = {"row": i, "job": span_job_to_schema(job)}
                fh.write(json.dumps(record, sort_keys=True, separators=_JSON_SEP))
                fh.write("\n")
        summary["jobs"] = args.jobs_out
    if args.prime is not None:
        primes = _parse_primes(args.prime)
        if len(primes) != 1:
            raise InvalidParameterError("span takes a single --prime")
        companion = args.companion_out or f"{args.out}.mod{primes[0]}"
        write_matrix_market(companion, M, prime=primes[0])
        summary["prime"] = primes[0]
        summary["companion"] = companion
    if args.figure:
        _render_sparsity(M, args.figure)
        summary["figure"] = args.figure
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        order = ("rows", "cols", "entries", "matrix", "jobs", "prime", "companion", "figure")
        sys.stdout.write(_summary_text(summary, order))
    return 0


def _rank_report(g: int, n: int, r: int, primes: tuple, verify_rational: bool):
    M = span_matrix(g, n, r)
    cert = certified_rank(M, primes=primes)
    report = {
        "basis": M.ncols,
        "rank": cert.rank,
        "quotient": M.ncols - cert.rank,
        "primes": list(cert.primes),
    }
    if verify_rational:
        exact = rank_exact(M)
        if exact != cert.rank:
            raise InternalConsistencyError(
                f"rational rank {exact} disagrees with certified rank {cert.rank}"
            )
        report["rational_rank"] = exact
    return M, report


def _cmd_rank(args) -> int:
    set_workers(args.threads)
    g, n, r = args.genus, args.markings, args.degree
    primes = PRIMES if args.prime is None else _parse_primes(args.prime)

    def render(report: dict) -> str:
        if args.format == "json":
            return json.dumps(report, sort_keys=True) + "\n"
        summary = dict(report)
        summary["primes"] = ",".join(str(p) for p in report["primes"])
        order = ("basis", "rank", "quotient", "primes", "rational_rank")
        return _summary_text(summary, order)

    if args.figure:
        M, report = _rank_report(g, n, r, primes, args.verify_rational)
        _render_sparsity(M, args.figure)
        sys.stdout.write(render(report))
        return 0

    def compute() -> str:
        _, report = _rank_report(g, n, r, primes, args.verify_rational)
        return render(report)

    params = {
        "g": g,
        "n": n,
        "r": r,
        "primes": list(primes),
        "verify_rational": args.verify_rational,
        "format": args.format,
    }
    sys.stdout.write(_cached_output("rank", params, args.no_cache, compute))
    return 0


# ---------------------------------------------------------------------------
# verification suites


_PROPERTY_SPACES = ((0, 4), (0, 5), (1, 1), (1, 2), (2, 0))


def _random_vector(rng, g, n, r, max_terms=3) -> TautVector:
    basis = enumerate_basis(g, n, r)
    k = rng.randint(1, min(max_terms, len(basis)))
    terms = {}
    for m in rng.sample(list(basis), k):
        terms[m] = Fraction(rng.randint(-4, 4), rng.randint(1, 3))
    return TautVector(g, n, r, terms)


def _suite_series(order: int, samples: int, seed: int) -> list:
    checks = [
        (
            "series:ab-identity",
            bool(check_ab_identity(order)),
            f"order {order}",
        )
    ]
    edge_order = min(order, 30)
    try:
        edge_factor(edge_order)
        ok, detail = True, f"divisible through order {edge_order}"
    except InternalConsistencyError as exc:
        ok, detail = False, str(exc)
    checks.append(("series:edge-divisibility", ok, detail))
    return checks


def _suite_algebra(order: int, samples: int, seed: int) -> list:
    rng = random.Random(seed)
    assoc = comm = True
    for _ in range(samples):
        g, n = _PROPERTY_SPACES[rng.randrange(len(_PROPERTY_SPACES))]
        u = _random_vector(rng, g, n, rng.randint(0, 1))
        v = _random_vector(rng, g, n, rng.randint(0, 1))
        w = _random_vector(rng, g, n, rng.randint(0, 1))
        assoc = assoc and multiply(multiply(u, v), w) == multiply(u, multiply(v, w))
        comm = comm and multiply(u, v) == multiply(v, u)
    cases = (
        (make_graph([0], [(1,)], [(0, 0)]), ((0, 3),)),
        (make_graph([1, 1], [(), ()], [(0, 1)]), ((1, 1), (1, 1))),
        (make_graph([0, 0], [(1, 2), (3, 4)], [(0, 1)]), ((0, 3), (0, 3))),
    )
    proj = True
    for _ in range(samples):
        G, spaces = cases[rng.randrange(len(cases))]
        factors = [_random_vector(rng, gv, nv, rng.randint(0, 1)) for gv, nv in spaces]
        w = _random_vector(rng, G.g, G.n, 1)
        lhs = multiply(glue_pushforward(G, factors), w)
        t = tensor_multiply(tensor_from_factors(factors), glue_pullback(G, w))
        rhs = glue_pushforward_tensor(G, t)
        # zero classes may be tracked at different degrees; both-empty is equal
        proj = proj and (lhs == rhs or (not lhs.terms and not rhs.terms))
    hom = True
    for _ in range(samples):
        g, n = ((1, 1), (0, 4))[rng.randrange(2)]
        u = _random_vector(rng, g, n, rng.randint(0, 1))
        v = _random_vector(rng, g, n, rng.randint(0, 1))
        lhs = forgetful_pullback(multiply(u, v))
        hom = hom and lhs == multiply(forgetful_pullback(u), forgetful_pullback(v))
    note = f"{samples} random instances"
    return [
        ("algebra:associativity", assoc, note),
        ("algebra:commutativity", comm, note),
        ("algebra:projection-formula", proj, note),
        ("algebra:pullback-homomorphism", hom, note),
    ]


def _suite_kappa(order: int, samples: int, seed: int) -> list:
    plain = True
    count = 0
    for length in range(6):
        for mono in combinations_with_replacement(range(4), length):
            plain = plain and kappa_op(mono) == kappa_op_perm_sum(mono)
            count += 1
    hatted = True
    hcount = 0
    symbols = tuple((i, b) for i in (1, 2) for b in (0, 1))
    for length in range(6):
        for mono in combinations_with_replacement(symbols, length):
            for nv in (1, 2):
                hatted = hatted and kappa_hat_op(mono, nv) == kappa_hat_perm_sum(
                    mono, nv
                )
                hcount += 1
    return [
        ("kappa:set-partition", plain, f"{count} monomials"),
        ("kappa:hatted-set-partition", hatted, f"{hcount} monomials"),
    ]


def _suite_sn(order: int, samples: int, seed: int) -> list:
    ok = True
    count = 0
    for g in range(3):
        for n in range(2, 5):
            if 3 * g - 3 + n < 0 or (g == 0 and n < 3):
                continue
            swaps = [
                tuple(j + 1 if j != i and j != i + 1 else (i + 2 if j == i else i + 1)
                      for j in range(n))
                for i in range(n - 1)
            ]
            for r in range(1, 3):
                for p in enumerate_params(g, n, r):
                    if len(set(p.a)) > 1:
                        continue
                    rel = relation(p)
                    for perm in swaps:
                        ok = ok and relabel_markings(rel, perm) == rel
                        count += 1
    return [("sn:relation-invariance", ok, f"{count} relabelings")]


def _suite_ideal(order: int, samples: int, seed: int) -> list:
    checks = []
    for g, n, r in ((1, 1, 1), (0, 4, 1), (2, 0, 1)):
        report = ideal_closure_check(g, n, r, samples, seed=seed)
        checks.append(
            (
                f"ideal:closure-({g},{n},{r})",
                report.passed,
                f"{len(report.checked)} products",
            )
        )
        cert = certified_rank(span_matrix(g, n, r))
        checks.append(
            (
                f"ideal:prime-agreement-({g},{n},{r})",
                len({rk for _, rk in cert.ranks}) == 1 and not cert.escalated,
                f"rank {cert.rank} at {len(cert.primes)} primes",
            )
        )
    return checks


_SUITES = {
    "series": _suite_series,
    "algebra": _suite_algebra,
    "kappa": _suite_kappa,
    "sn": _suite_sn,
    "ideal": _suite_ideal,
}


def verify_all(suites=None, order=50, samples=25, seed=0) -> list:
    """Run the named suites (default all) and return (name, ok, detail) rows."""
    checks = []
    for name in suites or _SUITES:
        if name not in _SUITES:
            raise InvalidParameterError(f"unknown suite {name!r}")
        checks.extend(_SUITES[name](order, samples, seed))
    return checks


def _cmd_verify(args) -> int:
    suites = None if args.suite == "all" else [args.suite]
    checks = verify_all(
        suites, order=args.order, samples=args.samples, seed=args.seed
    )
    passed = sum(1 for _, ok, _ in checks if ok)
    if args.format == "json":
        payload = {
            "checks": [
                {"name": name, "ok": ok, "detail": detail}
                for name, ok, detail in checks
            ],
            "passed": passed,
            "total": len(checks),
        }
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        for name, ok, detail in checks:
            status = "PASS" if ok else "FAIL"
            sys.stdout.write(f"{status} {name} ({detail})\n")
        sys.stdout.write(f"passed {passed} of {len(checks)} checks\n")
    return 0 if passed == len(checks) else 3


# ---------------------------------------------------------------------------
# parser


def _add_target(sp, degree: bool = True) -> None:
    sp.add_argument("--genus", type=int, required=True, help="genus g")
    sp.add_argument("--markings", type=int, default=0, help="number of markings n")
    if degree:
        sp.add_argument("--degree", type=int, required=True, help="degree r")


def _add_common(sp) -> None:
    sp.add_argument("--format", choices=("json", "text"), default="json")
    sp.add_argument("--no-cache", action="store_true", help="recompute and compare")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tautrel",
        description="Strata algebras, tautological relations, and quotient ranks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("graphs", help="enumerate stable dual graphs")
    _add_target(sp, degree=False)
    sp.add_argument("--max-edges", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_graphs)

    sp = sub.add_parser("basis", help="enumerate the strata-algebra basis")
    _add_target(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_basis)

    sp = sub.add_parser("relation", help="evaluate one relation")
    _add_target(sp)
    sp.add_argument("--sigma", default="", help="partition, e.g. 3,1")
    sp.add_argument("--a", default=None, help="marking vector, e.g. 1,0 (default all 0)")
    sp.add_argument("--out", default=None, help="write the JSON term list here")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_relation)

    sp = sub.add_parser("span", help="write the relation span matrix")
    _add_target(sp)
    sp.add_argument("--out", required=True, help="MatrixMarket output path")
    sp.add_argument("--jobs-out", default=None, help="JSONL job descriptors")
    sp.add_argument("--prime", default=None, help="also write a mod-p companion")
    sp.add_argument("--companion-out", default=None)
    sp.add_argument("--figure", default=None, help="sparsity plot output path")
    sp.add_argument("--threads", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_span)

    sp = sub.add_parser("rank", help="certified rank and quotient report")
    _add_target(sp)
    sp.add_argument("--prime", default=None, help="comma-separated primes")
    sp.add_argument(
        "--verify-rational",
        action="store_true",
        help="cross-check with exact rational elimination",
    )
    sp.add_argument("--figure", default=None, help="sparsity plot output path")
    sp.add_argument("--threads", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_rank)

    sp = sub.add_parser("verify", help="run internal consistency suites")
    sp.add_argument("--suite", choices=("all",) + tuple(_SUITES), default="all")
    sp.add_argument("--order", type=int, default=50)
    sp.add_argument("--samples", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("json", "text"), default="text")
    sp.set_defaults(handler=_cmd_verify)

    return parser


def run(argv=None) -> int:
    """Parse argv, dispatch, and map errors to exit codes (0, 2, 3)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return 3


main = run


if __name__ == "__main__":
    raise SystemExit(run())
