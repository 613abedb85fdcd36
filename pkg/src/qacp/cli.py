"""Command-line front end: ``qacp {parse,normalize,lts,bisim,verify-e91}``."""

from __future__ import annotations

import argparse
import sys

from .bisim import MODES, BisimError, compare
from .e91 import MAX_PAIRS, E91Error, build_e91, verify_e91
from .model import Model
from .parser import ParseError, parse_spec
from .quantum import TOL, QuantumStateError
from .rewrite import RewriteError, Rewriter
from .sos import Configuration, SOSError, build_lts, dump_lts, to_dot
from .terms import RecVar, render

EX_OK, EX_USAGE, EX_DATAERR, EX_NOINPUT, EX_UNAVAILABLE = 0, 64, 65, 66, 69


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def _positive(kind):
    def conv(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {s}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {s}")
        return v
    return conv


def _csv(s: str) -> tuple[str, ...]:
    vals = tuple(v.strip() for v in s.split(",") if v.strip())
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=_positive(float), default=TOL,
                        help="quantum-state tolerance (default 1e-9)")
    common.add_argument("--max-configs", type=_positive(int), default=100_000,
                        help="LTS node cap (default 100000)")

    p = _Parser(prog="qacp", description="qACP toolkit with shadow constants and entanglement merge")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("parse", parents=[common], help="parse a specification and summarise it")
    sp.add_argument("file")

    sn = sub.add_parser("normalize", parents=[common], help="normal form of a definition")
    sn.add_argument("file")
    sn.add_argument("--name", help="definition to normalise (default: all)")
    sn.add_argument("--trace", action="store_true", help="also print the applied rule ids")

    sl = sub.add_parser("lts", parents=[common], help="explore and dump the LTS of a definition")
    sl.add_argument("file")
    sl.add_argument("--name", help="root definition (default: the first one)")
    sl.add_argument("--max-depth", type=_positive(int))
    sl.add_argument("--dump-states", action="store_true", help="print full density matrices")
    sl.add_argument("--dot", action="store_true", help="emit Graphviz dot instead of the dump")

    sb = sub.add_parser("bisim", parents=[common], help="compare the roots of two specifications")
    sb.add_argument("file_a")
    sb.add_argument("file_b")
    sb.add_argument("--name-a")
    sb.add_argument("--name-b")
    sb.add_argument("--mode", choices=MODES, default="strong")
    sb.add_argument("--ignore-states", action="store_true",
                    help="compare label structure only")

    se = sub.add_parser("verify-e91", parents=[common], help="check the E91 model against its loop")
    se.add_argument("--pairs", type=_positive(int), default=1)
    se.add_argument("--delta-i", type=_csv, default=("d",))
    se.add_argument("--delta-o", type=_csv, default=("e",))
    se.add_argument("--drop-shadow", choices=("alice", "bob"))
    return p


def _load(path: str) -> Model:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise FileNotFoundError(f"{path}: {e.strerror}") from None
    try:
        return parse_spec(text)
    except ParseError as e:
        e.path = path
        raise


def _root(model: Model, name: str | None, path: str):
    if name is None:
        if not model.definitions:
            raise _Usage(f"{path} has no definitions")
        name = next(iter(model.definitions))
    if name not in model.definitions:
        raise _Usage(f"{path} has no definition {name}")
    return RecVar(name)


def _defaults(model: Model) -> dict:
    return {k: op.qubits for k, op in model.ops.items()}


def cmd_parse(args, out) -> int:
    m = _load(args.file)
    out.write(f"qubits: {', '.join(m.qubits) or '-'}\n")
    for name, op in m.ops.items():
        on = ", ".join(op.qubits) or "-"
        out.write(f"operation {name}: {len(op.kraus)} Kraus operator(s) on {on}\n")
    for d in m.states:
        out.write(d.render() + "\n")
    for a, b, c in m.gamma.declarations:
        out.write(f"gamma({a.key}, {b.key}) = {c.key}\n")
    for name, vals in m.domains.items():
        out.write(f"domain {name} = {{{', '.join(vals)}}}\n")
    for name, names in m.sets.items():
        out.write(f"set {name} = {{{', '.join(sorted(names))}}}\n")
    for name, body in m.definitions.items():
        out.write(f"{name} = {render(body)}\n")
    for spec in m.recursion:
        out.write(f"recursion: {{{', '.join(spec.equations)}}}\n")
    return EX_OK


def cmd_normalize(args, out) -> int:
    m = _load(args.file)
    names = [args.name] if args.name else list(m.definitions)
    for n in names:
        if n not in m.definitions:
            raise _Usage(f"{args.file} has no definition {n}")
    rw = Rewriter(m.gamma)
    d = _defaults(m)
    for n in names:
        nf, trace = rw.normal_form(m.definitions[n])
        text = render(nf, d)
        out.write(text + "\n" if len(names) == 1 else f"{n} = {text}\n")
        if args.trace:
            out.write("trace: " + (" ".join(trace) or "-") + "\n")
    return EX_OK


def cmd_lts(args, out, err) -> int:
    m = _load(args.file)
    root = _root(m, args.name, args.file)
    lts = build_lts(Configuration(root, m.initial_state()), m, args.max_configs, args.max_depth, args.tol)
    out.write(to_dot(lts) if args.dot else dump_lts(lts, args.dump_states))
    if lts.truncated:
        err.write(f"qacp: exploration truncated at {len(lts)} configurations\n")
        return EX_UNAVAILABLE
    return EX_OK


def cmd_bisim(args, out, err) -> int:
    ma, mb = _load(args.file_a), _load(args.file_b)
    la = build_lts(Configuration(_root(ma, args.name_a, args.file_a), ma.initial_state()), ma,
                   args.max_configs, tol=args.tol)
    lb = build_lts(Configuration(_root(mb, args.name_b, args.file_b), mb.initial_state()), mb,
                   args.max_configs, tol=args.tol)
    if la.truncated or lb.truncated:
        err.write("qacp: LTS exploration truncated; raise --max-configs\n")
        return EX_UNAVAILABLE
    res = compare(la, lb, args.mode, not args.ignore_states, args.tol)
    out.write(str(res) + "\n")
    if res.reason:
        err.write(f"qacp: {res.reason}\n")
    return res.exit_code


def cmd_verify(args, out, err) -> int:
    if args.pairs > MAX_PAIRS:
        raise _Usage(f"--pairs must be at most {MAX_PAIRS}")
    m = build_e91(args.pairs, args.delta_i, args.delta_o, args.drop_shadow)
    try:
        rep = verify_e91(m, args.max_configs, args.tol)
    except E91Error as e:
        err.write(f"qacp: {e}\n")
        return EX_UNAVAILABLE
    out.write(rep.to_text())
    return rep.verdict.exit_code


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    p = build_parser()
    try:
        args = p.parse_args(argv)
        if args.command == "parse":
            return cmd_parse(args, out)
        if args.command == "normalize":
            return cmd_normalize(args, out)
        if args.command == "lts":
            return cmd_lts(args, out, err)
        if args.command == "bisim":
            return cmd_bisim(args, out, err)
        return cmd_verify(args, out, err)
    except _Usage as e:
        err.write(f"qacp: usage error: {e}\n")
        return EX_USAGE
    except FileNotFoundError as e:
        err.write(f"qacp: {e}\n")
        return EX_NOINPUT
    except ParseError as e:
        where = f"{getattr(e, 'path', '<input>')}:{e.line}:{e.col}"
        err.write(f"qacp: parse error: {where}: {e.msg}\n")
        return EX_DATAERR
    except RewriteError as e:
        err.write(f"qacp: {e}\n")
        return EX_UNAVAILABLE
    except (SOSError, QuantumStateError, BisimError, E91Error) as e:
        err.write(f"qacp: {e}\n")
        return EX_DATAERR
    except SystemExit as e:       # --help
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
