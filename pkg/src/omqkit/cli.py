"""Command line front end.

Exit codes: 0 success (whatever the decision), 2 parse or validation
error, 3 unsupported input or exceeded size bound, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, csp, ddlog, dl, msnp, translate
from .core import (Instance, OmqError, ParseError, SizeBoundError, UnsupportedError,
                   ValidationError, format_instance, iter_lines, parse_instance)

FORMATS = ("omq", "ddlog", "msnp", "template", "facts")
SOURCES = ("alc-aq", "alc-baq", "alc-conq", "mddlog", "commsnp", "gmsnp", "mmsnp2", "fgddlog")
TARGETS = SOURCES + ("alc-ucq",)


def detect_format(text: str) -> str:
    """Guess the format from the first keyword after an optional schema line."""
    for _, line in iter_lines(text):
        key = line.split(None, 1)[0].split("(", 1)[0]
        if key == "schema":
            continue
        if key in ("axiom", "query"):
            return "omq"
        if key == "msnp":
            return "msnp"
        if key in ("domain", "const", "fact", "---"):
            return "template"
        if ":-" in line:
            return "ddlog"
        return "facts"
    return "facts"


def load(path: str, fmt: str | None = None):
    text = read(path)
    fmt = fmt or detect_format(text)
    if fmt == "omq":
        return dl.parse_omq(text)
    if fmt == "ddlog":
        return ddlog.parse_program(text)
    if fmt == "msnp":
        return msnp.parse_msnp(text)
    if fmt == "template":
        return csp.parse_family(text)
    return parse_instance(text)


def read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def render(obj, header: str) -> str:
    if isinstance(obj, dl.OmqQuery):
        return f"# {header}\n" + dl.format_omq(obj)
    if isinstance(obj, ddlog.Program):
        return ddlog.format_program(obj, header)
    if isinstance(obj, msnp.MsnpFormula):
        return msnp.format_msnp(obj, header)
    if isinstance(obj, csp.TemplateFamily):
        return csp.format_family(obj, header)
    return f"# {header}\n" + format_instance(obj)


def _need(obj, kind, what: str):
    if not isinstance(obj, kind):
        raise ValidationError(f"expected {what}")
    return obj


def _omq_source(obj, src: str) -> dl.OmqQuery:
    omq = _need(obj, dl.OmqQuery, "an OMQ file")
    want = {"alc-aq": dl.AQ, "alc-baq": dl.BAQ, "alc-conq": dl.ConQ}[src]
    if not isinstance(omq.query, want):
        raise ValidationError(f"--from {src} needs a {want.__name__} query, got: {omq.query}")
    return omq


def compile_(obj, src: str, dst: str, max_rules: int):
    """Returns (result, header)."""
    if src.startswith("alc-"):
        omq = _omq_source(obj, src)
        program = translate.aq_omq_to_mddlog(omq)
        if dst == "mddlog":
            return program, "aq-omq-to-mddlog"
        if dst == "commsnp":
            return translate.mddlog_to_commsnp(program), "aq-omq-to-mddlog, mddlog-to-commsnp"
    elif src == "mddlog":
        program = _need(obj, ddlog.Program, "a program")
        if dst in ("alc-aq", "alc-baq"):
            return translate.mddlog_to_aq_omq(program), "mddlog-to-aq-omq"
        if dst == "alc-ucq":
            return translate.mddlog_to_ucq_omq(program), "mddlog-to-ucq-omq"
        if dst == "commsnp":
            return translate.mddlog_to_commsnp(program), "mddlog-to-commsnp"
        if dst == "gmsnp":
            return translate.program_to_msnp(program, "gmsnp"), "fgddlog-to-gmsnp"
    elif src == "fgddlog":
        program = _need(obj, ddlog.Program, "a program")
        if dst == "gmsnp":
            return translate.gmsnp_fgddlog(program, "to-gmsnp"), "fgddlog-to-gmsnp"
    elif src in ("commsnp", "gmsnp", "mmsnp2"):
        formula = _need(obj, msnp.MsnpFormula, "an MSNP formula")
        want = "mmsnp" if src == "commsnp" else src
        if formula.dialect != want:
            raise ValidationError(f"--from {src} needs dialect {want}, got {formula.dialect}")
        if src == "commsnp" and dst == "mddlog":
            return translate.commsnp_to_mddlog(formula), "commsnp-to-mddlog"
        if src == "gmsnp" and dst in ("fgddlog", "mddlog"):
            return translate.gmsnp_fgddlog(formula, "to-program"), "gmsnp-to-fgddlog"
        if src == "gmsnp" and dst == "mmsnp2":
            return translate.gmsnp_mmsnp2(formula, "to-mmsnp2", max_rules), "gmsnp-to-mmsnp2"
        if src == "mmsnp2" and dst == "gmsnp":
            return translate.gmsnp_mmsnp2(formula, "to-gmsnp"), "mmsnp2-to-gmsnp"
    raise UnsupportedError(f"no translation from {src} to {dst}")


def as_family(obj) -> csp.TemplateFamily:
    if isinstance(obj, csp.TemplateFamily):
        return obj
    if isinstance(obj, dl.OmqQuery):
        return csp.aq_omq_to_templates(obj)
    raise ValidationError("expected an OMQ or a template file")


def evaluate(obj, data: Instance, engine: str | None, args) -> list:
    if engine is None:
        engine = "template" if isinstance(obj, csp.TemplateFamily) else "ddlog"
    if engine == "template":
        return csp.eval_cocsp(as_family(obj), data)
    if isinstance(obj, csp.TemplateFamily):
        obj = csp.templates_to_omq(obj)
    if isinstance(obj, dl.OmqQuery):
        if isinstance(obj.query, dl.UCQQuery):
            if engine != "ddlog":
                raise UnsupportedError("UCQ queries are evaluated with --engine ddlog only")
            return translate.adversarial_complement_eval(obj, data)
        obj = translate.aq_omq_to_mddlog(obj)
    if engine == "ddlog":
        if isinstance(obj, msnp.MsnpFormula):
            obj = translate.msnp_to_program(obj)
        program = _need(obj, ddlog.Program, "a query, program or MSNP formula")
        return ddlog.eval_bruteforce(program, data, max_models=args.max_models)
    if engine == "msnp":
        if isinstance(obj, ddlog.Program):
            flags = ddlog.classify(obj)
            obj = translate.program_to_msnp(obj, "mmsnp" if flags["monadic"] else "gmsnp")
        formula = _need(obj, msnp.MsnpFormula, "a query, program or MSNP formula")
        return msnp.eval_msnp(formula, data, max_models=args.max_models)
    raise ValidationError(f"unknown engine {engine}")


def format_answers(answers: list, arity: int) -> str:
    if arity == 0:
        return "true\n" if answers else "false\n"
    return "".join(",".join(map(str, t)) + "\n" for t in answers)


def _arity(obj) -> int:
    if isinstance(obj, dl.OmqQuery):
        return obj.arity
    if isinstance(obj, ddlog.Program):
        return obj.goal_arity
    if isinstance(obj, msnp.MsnpFormula):
        return len(obj.freevars)
    return len(obj.const_names)


def describe(obj) -> str:
    if isinstance(obj, dl.OmqQuery):
        return f"omq: {obj.ontology.dialect}, {len(obj.ontology.inclusions)} axioms, query {obj.query}\n"
    if isinstance(obj, ddlog.Program):
        flags = ddlog.classify(obj)
        on = " ".join(k for k, v in flags.items() if v) or "-"
        return f"ddlog: {len(obj.rules)} rules, goal/{obj.goal_arity}, {on}\n"
    if isinstance(obj, msnp.MsnpFormula):
        return f"msnp: {obj.dialect}, {len(obj.matrix)} implications\n"
    if isinstance(obj, csp.TemplateFamily):
        return f"template: {len(obj)} templates, constants {list(obj.const_names)}\n"
    return f"facts: {len(obj.facts)} facts over {len(obj.adom)} constants\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="omqkit", description="Ontology-mediated queries, "
                                 "disjunctive datalog, MSNP and CSP templates.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, help="input format (default: auto-detect)")
    common.add_argument("--max-models", type=int, default=ddlog.DEFAULT_MAX_MODELS,
                        help="bound on enumerated models (default: %(default)s)")
    common.add_argument("--max-product", type=int, default=csp.DEFAULT_MAX_PRODUCT,
                        help="bound on the size of structure squares (default: %(default)s)")
    common.add_argument("--max-rules", type=int, default=translate.DEFAULT_MAX_RULES,
                        help="bound on rules produced by identification closure (default: %(default)s)")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("check", parents=[common], help="parse and validate a file")
    p.add_argument("file")
    p = sub.add_parser("compile", parents=[common], help="translate between formalisms")
    p.add_argument("--from", dest="src", required=True, choices=SOURCES)
    p.add_argument("--to", dest="dst", required=True, choices=TARGETS)
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p = sub.add_parser("template", parents=[common], help="OMQ to template family (or back)")
    p.add_argument("--invert", action="store_true")
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p = sub.add_parser("eval", parents=[common], help="certain answers on an instance")
    p.add_argument("--engine", choices=("template", "ddlog", "msnp"),
                   help="default: template for template files, ddlog otherwise")
    p.add_argument("query")
    p.add_argument("data")
    p = sub.add_parser("contain", parents=[common], help="containment of two OMQs or families")
    p.add_argument("q1")
    p.add_argument("q2")
    p = sub.add_parser("fodef", parents=[common], help="FO-rewritability")
    p.add_argument("query")
    p = sub.add_parser("datalogdef", parents=[common], help="datalog-rewritability (unsupported)")
    p.add_argument("query")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UnsupportedError, SizeBoundError) as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except OmqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.cmd
    if cmd == "check":
        write(describe(load(args.file, args.format)), None)
    elif cmd == "compile":
        out, header = compile_(load(args.input, args.format), args.src, args.dst, args.max_rules)
        write(render(out, header), args.output)
    elif cmd == "template":
        obj = load(args.input, args.format)
        if args.invert:
            family = _need(obj, csp.TemplateFamily, "a template file")
            write(render(csp.templates_to_omq(family), "templates-to-omq"), args.output)
        else:
            omq = _need(obj, dl.OmqQuery, "an OMQ file")
            write(render(csp.aq_omq_to_templates(omq), "aq-omq-to-templates"), args.output)
    elif cmd == "eval":
        obj = load(args.query, args.format)
        data = parse_instance(read(args.data))
        write(format_answers(evaluate(obj, data, args.engine, args), _arity(obj)), None)
    elif cmd == "contain":
        left = as_family(load(args.q1, args.format))
        right = as_family(load(args.q2, args.format))
        ok, witness = csp.contains(left, right)
        if ok:
            write("contained\n", None)
        else:
            data, points = witness
            text = "not-contained\n# witness instance"
            text += f", answer {','.join(map(str, points))}\n" if points else "\n"
            write(text + format_instance(data), None)
    elif cmd == "fodef":
        family = as_family(load(args.query, args.format))
        ok = csp.fo_definable(family, args.max_product)
        write("fo-rewritable\n" if ok else "not-fo-rewritable\n", None)
    elif cmd == "datalogdef":
        load(args.query, args.format)
        write("unsupported\n", None)
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
