"""Command-line front end: ``ltverify verify {appendix,example25,formal-group,all}``."""

import argparse
import sys
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidConfig, InvalidParams, LTError
from .report import ERROR, PASS, VerificationReport, merge_reports

EXIT_USAGE = 64
COMMANDS = ("appendix", "example25", "formal-group", "all")


@dataclass(frozen=True)
class RunConfig:
    command: str
    p: int = 2
    precision: int = 24
    degree: Optional[int] = None
    report_format: str = "text"
    output_path: Optional[str] = None

    @property
    def D(self):
        if self.degree is not None:
            return self.degree
        return max(12, self.p * self.p + self.p)

    def params(self, p=None):
        from .ring import PrecisionParams

        return PrecisionParams(self.p if p is None else p, self.precision, self.D)

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if self.report_format not in ("text", "json"):
            raise InvalidConfig(f"unknown format {self.report_format!r}")
        try:
            params = self.params()
            params.check_budget()
            if self.command == "example25" and self.p != 2:
                raise InvalidConfig("example25 is defined over Z_2[sqrt2]; use --p 2")
            if self.command in ("example25", "all") and self.D < 4:
                raise InvalidConfig("example25 needs --degree of at least 4")
        except InvalidParams as err:
            raise InvalidConfig(str(err)) from err
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="ltverify", description="Finite-precision verification of formal-group identities.")
    sub = parser.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("target", choices=COMMANDS)
    v.add_argument("--p", type=int, default=2, help="residue characteristic (default 2)")
    v.add_argument("--precision", type=int, default=24, help="p-adic working precision N (default 24)")
    v.add_argument("--degree", type=int, default=None,
                   help="degree bound D (default max(12, p^2 + p))")
    v.add_argument("--format", choices=("text", "json"), default="text", dest="report_format")
    v.add_argument("--out", default=None, dest="output_path", help="write the report here instead of stdout")
    return parser


def parse_config(argv):
    ns = build_parser().parse_args(argv)
    return RunConfig(ns.target, ns.p, ns.precision, ns.degree, ns.report_format, ns.output_path)


def dump_formal_group(config):
    """Report holding F, [1], [pi], [Delta], [Gamma] and their blowups as text."""
    from .lubin_tate import (
        AppendixContext,
        blow_endomorphism,
        blowup_formal_group,
        build_endomorphism,
        build_formal_group,
    )

    params = config.params()
    rep = VerificationReport("formal-group", params.p, params.N, params.D)
    ctx = AppendixContext(params)
    fg = build_formal_group(ctx.o, params)
    thetas = ctx.thetas()
    labels = {"1": "[1]", "pi": "[pi]", "D": "[Delta]", "G": "[Gamma]"}
    series = [("F(x, y)", fg.F)]
    endos = {}
    for key, label in labels.items():
        endos[key] = build_endomorphism(fg, thetas[key])
        series.append((f"{label}(t)", endos[key]))
    fgb = blowup_formal_group(fg, ctx.lam)
    series.append(("F^(lam)(x, y)", fgb.F))
    for key, label in labels.items():
        series.append((f"{label}^(lam)(t)", blow_endomorphism(fgb, thetas[key])))
    rep.series = [(name, s.text()) for name, s in series]
    rep.add("formal_group.construction", PASS, fg.F.min_prec())
    return rep.finish()


def run(config):
    """Dispatch a validated config; returns ``(exit_code, report)``."""
    from .example25 import verify_example
    from .lubin_tate import verify_appendix

    config.validate()
    if config.command == "appendix":
        rep = verify_appendix(config.p, config.params())
    elif config.command == "example25":
        rep = verify_example(config.params())
    elif config.command == "formal-group":
        rep = dump_formal_group(config)
    else:
        parts = [verify_appendix(config.p, config.params()), verify_example(config.params(p=2))]
        rep = merge_reports("all", parts, config.p, config.precision, config.D)
    return rep.exit_code, rep


def render(report, fmt):
    return report.to_json() if fmt == "json" else report.to_text()


def _error_report(config, err):
    rep = VerificationReport(config.command, config.p, config.precision, config.D)
    rep.add("infrastructure", ERROR, None, f"{type(err).__name__}: {err}")
    return rep.finish()


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        config.validate()
    except InvalidConfig as err:
        sys.stderr.write(f"ltverify: invalid configuration: {err}\n")
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        code, rep = run(config)
    except (LTError, ArithmeticError, ValueError, TypeError) as err:
        rep = _error_report(config, err)
        code = rep.exit_code
    out = render(rep, config.report_format)
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
