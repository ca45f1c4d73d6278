"""Verification reports: sub-check records, status roll-up, text and JSON rendering."""

import json
import math
import time

from .errors import (
    FrobeniusConditionUnverified,
    LTError,
    MembershipUncertifiable,
    NotDivisible,
    NotIdempotent,
    NotLacunary,
    PrecisionExhausted,
    PrecisionHorizon,
)

PASS = "PASS"
FAIL = "FAIL"
PRECISION_EXHAUSTED = "PRECISION_EXHAUSTED"
ERROR = "ERROR"

EXIT_CODES = {PASS: 0, FAIL: 1, PRECISION_EXHAUSTED: 2, ERROR: 3}
_SEVERITY = {PASS: 0, PRECISION_EXHAUSTED: 1, FAIL: 2, ERROR: 3}

# errors that mean "the claimed identity is false at this precision"
FALSIFYING = (NotDivisible, NotIdempotent, NotLacunary, MembershipUncertifiable, FrobeniusConditionUnverified)
EXHAUSTING = (PrecisionExhausted, PrecisionHorizon)


def combine_status(statuses):
    worst = PASS
    for s in statuses:
        if _SEVERITY[s] > _SEVERITY[worst]:
            worst = s
    return worst


class SubCheck:
    __slots__ = ("name", "status", "certified_precision", "counterexample")

    def __init__(self, name, status, certified_precision=None, counterexample=None):
        self.name = name
        self.status = status
        if certified_precision is not None and certified_precision != math.inf:
            certified_precision = int(certified_precision)
        elif certified_precision == math.inf:
            certified_precision = None
        self.certified_precision = certified_precision
        self.counterexample = counterexample

    def to_dict(self):
        d = {"name": self.name, "status": self.status, "certified_precision": self.certified_precision}
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample
        return d


class VerificationReport:
    def __init__(self, check_id, p, precision, degree):
        self.check_id = check_id
        self.params = {"p": p, "precision": precision, "degree": degree}
        self.details = []
        self.notes = []
        self.series = []
        self.elapsed_ms = 0
        self._t0 = time.perf_counter()

    @property
    def status(self):
        return combine_status(d.status for d in self.details)

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]

    def add(self, name, status, certified_precision=None, counterexample=None):
        self.details.append(SubCheck(name, status, certified_precision, counterexample))

    def finish(self):
        self.elapsed_ms = int((time.perf_counter() - self._t0) * 1000)
        self.details.sort(key=lambda d: d.name)
        return self

    def by_name(self, name):
        for d in self.details:
            if d.name == name:
                return d
        raise KeyError(name)

    def to_dict(self, include_elapsed=True):
        d = {
            "check_id": self.check_id,
            "params": dict(self.params),
            "status": self.status,
            "details": [x.to_dict() for x in self.details],
        }
        if include_elapsed:
            d["elapsed_ms"] = self.elapsed_ms
        if self.notes:
            d["notes"] = list(self.notes)
        if self.series:
            d["series"] = {name: text for name, text in self.series}
        return d

    def to_json(self, include_elapsed=True):
        return json.dumps(self.to_dict(include_elapsed), indent=2, sort_keys=False) + "\n"

    def to_text(self, include_elapsed=True):
        pr = self.params
        lines = [f"{self.check_id}: {self.status}  (p={pr['p']}, N={pr['precision']}, D={pr['degree']})"]
        for d in self.details:
            prec = "-" if d.certified_precision is None else str(d.certified_precision)
            line = f"  [{d.status}] {d.name}  prec={prec}"
            if d.counterexample:
                line += f"\n      counterexample: {d.counterexample}"
            lines.append(line)
        for name, text in self.series:
            lines.append(f"{name} = {text}")
        for n in self.notes:
            lines.append(f"  note: {n}")
        if include_elapsed:
            lines.append(f"  elapsed_ms: {self.elapsed_ms}")
        return "\n".join(lines) + "\n"


def merge_reports(check_id, reports, p, precision, degree):
    out = VerificationReport(check_id, p, precision, degree)
    for r in reports:
        for d in r.details:
            out.details.append(SubCheck(f"{r.check_id}/{d.name}", d.status, d.certified_precision, d.counterexample))
        out.notes.extend(r.notes)
    out.finish()
    out.elapsed_ms = sum(r.elapsed_ms for r in reports)
    return out


class Battery:
    """Runs named checks into a report, translating exceptions into statuses.

    A check callable returns ``(ok, certified_precision, counterexample)``.
    A certified precision below one digit downgrades the result to
    PRECISION_EXHAUSTED.
    """

    def __init__(self, report):
        self.report = report

    def run(self, name, fn):
        try:
            ok, prec, cex = fn()
        except FALSIFYING as err:
            self.report.add(name, FAIL, None, f"{type(err).__name__}: {err}")
            return False
        except EXHAUSTING as err:
            self.report.add(name, PRECISION_EXHAUSTED, None, f"{type(err).__name__}: {err}")
            return False
        except LTError as err:
            self.report.add(name, ERROR, None, f"{type(err).__name__}: {err}")
            return False
        if prec is not None and prec != math.inf and prec < 1:
            self.report.add(name, PRECISION_EXHAUSTED, prec, cex)
            return False
        self.report.add(name, PASS if ok else FAIL, prec, None if ok else cex)
        return ok

    def build(self, name, fn):
        """Run a construction step; returns its value or ``None`` after recording failure."""
        box = {}

        def wrapped():
            box["value"] = fn()
            return True, None, None

        self.run(name, wrapped)
        return box.get("value")


def series_check(lhs, rhs, label=None):
    """Compare two series; returns a Battery-style triple with a readable counterexample."""
    ok, e, prec = lhs.compare(rhs)
    if ok:
        return True, prec, None
    dom = lhs.domain
    n = sum(e)
    pr = min(lhs.precs[n], rhs.precs[n])
    from .series import VARS

    names = VARS.get(len(e), tuple(f"x{i}" for i in range(len(e))))
    mono = "·".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k) or "1"
    a = dom.text(lhs.coeffs.get(e, dom.zero), pr)
    b = dom.text(rhs.coeffs.get(e, dom.zero), pr)
    head = f"{label}: " if label else ""
    return False, prec, f"{head}coefficient of {mono}: {a} != {b} (mod {dom.p}^{pr})"


def element_check(dom, x, y, prec):
    if dom.equal(x, y, prec):
        return True, prec, None
    return False, prec, f"{dom.text(x, prec)} != {dom.text(y, prec)} (mod {dom.p}^{prec})"
