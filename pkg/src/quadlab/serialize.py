"""Structured-text persistence for return-map towers.

The document is line oriented and self describing: a header with the
parameter, working precision, and budgets, then one block per level
carrying the interval endpoints as full-precision decimal strings, the
return data (v, tau, centrality), the enlargement endpoints, the
boundary certificate, and the critical landing data. Decimal strings
round-trip bit-exactly at the stated precision, so parse(render(nest))
reproduces every stored number to the bit.

Branch discovery tables persist as (index, return time, sign trail)
rows so that addresses recorded in the document stay resolvable and a
loaded tower assigns the same indices the original did. Materialized
branch domains are not stored; queries re-derive them on demand.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

from gmpy2 import mpfr

from .core import decimal_string, family, parse_decimal
from .errors import MalformedDocument
from .nest import (
    NestBudgets,
    NestLevel,
    NiceInterval,
    NicenessCertificate,
    PrincipalNest,
)

DOCUMENT_TAG = "quadlab-nest"
DOCUMENT_VERSION = 1


def _yesno(flag: Optional[bool]) -> str:
    if flag is None:
        return "none"
    return "yes" if flag else "no"


def _opt_int(value: Optional[int]) -> str:
    return "none" if value is None else str(value)


def _opt_dec(value: Optional[mpfr]) -> str:
    return "none" if value is None else decimal_string(value)


def nest_document(nest: PrincipalNest) -> str:
    lines = [f"{DOCUMENT_TAG} {DOCUMENT_VERSION}",
             f"precision {nest.precision}",
             f"parameter {decimal_string(nest.parameter)}"]
    for f in dataclasses.fields(NestBudgets):
        lines.append(f"budget {f.name} {getattr(nest.budgets, f.name)}")
    lines.append(f"levels {len(nest.levels)}")
    for k, lv in enumerate(nest.levels):
        lines.append(f"level {k}")
        lines.append(f"precision {lv.interval.upper.precision}")
        lines.append(f"lower {decimal_string(lv.interval.lower)}")
        lines.append(f"upper {decimal_string(lv.interval.upper)}")
        lines.append(f"v {_opt_int(lv.v)}")
        lines.append(f"tau {_opt_int(lv.tau)}")
        lines.append(f"central {_yesno(lv.central)}")
        if lv.gape is None:
            lines.append("gape none")
        else:
            lines.append(f"gape {decimal_string(lv.gape[0])} "
                         f"{decimal_string(lv.gape[1])}")
        cert = lv.interval.boundary_certificate
        if cert is None:
            lines.append("certificate none")
        else:
            lines.append(f"certificate {cert.checked_steps} "
                         f"{decimal_string(cert.margin)} "
                         f"{_yesno(cert.verified)} {_yesno(cert.inherited)}")
        lines.append(f"critical {_opt_dec(lv.critical_point)}")
        if lv.critical_address is None:
            lines.append("address none")
        elif not lv.critical_address:
            lines.append("address empty")
        else:
            lines.append("address "
                         + ",".join(str(i) for i in lv.critical_address))
        lines.append(f"landing {_opt_int(lv.landing_steps)}")
        lines.append(f"branches {len(lv._registry)}")
        for (r, trail), idx in sorted(lv._registry.items(),
                                      key=lambda kv: kv[1]):
            lines.append(f"branch {idx} {r} {trail.hex()}")
        lines.append("end")
    lines.append("end-nest")
    return "\n".join(lines) + "\n"


class _Reader:
    """Token stream over document lines, tracking position for errors."""

    def __init__(self, text: str):
        self.lines = [ln for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def take(self, key: str) -> list[str]:
        if self.pos >= len(self.lines):
            raise MalformedDocument(f"unexpected end of document, "
                                    f"wanted '{key}'")
        parts = self.lines[self.pos].split()
        if parts[0] != key:
            raise MalformedDocument(
                f"line {self.pos + 1}: expected '{key}', got '{parts[0]}'")
        self.pos += 1
        return parts[1:]

    def fail(self, why: str):
        raise MalformedDocument(f"line {self.pos}: {why}")


def _read_int(reader: _Reader, key: str) -> int:
    parts = reader.take(key)
    try:
        return int(parts[0])
    except (IndexError, ValueError):
        reader.fail(f"'{key}' needs an integer")


def _read_opt_int(reader: _Reader, key: str) -> Optional[int]:
    parts = reader.take(key)
    if not parts:
        reader.fail(f"'{key}' is empty")
    if parts[0] == "none":
        return None
    try:
        return int(parts[0])
    except ValueError:
        reader.fail(f"'{key}' needs an integer or none")


def _read_flag(token: str, reader: _Reader) -> Optional[bool]:
    if token == "none":
        return None
    if token in ("yes", "no"):
        return token == "yes"
    reader.fail(f"flag must be yes/no/none, got '{token}'")


def parse_nest_document(text: str) -> PrincipalNest:
    reader = _Reader(text)
    header = reader.take(DOCUMENT_TAG)
    if header != [str(DOCUMENT_VERSION)]:
        raise MalformedDocument(
            f"unsupported document version {header!r}")
    precision = _read_int(reader, "precision")
    (param_dec,) = reader.take("parameter")
    bvalues = {}
    for f in dataclasses.fields(NestBudgets):
        parts = reader.take("budget")
        if len(parts) != 2 or parts[0] != f.name:
            reader.fail(f"budget '{f.name}' missing or out of order")
        bvalues[f.name] = int(parts[1])
    budgets = NestBudgets(**bvalues)
    count = _read_int(reader, "levels")
    if not 1 <= count <= 10_000:
        reader.fail(f"implausible level count {count}")
    m = family(param_dec, precision)
    levels = []
    for k in range(count):
        if _read_int(reader, "level") != k:
            reader.fail(f"levels out of order at {k}")
        lprec = _read_int(reader, "precision")
        lower = parse_decimal(reader.take("lower")[0], lprec)
        upper = parse_decimal(reader.take("upper")[0], lprec)
        if not lower < upper:
            reader.fail(f"level {k} endpoints out of order")
        v = _read_opt_int(reader, "v")
        tau = _read_opt_int(reader, "tau")
        central = _read_flag(reader.take("central")[0], reader)
        gparts = reader.take("gape")
        if gparts == ["none"]:
            gape = None
        elif len(gparts) == 2:
            gape = (parse_decimal(gparts[0], lprec),
                    parse_decimal(gparts[1], lprec))
        else:
            reader.fail("gape needs two endpoints or none")
        cparts = reader.take("certificate")
        if cparts == ["none"]:
            cert = None
        elif len(cparts) == 4:
            cert = NicenessCertificate(
                checked_steps=int(cparts[0]),
                margin=parse_decimal(cparts[1], lprec),
                verified=_read_flag(cparts[2], reader),
                inherited=_read_flag(cparts[3], reader))
        else:
            reader.fail("certificate needs four fields or none")
        crparts = reader.take("critical")
        critical = (None if crparts[0] == "none"
                    else parse_decimal(crparts[0], lprec))
        aparts = reader.take("address")
        if aparts[0] == "none":
            address = None
        elif aparts[0] == "empty":
            address = ()
        else:
            try:
                address = tuple(int(t) for t in aparts[0].split(","))
            except ValueError:
                reader.fail("address entries must be integers")
        landing = _read_opt_int(reader, "landing")
        nbranches = _read_int(reader, "branches")
        level = NestLevel(
            interval=NiceInterval(level=k, lower=lower, upper=upper,
                                  boundary_certificate=cert),
            v=v, tau=tau, central=central, critical_point=critical,
            critical_address=address, landing_steps=landing, gape=gape)
        for _ in range(nbranches):
            bparts = reader.take("branch")
            if len(bparts) != 3:
                reader.fail("branch rows carry index, time, trail")
            try:
                idx, r = int(bparts[0]), int(bparts[1])
                trail = bytes.fromhex(bparts[2])
            except ValueError:
                reader.fail("unreadable branch row")
            if idx == 0 or len(trail) != r:
                reader.fail(f"inconsistent branch row for index {idx}")
            level._registry[(r, trail)] = idx
            level._branch_times[idx] = r
            side = 1 if idx > 0 else -1
            level._side_counts[side] = max(level._side_counts.get(side, 0),
                                           abs(idx))
        reader.take("end")
        levels.append(level)
    reader.take("end-nest")
    if reader.pos != len(reader.lines):
        reader.fail("trailing content after end-nest")
    return PrincipalNest(map=m, budgets=budgets, levels=levels)


def write_nest(nest: PrincipalNest, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(nest_document(nest))


def read_nest(path) -> PrincipalNest:
    with open(path, encoding="ascii") as fh:
        return parse_nest_document(fh.read())
