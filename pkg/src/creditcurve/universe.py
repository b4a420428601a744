"""File ingestion: quote files, curve files, run configuration.

All inputs are delimiter-separated text with a header line, diff-able
and desk-friendly:

- riskfree curve:  ``tenor_years,zero_rate``
- bonds:           ``id,coupon,price`` plus ``maturity`` (ISO date) or
                   ``tenor_years``; optional ``issue_size``, ``rating``,
                   ``internal_rating``, ``recovery``, ``sector``, ``country``
- cds:             ``id,coupon,quote_type,quote`` plus maturity/tenor;
                   optional ``quoting_recovery``, ``issue_size``,
                   ``rating``, ``internal_rating``, ``country``
- sovereign:       ``country,tenor_years,par_spread``
- run config:      flat ``key = value`` lines, '#' comments

Maturity dates become year-fraction tenors via actual/365.25 from the
snapshot date.  Rating symbols use the 18-point scale AAA=1 ... CCC=18;
internal rating overrides, when present, take precedence in fitting.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

from .ratecurve import RiskfreeCurve
from .survival import RATING_SYMBOLS, RecoverySchedule
from .valuation import BondSpec, CdsSpec

__all__ = [
    "UniverseError",
    "UniverseSnapshot",
    "parse_rating",
    "load_riskfree_curve",
    "load_universe",
    "load_config",
    "interp_sovereign",
]

DAYS_PER_YEAR = 365.25


class UniverseError(ValueError):
    """Malformed or inconsistent input data."""


def parse_rating(symbol: str) -> int:
    sym = symbol.strip().upper().replace("−", "-")
    if sym in RATING_SYMBOLS:
        return RATING_SYMBOLS.index(sym) + 1
    if sym.isdigit() and 1 <= int(sym) <= 18:
        return int(sym)
    raise UniverseError(
        f"unknown rating symbol {symbol!r}; use one of "
        f"{', '.join(RATING_SYMBOLS)} (AAA=1 ... CCC=18)")


@dataclass(frozen=True)
class UniverseSnapshot:
    as_of: dt.date
    bonds: tuple[BondSpec, ...]
    cds: tuple[CdsSpec, ...]
    riskfree: RiskfreeCurve
    sovereign_curves: dict[str, tuple[tuple[float, float], ...]] = field(default_factory=dict)

    @property
    def instruments(self) -> tuple[BondSpec | CdsSpec, ...]:
        return self.bonds + self.cds


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, dict[str, str]]]]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise UniverseError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None:
        raise UniverseError(f"{path}: empty file, header line required")
    fields = [f.strip() for f in reader.fieldnames]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        clean = {(k or "").strip(): (v or "").strip() for k, v in row.items()}
        if any(clean.values()):
            rows.append((lineno, clean))
    return fields, rows


def _need(row: dict[str, str], col: str, path: Path, lineno: int) -> str:
    val = row.get(col, "")
    if not val:
        raise UniverseError(f"{path}:{lineno}: missing required column {col!r}")
    return val


def _float(val: str, col: str, path: Path, lineno: int) -> float:
    try:
        return float(val)
    except ValueError as exc:
        raise UniverseError(f"{path}:{lineno}: column {col!r} is not a number: {val!r}") from exc


def load_riskfree_curve(path: str | Path, compounding: int = 0) -> RiskfreeCurve:
    path = Path(path)
    fields, rows = _read_rows(path)
    for col in ("tenor_years", "zero_rate"):
        if col not in fields:
            raise UniverseError(f"{path}: header must contain 'tenor_years,zero_rate'")
    pillars = []
    for lineno, row in rows:
        t = _float(_need(row, "tenor_years", path, lineno), "tenor_years", path, lineno)
        z = _float(_need(row, "zero_rate", path, lineno), "zero_rate", path, lineno)
        pillars.append((t, z))
    if not pillars:
        raise UniverseError(f"{path}: no curve pillars")
    try:
        return RiskfreeCurve(pillars=tuple(pillars), compounding=compounding)
    except ValueError as exc:
        raise UniverseError(f"{path}: {exc}") from exc


def _tenor_from_row(row: dict[str, str], as_of: dt.date, path: Path, lineno: int) -> float:
    if row.get("tenor_years"):
        tenor = _float(row["tenor_years"], "tenor_years", path, lineno)
    elif row.get("maturity"):
        try:
            maturity = dt.date.fromisoformat(row["maturity"])
        except ValueError as exc:
            raise UniverseError(
                f"{path}:{lineno}: maturity {row['maturity']!r} is not an ISO date") from exc
        tenor = (maturity - as_of).days / DAYS_PER_YEAR
    else:
        raise UniverseError(f"{path}:{lineno}: need a 'maturity' date or 'tenor_years'")
    if tenor <= 0.0:
        raise UniverseError(f"{path}:{lineno}: instrument has matured (tenor {tenor:.4f} <= 0)")
    return tenor


def _rating_from(row: dict[str, str], col: str, path: Path, lineno: int) -> int | None:
    val = row.get(col, "")
    if not val:
        return None
    try:
        return parse_rating(val)
    except UniverseError as exc:
        raise UniverseError(f"{path}:{lineno}: {exc}") from exc


def interp_sovereign(pillars: tuple[tuple[float, float], ...], tenor: float) -> float:
    """Linear-in-tenor interpolation of sovereign par-spread pillars,
    flat beyond the ends."""
    if not pillars:
        raise UniverseError("empty sovereign curve")
    ts = [p[0] for p in pillars]
    ss = [p[1] for p in pillars]
    if tenor <= ts[0]:
        return ss[0]
    if tenor >= ts[-1]:
        return ss[-1]
    for (t0, s0), (t1, s1) in zip(pillars, pillars[1:]):
        if t0 <= tenor <= t1:
            w = (tenor - t0) / (t1 - t0)
            return s0 + w * (s1 - s0)
    return ss[-1]


def _resolve_recovery(row: dict[str, str], rating: int | None,
                      mode: str, fixed: float, schedule: RecoverySchedule,
                      path: Path, lineno: int) -> float:
    if row.get("recovery"):
        return _float(row["recovery"], "recovery", path, lineno)
    if mode == "schedule":
        if rating is None:
            raise UniverseError(
                f"{path}:{lineno}: recovery schedule requested but the row has no rating")
        return schedule.recovery_for_rating(rating)
    return fixed


def load_sovereign_curves(path: str | Path) -> dict[str, tuple[tuple[float, float], ...]]:
    path = Path(path)
    fields, rows = _read_rows(path)
    for col in ("country", "tenor_years", "par_spread"):
        if col not in fields:
            raise UniverseError(f"{path}: header must contain 'country,tenor_years,par_spread'")
    curves: dict[str, list[tuple[float, float]]] = {}
    for lineno, row in rows:
        country = _need(row, "country", path, lineno).upper()
        t = _float(_need(row, "tenor_years", path, lineno), "tenor_years", path, lineno)
        s = _float(_need(row, "par_spread", path, lineno), "par_spread", path, lineno)
        curves.setdefault(country, []).append((t, s))
    return {k: tuple(sorted(v)) for k, v in curves.items()}


def load_universe(riskfree_path: str | Path,
                  bonds_path: str | Path | None = None,
                  cds_path: str | Path | None = None,
                  sovereign_path: str | Path | None = None,
                  as_of: dt.date | None = None,
                  compounding: int = 0,
                  recovery_mode: str = "fixed",
                  recovery_fixed: float = 0.4,
                  recovery_schedule: RecoverySchedule = RecoverySchedule()) -> UniverseSnapshot:
    """Load and validate a dated snapshot of quotes plus the curve.

    ``recovery_mode`` is 'fixed' or 'schedule'; an explicit per-row
    recovery column always wins (per-issuer override, rarely used).
    """
    as_of = as_of or dt.date.today()
    riskfree = load_riskfree_curve(riskfree_path, compounding)
    sovereign = load_sovereign_curves(sovereign_path) if sovereign_path else {}

    bonds: list[BondSpec] = []
    seen: dict[str, str] = {}
    if bonds_path is not None:
        path = Path(bonds_path)
        _, rows = _read_rows(path)
        for lineno, row in rows:
            ident = _need(row, "id", path, lineno)
            if ident in seen:
                raise UniverseError(f"{path}:{lineno}: duplicate identifier {ident!r}")
            seen[ident] = "bond"
            tenor = _tenor_from_row(row, as_of, path, lineno)
            rating = _rating_from(row, "rating", path, lineno)
            internal = _rating_from(row, "internal_rating", path, lineno)
            effective = internal if internal is not None else rating
            recovery = _resolve_recovery(row, effective, recovery_mode,
                                         recovery_fixed, recovery_schedule, path, lineno)
            country = row.get("country", "").upper()
            sov = interp_sovereign(sovereign[country], tenor) if country in sovereign else None
            try:
                bonds.append(BondSpec(
                    coupon=_float(_need(row, "coupon", path, lineno), "coupon", path, lineno),
                    tenor=tenor,
                    price=_float(_need(row, "price", path, lineno), "price", path, lineno),
                    recovery=recovery,
                    issue_size=_float(row.get("issue_size") or "1000", "issue_size", path, lineno),
                    rating=rating,
                    internal_rating=internal,
                    sovereign_spread=sov,
                    identifier=ident,
                ))
            except ValueError as exc:
                raise UniverseError(f"{path}:{lineno}: {exc}") from exc

    cds: list[CdsSpec] = []
    if cds_path is not None:
        path = Path(cds_path)
        _, rows = _read_rows(path)
        for lineno, row in rows:
            ident = _need(row, "id", path, lineno)
            if ident in seen:
                raise UniverseError(f"{path}:{lineno}: duplicate identifier {ident!r}")
            seen[ident] = "cds"
            tenor = _tenor_from_row(row, as_of, path, lineno)
            rating = _rating_from(row, "rating", path, lineno)
            internal = _rating_from(row, "internal_rating", path, lineno)
            effective = internal if internal is not None else rating
            recovery = _resolve_recovery(row, effective, recovery_mode,
                                         recovery_fixed, recovery_schedule, path, lineno)
            country = row.get("country", "").upper()
            sov = interp_sovereign(sovereign[country], tenor) if country in sovereign else None
            try:
                cds.append(CdsSpec(
                    coupon=_float(_need(row, "coupon", path, lineno), "coupon", path, lineno),
                    tenor=tenor,
                    quote_type=_need(row, "quote_type", path, lineno),
                    quote=_float(_need(row, "quote", path, lineno), "quote", path, lineno),
                    quoting_recovery=_float(row.get("quoting_recovery") or "0.4",
                                            "quoting_recovery", path, lineno),
                    issue_size=_float(row.get("issue_size") or "1000", "issue_size", path, lineno),
                    rating=rating,
                    internal_rating=internal,
                    sovereign_spread=sov,
                    model_recovery=recovery,
                    identifier=ident,
                ))
            except ValueError as exc:
                raise UniverseError(f"{path}:{lineno}: {exc}") from exc

    if not bonds and not cds:
        raise UniverseError("no instruments")
    return UniverseSnapshot(as_of=as_of, bonds=tuple(bonds), cds=tuple(cds),
                            riskfree=riskfree, sovereign_curves=sovereign)


def load_config(path: str | Path) -> dict[str, str]:
    """Flat key=value run configuration; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UniverseError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out
