"""Tab-separated file formats for batteries, weights, means and mixtures.

All files are UTF-8 with a header row. Numbers are written with 17
significant digits so that a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import distfn
from .errors import BatteryFormatError
from .hypotheses import EffectConfiguration, MixtureSpec, TestBattery

# absolute slack added on top of the printed-precision allowance
CONSISTENCY_TOL = 1e-9


def fmt(value) -> str:
    """Format one cell: floats to 17 significant digits, bools as 0/1."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def write_table(columns, rows, out=None):
    """Write `rows` under a header of `columns`.

    `out` may be a path, an open text stream, or None for stdout.
    """
    if out is None:
        _write(sys.stdout, columns, rows)
    elif isinstance(out, (str, Path)):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            _write(fh, columns, rows)
    else:
        _write(out, columns, rows)


def _write(fh, columns, rows):
    fh.write("\t".join(columns) + "\n")
    for row in rows:
        fh.write("\t".join(fmt(v) for v in row) + "\n")


def table_to_string(columns, rows) -> str:
    buf = io.StringIO()
    _write(buf, columns, rows)
    return buf.getvalue()


def _rows(path):
    """Yield (line_number, fields) for the header and each nonblank line."""
    path = Path(path)
    if not path.exists():
        raise BatteryFormatError("file not found", path=path)
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            yield lineno, [f.strip() for f in fields]


def _header(path, rows, required, optional=()):
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise BatteryFormatError("empty file", path=path) from None
    unknown = [h for h in header if h not in required and h not in optional]
    missing = [h for h in required if h not in header]
    if missing or unknown or len(set(header)) != len(header):
        raise BatteryFormatError(
            f"bad header {header!r}; expected columns {list(required)} plus optional {list(optional)}",
            path=path,
            line=lineno,
        )
    return {name: header.index(name) for name in header}


def _number(text, path, lineno, column):
    try:
        value = float(text)
    except ValueError:
        raise BatteryFormatError(f"column {column!r}: not a number: {text!r}", path=path, line=lineno) from None
    return value


def _half_unit(text) -> float:
    """Half a unit in the last printed digit of a decimal string."""
    try:
        exponent = Decimal(text).as_tuple().exponent
    except InvalidOperation:
        return 0.0
    if not isinstance(exponent, int):
        return 0.0
    return 0.5 * 10.0 ** exponent


def load_battery(path, two_sided: bool = False) -> TestBattery:
    """Read a battery file with header ``id p [stat] [group]``.

    When a ``stat`` column is present each p-value must match the tail
    probability of its statistic. The allowance is 1e-9 plus whatever the
    printed precision of the two numbers can account for, so a file that
    rounds statistics to four decimals is still accepted.

    Raises:
        BatteryFormatError: naming the line of the first malformed row,
            out-of-range p-value, duplicate id or inconsistent statistic.
    """
    rows = _rows(path)
    cols = _header(path, rows, ("id", "p"), ("stat", "group"))
    ids, ps, stats, groups = [], [], [], []
    seen = {}
    for lineno, fields in rows:
        if len(fields) != len(cols):
            raise BatteryFormatError(f"expected {len(cols)} fields, got {len(fields)}", path=path, line=lineno)
        ident = fields[cols["id"]]
        if not ident:
            raise BatteryFormatError("empty id", path=path, line=lineno)
        if ident in seen:
            raise BatteryFormatError(f"duplicate id {ident!r} (first on line {seen[ident]})", path=path, line=lineno)
        seen[ident] = lineno
        p_text = fields[cols["p"]]
        p = _number(p_text, path, lineno, "p")
        if not 0.0 <= p <= 1.0:
            raise BatteryFormatError(f"p-value {p_text} outside [0, 1]", path=path, line=lineno)
        if "stat" in cols:
            t_text = fields[cols["stat"]]
            t = _number(t_text, path, lineno, "stat")
            if not math.isfinite(t):
                raise BatteryFormatError(f"statistic {t_text} is not finite", path=path, line=lineno)
            if two_sided:
                expected = distfn.noncentral_chisq1_upper_tail(t * t, 0.0)
                slope = 2.0 * distfn.density(t)
            else:
                expected = distfn.upper_tail(t)
                slope = distfn.density(t)
            allowance = CONSISTENCY_TOL + _half_unit(p_text) + slope * _half_unit(t_text)
            if abs(p - expected) > allowance:
                raise BatteryFormatError(
                    f"p-value {p_text} inconsistent with statistic {t_text} (expected {expected:.6g})",
                    path=path,
                    line=lineno,
                )
            stats.append(t)
        if "group" in cols:
            groups.append(fields[cols["group"]])
        ids.append(ident)
        ps.append(p)
    if not ids:
        raise BatteryFormatError("no hypotheses in file", path=path)
    return TestBattery(
        ids=tuple(ids),
        p_values=np.array(ps),
        statistics=np.array(stats) if "stat" in cols else None,
        groups=np.array(groups, dtype=object) if "group" in cols else None,
        two_sided=two_sided,
    )


def save_battery(battery: TestBattery, path) -> None:
    columns = ["id", "p"]
    if battery.statistics is not None:
        columns.append("stat")
    if battery.groups is not None:
        columns.append("group")
    rows = []
    for j, ident in enumerate(battery.ids):
        row = [ident, battery.p_values[j]]
        if battery.statistics is not None:
            row.append(battery.statistics[j])
        if battery.groups is not None:
            row.append(battery.groups[j])
        rows.append(row)
    write_table(columns, rows, path)


def _load_keyed_column(path, value_name):
    rows = _rows(path)
    cols = _header(path, rows, ("id", value_name))
    ids, values, seen = [], [], set()
    for lineno, fields in rows:
        if len(fields) != len(cols):
            raise BatteryFormatError(f"expected {len(cols)} fields, got {len(fields)}", path=path, line=lineno)
        ident = fields[cols["id"]]
        if ident in seen:
            raise BatteryFormatError(f"duplicate id {ident!r}", path=path, line=lineno)
        seen.add(ident)
        ids.append(ident)
        values.append(_number(fields[cols[value_name]], path, lineno, value_name))
    if not ids:
        raise BatteryFormatError(f"no rows in {value_name} file", path=path)
    return ids, np.array(values)


def load_weights(path):
    """Read an ``id weight`` file; returns (ids, raw weight array).

    Weights are returned unnormalized so the caller decides whether an
    off-budget file is an error or should be rescaled.
    """
    ids, w = _load_keyed_column(path, "weight")
    bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
    if bad.size:
        raise BatteryFormatError(f"negative or non-finite weight for id {ids[bad[0]]!r}", path=path)
    return ids, w


def align(ids, values, battery_ids, path=None):
    """Reorder `values` keyed by `ids` to follow `battery_ids`."""
    lookup = dict(zip(ids, values))
    missing = [i for i in battery_ids if i not in lookup]
    if missing or len(lookup) != len(battery_ids):
        extra = [i for i in ids if i not in set(battery_ids)]
        raise BatteryFormatError(
            f"ids do not match the battery (missing {missing[:3]}, extra {extra[:3]})", path=path
        )
    return np.array([lookup[i] for i in battery_ids])


def save_weights(ids, weights, path=None) -> None:
    write_table(["id", "weight"], zip(ids, np.asarray(weights)), path)


def load_means(path, two_sided: bool = False):
    """Read an ``id mean`` file into (ids, EffectConfiguration)."""
    ids, means = _load_keyed_column(path, "mean")
    if not np.all(np.isfinite(means)):
        raise BatteryFormatError("means must be finite", path=path)
    return ids, EffectConfiguration(means, two_sided=two_sided)


def load_mixture(path) -> MixtureSpec:
    """Read a ``mass location`` file."""
    rows = _rows(path)
    cols = _header(path, rows, ("mass", "location"))
    atoms = []
    for lineno, fields in rows:
        if len(fields) != len(cols):
            raise BatteryFormatError(f"expected {len(cols)} fields, got {len(fields)}", path=path, line=lineno)
        mass = _number(fields[cols["mass"]], path, lineno, "mass")
        loc = _number(fields[cols["location"]], path, lineno, "location")
        if not 0.0 <= mass <= 1.0:
            raise BatteryFormatError(f"mass {mass} outside [0, 1]", path=path, line=lineno)
        atoms.append((mass, loc))
    if not atoms:
        raise BatteryFormatError("no atoms in mixture file", path=path)
    try:
        return MixtureSpec.from_atoms(atoms)
    except ValueError as exc:
        raise BatteryFormatError(str(exc), path=path) from None


def save_mixture(mixture: MixtureSpec, path=None) -> None:
    write_table(["mass", "location"], zip(mixture.masses, mixture.locations), path)
