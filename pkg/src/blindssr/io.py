"""Data ingestion, configuration files and report rendering."""

import csv
import io
import json
import math

from .errors import ValidationError

# computed variances are printed to 3 significant digits by default; echoed
# inputs such as sigma2 are left exact
VARIANCE_FIELDS = frozenset({"os_variance", "variance"})


def read_outcomes(path):
    """Read blinded outcomes from a one-column CSV.

    The column may carry a ``y`` header. Blank, NaN and non-numeric rows are
    rejected; every bad line is reported, with 1-based line numbers.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError([f"cannot read data file {path!r}: {exc.strerror}"]) from None
    return parse_outcomes(text, source=str(path))


def parse_outcomes(text, source="<data>"):
    problems = []
    values = []
    rows = list(csv.reader(io.StringIO(text)))
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if lineno == 1 and len(cells) == 1 and cells[0].lower() == "y":
            continue
        if lineno == 1 and len(cells) > 1 and "y" in [c.lower() for c in cells]:
            problems.append(f"{source}:{lineno}: expected a single column named 'y', got {row!r}")
            continue
        if not cells or all(c == "" for c in cells):
            problems.append(f"{source}:{lineno}: blank row")
            continue
        if len(cells) != 1:
            problems.append(f"{source}:{lineno}: expected one value, got {len(cells)}")
            continue
        try:
            value = float(cells[0])
        except ValueError:
            problems.append(f"{source}:{lineno}: not a number: {cells[0]!r}")
            continue
        if not math.isfinite(value):
            problems.append(f"{source}:{lineno}: non-finite value {cells[0]!r}")
            continue
        values.append(value)
    if problems:
        raise ValidationError(problems)
    if len(values) < 2:
        raise ValidationError([f"{source}: need at least 2 outcomes, found {len(values)}"])
    return values


def load_json(path, what="config"):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError([f"cannot read {what} file {path!r}: {exc.strerror}"]) from None
    except json.JSONDecodeError as exc:
        raise ValidationError([f"{what} file {path!r} is not valid JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise ValidationError([f"{what} file {path!r} must hold a JSON object"])
    return data


def sig_figs(value, digits=3):
    if value is None or not isinstance(value, float) or not math.isfinite(value) or value == 0:
        return value
    return float(f"{value:.{digits - 1}e}")


def _render_value(key, value, full_precision):
    if isinstance(value, float):
        if key in VARIANCE_FIELDS and not full_precision:
            return f"{value:.3g}"
        return repr(value) if full_precision else f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ";".join(_render_value(key, v, full_precision) for v in value)
    if value is None:
        return ""
    return str(value)


def _columns(rows):
    cols = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def render_table(rows, full_precision=False):
    if not rows:
        return "(no rows)\n"
    cols = _columns(rows)
    cells = [[_render_value(c, row.get(c), full_precision) for c in cols] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(line.rstrip() for line in lines) + "\n"


def render_csv(rows, full_precision=False):
    buf = io.StringIO()
    cols = _columns(rows)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_render_value(c, row.get(c), full_precision) for c in cols])
    return buf.getvalue()


def _round_variances(obj, full_precision):
    if full_precision:
        return obj
    if isinstance(obj, dict):
        return {k: (sig_figs(v) if k in VARIANCE_FIELDS and isinstance(v, float)
                    else _round_variances(v, full_precision)) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_variances(v, full_precision) for v in obj]
    return obj


def render_json(report, full_precision=False):
    payload = dict(report)
    payload["rows"] = _round_variances(payload.get("rows", []), full_precision)
    return json.dumps(payload, indent=2, sort_keys=False, default=str) + "\n"


def provenance_line(report):
    """``# tool version`` plus the echoed configuration as compact JSON.

    Leads table and CSV output; CSV readers skip it as a comment line.
    """
    config = json.dumps(report.get("config", {}), sort_keys=True, separators=(",", ":"))
    return f"# {report.get('tool', '')} {report.get('version', '')} {report.get('command', '')} {config}\n"


def render(report, fmt, full_precision=False):
    """Serialize a report dict (``rows`` plus metadata) in the chosen format.

    JSON carries the whole report, including warnings; table and CSV carry
    the rows under a one-line provenance header.
    """
    if fmt == "json":
        return render_json(report, full_precision)
    if fmt == "csv":
        return provenance_line(report) + render_csv(report["rows"], full_precision)
    text = provenance_line(report) + render_table(report["rows"], full_precision)
    if report.get("audit"):
        text += "\n" + "\n".join(f"{k}: {_render_value(k, v, full_precision)}"
                                 for k, v in report["audit"].items()) + "\n"
    return text
