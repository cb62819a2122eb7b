"""Serialize a MetricReport as CSV, JSON and a benchmark-style Markdown table."""
import csv
import io
import json
import math

from .metrics import CATEGORY_COLUMNS, TYPE_COLUMNS

RECORD_FIELDS = ("image_id", "type", "category", "height", "width",
                 "sad", "mse", "mad", "conn", "grad", "sad_transition")

WHOLE_COLUMNS = ("SAD", "MSE", "MAD", "Conn.", "Grad.")
GROUPS = (
    ("Whole Image", WHOLE_COLUMNS),
    ("Tran.", ("SAD",)),
    ("SAD-Type", tuple(t.value for t in TYPE_COLUMNS) + ("Avg.",)),
    ("SAD-Category", tuple(col for _, col in CATEGORY_COLUMNS) + ("Avg.",)),
)


def _fmt(v, digits=4):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.{digits}f}"


def table_values(report):
    """Values of the benchmark row, in column order."""
    vals = [report.whole[c] for c in WHOLE_COLUMNS]
    vals.append(report.transition_sad)
    vals += [report.type_sad[c] for c in GROUPS[2][1]]
    vals += [report.category_sad[c] for c in GROUPS[3][1]]
    return vals


def to_markdown(report, label="Ours", digits=4):
    group_row = [""]
    name_row = [""]
    for group, cols in GROUPS:
        group_row += [group] + [""] * (len(cols) - 1)
        name_row += list(cols)
    data_row = [label] + [_fmt(v, digits) for v in table_values(report)]
    lines = [
        "| " + " | ".join(group_row) + " |",
        "|" + "|".join(["---"] + [":---:"] * (len(group_row) - 1)) + "|",
        "| " + " | ".join(name_row) + " |",
        "| " + " | ".join(data_row) + " |",
    ]
    return "\n".join(lines) + "\n"


def to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in report.records:
        row = []
        for f in RECORD_FIELDS:
            v = getattr(r, f)
            row.append(repr(v) if isinstance(v, float) else v)
        writer.writerow(row)
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def to_json(report):
    return json.dumps(_clean(report.to_dict()), indent=2, sort_keys=False) + "\n"


WRITERS = {"csv": ("report.csv", to_csv), "json": ("report.json", to_json), "md": ("report.md", to_markdown)}


def write_report(report, out_dir, formats=("csv", "json", "md"), label="Ours"):
    paths = []
    for fmt in formats:
        if fmt not in WRITERS:
            raise ValueError(f"unknown report format {fmt!r}")
        fname, fn = WRITERS[fmt]
        text = fn(report, label=label) if fmt == "md" else fn(report)
        path = out_dir / fname
        path.write_text(text)
        paths.append(path)
    return paths
