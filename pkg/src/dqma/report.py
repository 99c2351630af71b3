"""CSV and figure output for experiment runs."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SUMMARY_FIELDS = [
    "protocol", "mode", "seed", "trials", "accept_probability", "ci_low", "ci_high",
    "output_fidelity", "s_c", "s_m", "s_tm", "classical_bits", "branches",
]


def flat_row(protocol: str, summary: dict, seed) -> dict:
    acct = summary.get("accounting") or {}
    ci = summary.get("ci") or [None, None]
    return {
        "protocol": protocol,
        "mode": summary.get("mode"),
        "seed": seed,
        "trials": summary.get("trials"),
        "accept_probability": summary.get("accept_probability"),
        "ci_low": ci[0],
        "ci_high": ci[1],
        "output_fidelity": summary.get("output_fidelity"),
        "s_c": acct.get("s_c"),
        "s_m": acct.get("s_m"),
        "s_tm": acct.get("s_tm"),
        "classical_bits": acct.get("classical_bits"),
        "branches": summary.get("branches"),
    }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def csv_text(rows: list[dict], fields: list[str] | None = None) -> str:
    if fields is None:
        fields = []
        for row in rows:
            fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row.get(f)) for f in fields])
    return buf.getvalue()


def write_csv(rows: list[dict], path: Path, fields: list[str] | None = None) -> Path:
    path = Path(path)
    path.write_text(csv_text(rows, fields))
    return path


def plot_sweep(rows: list[dict], axis: str, path: Path, title: str = "") -> Path:
    """Acceptance (with CI bars when sampled) and output fidelity against the swept value."""
    xs = [r["value"] for r in rows]
    numeric = all(isinstance(x, (int, float)) for x in xs)
    pos = xs if numeric else list(range(len(xs)))
    acc = [r.get("accept_probability") for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    if all(r.get("ci_low") is not None for r in rows):
        lo = [a - r["ci_low"] for a, r in zip(acc, rows)]
        hi = [r["ci_high"] - a for a, r in zip(acc, rows)]
        ax.errorbar(pos, acc, yerr=[lo, hi], marker="o", capsize=3, label="acceptance")
    else:
        ax.plot(pos, acc, marker="o", label="acceptance")
    fid = [r.get("output_fidelity") for r in rows]
    if any(f is not None for f in fid):
        ax.plot([p for p, f in zip(pos, fid) if f is not None], [f for f in fid if f is not None],
                marker="s", linestyle="--", label="output fidelity")
    extra = [r.get("final_swap_accept") for r in rows]
    if any(e is not None for e in extra):
        ax.plot(pos, extra, marker="^", linestyle=":", label="final SWAP acceptance")
    if not numeric:
        ax.set_xticks(pos)
        ax.set_xticklabels([str(x) for x in xs], rotation=30)
    ax.set_xlabel(axis)
    ax.set_ylabel("probability")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
