"""CSV export of simulation traces and comparison tables.

Trace files hold three sections, each introduced by a ``# <name>`` line and
separated by a blank line::

    # samples
    t,x1,...,xn,u1,...,um
    # events
    k,t_k,i_k,interval,J_1,...,J_M,cond_a_1,...,cond_a_M,cond_b_1,...,cond_b_M
    # summary
    transmissions,cumulative_stage_cost

Numbers use 12 significant digits in scientific notation. Empty cells mark
patterns that were infeasible or not solved; condition flags are 1/0.
"""
import csv
import io

import numpy as np


def fmt(value):
    return f"{float(value):.11e}"


def _cell(value):
    return "" if value is None or not np.isfinite(value) else fmt(value)


def _flags(values, M):
    if values is None:
        return [""] * M
    return ["1" if v else "0" for v in values] + [""] * (M - len(values))


def sample_header(n, m):
    return ["t"] + [f"x{j + 1}" for j in range(n)] + [f"u{j + 1}" for j in range(m)]


def event_header(M):
    return (["k", "t_k", "i_k", "interval"] + [f"J_{i}" for i in range(1, M + 1)]
            + [f"cond_a_{i}" for i in range(1, M + 1)]
            + [f"cond_b_{i}" for i in range(1, M + 1)])


SUMMARY_HEADER = ["transmissions", "cumulative_stage_cost"]


def trace_to_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n, m, M = trace.x.shape[1], trace.u.shape[1], trace.table.M
    buf.write("# samples\n")
    w.writerow(sample_header(n, m))
    for t, x, u in zip(trace.t, trace.x, trace.u):
        w.writerow([fmt(t)] + [fmt(v) for v in x] + [fmt(v) for v in u])
    buf.write("\n# events\n")
    w.writerow(event_header(M))
    for ev in trace.events:
        w.writerow([str(ev.k), fmt(ev.t), str(ev.pattern), fmt(ev.interval)]
                   + [_cell(c) for c in ev.costs]
                   + _flags(ev.cond_a, M) + _flags(ev.cond_b, M))
    buf.write("\n# summary\n")
    w.writerow(SUMMARY_HEADER)
    w.writerow([str(trace.transmissions), fmt(trace.cumulative_stage_cost)])
    return buf.getvalue()


def read_trace_csv(text):
    """Parse a trace file back into ``{section: (header, rows)}`` (strings)."""
    sections = {}
    name = None
    for block in text.split("\n\n"):
        lines = [ln for ln in block.strip("\n").split("\n") if ln]
        if not lines:
            continue
        name = lines[0].lstrip("# ").strip()
        rows = list(csv.reader(lines[1:]))
        sections[name] = (rows[0], rows[1:])
    return sections


COMPARE_HEADER = ["mode", "beta", "transmissions", "cumulative_stage_cost", "time_to_radius"]


def compare_rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_HEADER)
    for r in rows:
        w.writerow([r["mode"], "" if r["beta"] is None else fmt(r["beta"]),
                    str(r["transmissions"]), fmt(r["cumulative_stage_cost"]),
                    "" if r["time_to_radius"] is None else fmt(r["time_to_radius"])])
    return buf.getvalue()


def compare_rows_to_text(rows):
    out = [f"{'mode':<16}{'beta':>10}{'transmissions':>15}{'stage cost':>14}{'t(|x|<0.05)':>13}"]
    for r in rows:
        beta = "-" if r["beta"] is None else f"{r['beta']:g}"
        ttr = "never" if r["time_to_radius"] is None else f"{r['time_to_radius']:.1f}"
        out.append(f"{r['mode']:<16}{beta:>10}{r['transmissions']:>15d}"
                   f"{r['cumulative_stage_cost']:>14.4f}{ttr:>13}")
    return "\n".join(out)
