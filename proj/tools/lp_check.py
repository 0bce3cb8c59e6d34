#!/usr/bin/env python3
"""Independent cross-check of exported LP files.

Parses the CPLEX-style LP text emitted by `gridverify export-lp` with its own
tiny reader and solves the model with scipy's HiGHS backend. Prints one line
per input file: `<path> <status> <objective>`.

Usage: lp_check.py model1.lp [model2.lp ...]
"""

import re
import sys

import numpy as np
from scipy import optimize

_TOKEN = re.compile(
    r"(x\d+)|(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([+-])"
)


def tokenize_expr(text):
    """Yields (coefficient, variable) pairs from '3 x0 + 2.5e-03 x1 - x2'."""
    sign = 1.0
    coef = None
    for var, num, op in _TOKEN.findall(text):
        if var:
            yield (sign * (1.0 if coef is None else coef), var)
            sign, coef = 1.0, None
        elif num:
            coef = float(num)
        elif op == "-":
            sign = -sign
        # '+' leaves the sign untouched


def parse_lp(path):
    sense = 1.0  # minimize
    objective = {}
    rows = []  # (terms, rel, rhs)
    bounds = {}
    binaries = set()
    section = None
    pending = ""

    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    for ln in lines:
        low = ln.lower()
        if low in ("minimize", "maximize", "subject to", "bounds", "binaries", "binary", "end"):
            if low == "maximize":
                sense = -1.0
            section = low
            continue
        if section in ("minimize", "maximize"):
            body = ln.split(":", 1)[1] if ":" in ln else ln
            for coef, var in tokenize_expr(body):
                objective[var] = objective.get(var, 0.0) + coef
        elif section == "subject to":
            pending += " " + ln
            for rel in ("<=", ">=", "="):
                if rel in pending:
                    lhs, rhs = pending.split(rel, 1)
                    lhs = lhs.split(":", 1)[1] if ":" in lhs else lhs
                    rows.append((dict(tokenize_expr(lhs)), rel, float(rhs)))
                    pending = ""
                    break
        elif section == "bounds":
            if ln.endswith("free"):
                bounds[ln.split()[0]] = (-np.inf, np.inf)
            elif ln.count("<=") == 2:
                lo, var, hi = [p.strip() for p in ln.split("<=")]
                lo = -np.inf if lo == "-inf" else float(lo)
                bounds[var] = (lo, float(hi))
            elif ">=" in ln:
                var, lo = [p.strip() for p in ln.split(">=")]
                bounds[var] = (float(lo), np.inf)
            elif "<=" in ln:
                var, hi = [p.strip() for p in ln.split("<=")]
                bounds[var] = (0.0, float(hi))
            elif "=" in ln:
                var, val = [p.strip() for p in ln.split("=")]
                bounds[var] = (float(val), float(val))
        elif section in ("binaries", "binary"):
            binaries.update(ln.split())
    return sense, objective, rows, bounds, binaries


def solve(path):
    sense, objective, rows, bounds, binaries = parse_lp(path)
    names = sorted(
        {v for v in objective}
        | {v for terms, _, _ in rows for v in terms}
        | set(bounds)
        | binaries,
        key=lambda s: int(s[1:]),
    )
    index = {v: i for i, v in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for v, coef in objective.items():
        c[index[v]] = sense * coef

    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for terms, rel, rhs in rows:
        row = np.zeros(n)
        for v, coef in terms.items():
            row[index[v]] = coef
        if rel == "<=":
            a_ub.append(row)
            b_ub.append(rhs)
        elif rel == ">=":
            a_ub.append(-row)
            b_ub.append(-rhs)
        else:
            a_eq.append(row)
            b_eq.append(rhs)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    for v, (l, h) in bounds.items():
        lo[index[v]], hi[index[v]] = l, h
    for v in binaries:
        lo[index[v]] = max(lo[index[v]], 0.0)
        hi[index[v]] = min(hi[index[v]], 1.0)

    kw = dict(
        c=c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lo, hi)),
    )
    if binaries:
        integrality = np.zeros(n)
        for v in binaries:
            integrality[index[v]] = 1
        res = optimize.milp(
            c=kw["c"],
            constraints=[
                cons
                for cons in (
                    optimize.LinearConstraint(kw["A_ub"], -np.inf, kw["b_ub"])
                    if kw["A_ub"] is not None
                    else None,
                    optimize.LinearConstraint(kw["A_eq"], kw["b_eq"], kw["b_eq"])
                    if kw["A_eq"] is not None
                    else None,
                )
                if cons is not None
            ],
            integrality=integrality,
            bounds=optimize.Bounds(lo, hi),
        )
        status = "Optimal" if res.status == 0 else ("Infeasible" if res.status == 2 else "Other")
        obj = sense * res.fun if res.fun is not None else float("nan")
    else:
        res = optimize.linprog(**kw, method="highs")
        status = "Optimal" if res.status == 0 else ("Infeasible" if res.status == 2 else "Other")
        obj = sense * res.fun if res.fun is not None else float("nan")
    return status, obj


def main():
    if len(sys.argv) < 2:
        print(__doc__, file=sys.stderr)
        return 2
    for path in sys.argv[1:]:
        status, obj = solve(path)
        print(f"{path} {status} {obj:.12g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
