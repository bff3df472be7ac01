"""Small CSV helpers: ``#`` metadata lines, one column-name line, numeric rows."""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np


def write_table(path, columns: Sequence[str], data: dict, header: Iterable[str] = ()) -> None:
    """Write equal-length columns with ``repr`` precision (round-trip exact).

    Parameters
    ----------
    path : path-like
    columns : sequence of str
        Column order.
    data : dict
        Column name -> 1D array.
    header : iterable of str
        Metadata lines, written with a ``# `` prefix.
    """
    cols = [np.asarray(data[name]).ravel() for name in columns]
    n = len(cols[0]) if cols else 0
    with open(path, "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for k in range(n):
            fh.write(",".join(_fmt(c[k]) for c in cols) + "\n")


def _fmt(value) -> str:
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    if isinstance(value, (str, np.str_)):
        return str(value)
    return repr(float(value))


def read_table(path) -> dict[str, np.ndarray]:
    """Read a table written by :func:`write_table` into a column dict."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip() and not line.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no column-name line")
    names = [n.strip() for n in lines[0].split(",")]
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(names)))
    if data.shape[1] != len(names):
        raise ValueError(f"{path}: {data.shape[1]} columns for {len(names)} names")
    return {name: data[:, k].copy() for k, name in enumerate(names)}


def read_header(path) -> list[str]:
    """Metadata lines (without the ``# `` prefix) at the top of a table."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            lines.append(line[1:].strip())
    return lines
