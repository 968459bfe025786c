"""CSV tables with a provenance header, and log-log figures next to them."""
import csv
import hashlib
import io
from pathlib import Path

import numpy as np

from . import __version__


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def provenance(seed=None, config_hash=None, extra=None):
    lines = [f"generator=halfjump {__version__}"]
    if seed is not None:
        lines.append(f"seed={seed}")
    if config_hash is not None:
        lines.append(f"config_sha256={config_hash}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={fmt(v)}")
    return lines


def write_csv(path, columns, rows, header=()):
    """Write ``rows`` (sequences matching ``columns``) with ``# key=value`` header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv`, header comments skipped."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader)


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def loglog_plot(path, series, xlabel, ylabel, title=""):
    """``series`` maps a label to ``(x, y)``; figure saved as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = (x > 0) & (y > 0)
        ax.loglog(x[ok], y[ok], marker="o", ms=3, lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
