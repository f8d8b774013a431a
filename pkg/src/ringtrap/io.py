"""CSV results and the run manifest.

Each sweep writes one CSV per state family with the header
``param,state,eta_mean,eta_spread,eta_loss,residual,n_samples`` and floats
printed to 17 significant digits, plus a single ``manifest.yaml`` that
carries the configuration, its hash and the run provenance.  For fixed
inputs and seeds the CSV files are byte-identical between runs.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .config import config_hash
from .errors import OutputError

CSV_HEADER = ("param", "state", "eta_mean", "eta_spread", "eta_loss", "residual", "n_samples")
MANIFEST_NAME = "manifest.yaml"


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    seed: int
    timestamp: str
    kind: str
    grid: list
    method: str
    wall_time: float
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config, kind, grid, method, seed, wall_time, warnings=(), diagnostics=None):
        stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        return cls(config.hash, __version__, int(seed), stamp, kind,
                   [format_float(g) for g in grid], method, float(wall_time),
                   [str(w) for w in warnings], [], _plain(diagnostics or {}), config.raw)

    def verify(self) -> bool:
        return config_hash(self.config) == self.config_hash


def _plain(obj):
    """Convert numpy scalars and non-finite floats into YAML-friendly values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return format_float(obj)
    return obj


def family_of(state: str) -> str:
    """Group key for output files: eigenstate labels collapse to one family."""
    return re.sub(r"^eig:\d+", "eig", state)


def _filename(kind, family):
    safe = family.replace("+", "p").replace("-", "m").replace("=", "")
    safe = re.sub(r"[^A-Za-z0-9_.]", "_", safe)
    return f"{kind}_{safe}.csv"


def records_csv(records) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([format_float(r.param), r.state, format_float(r.eta_mean),
                    format_float(r.eta_spread), format_float(r.eta_loss),
                    format_float(r.residual), int(r.n_samples)])
    return buf.getvalue()


def read_results(path):
    """Parse a results CSV back into a list of dicts with float columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in ("param", "eta_mean", "eta_spread", "eta_loss", "residual"):
            row[k] = float(row[k])
        row["n_samples"] = int(row["n_samples"])
    return rows


def write_results(records, manifest: RunManifest, directory, extra_tables=None):
    """Write per-family CSVs, optional extra tables and the manifest.

    ``extra_tables`` maps a file stem to ``(header, rows)``.  On any I/O
    failure the files written so far are removed and :class:`OutputError`
    is raised.  Returns the list of paths written.
    """
    directory = Path(directory)
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        families = {}
        for r in records:
            families.setdefault(family_of(r.state), []).append(r)
        if not families:
            families[""] = []
        for fam, recs in families.items():
            name = _filename(manifest.kind, fam) if fam else f"{manifest.kind}.csv"
            path = directory / name
            path.write_text(records_csv(recs))
            written.append(path)
        for stem, (header, rows) in (extra_tables or {}).items():
            buf = _io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_float(v) if isinstance(v, float) else v for v in row])
            path = directory / f"{manifest.kind}_{stem}.csv"
            path.write_text(buf.getvalue())
            written.append(path)
        manifest.files = [p.name for p in written]
        path = directory / MANIFEST_NAME
        path.write_text(yaml.safe_dump(asdict(manifest), sort_keys=False))
        written.append(path)
    except OSError as exc:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise OutputError(f"cannot write results to {directory}: {exc}") from exc
    return written


def load_manifest(directory) -> RunManifest:
    data = yaml.safe_load((Path(directory) / MANIFEST_NAME).read_text())
    return RunManifest(**data)
