"""File formats: transceiver checkpoints, nu tables, labelings, result CSV and SVG plots.

Binary containers are little-endian::

    magic (8 bytes) | version u32 | header fields | array count u32 |
    per array: name length u32, UTF-8 name, rank u32, shape u32 * rank, float64 data (row-major)
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderDims, TransceiverParams
from .errors import ConfigurationError
from .labeling import BitLabeling
from .mlsd import NuTable

CHECKPOINT_MAGIC = b"SBRNNCKP"
NUTABLE_MAGIC = b"MLSDNUTB"
FORMAT_VERSION = 1


def _write_arrays(fh, arrays: dict):
    fh.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        raw = name.encode()
        fh.write(struct.pack("<I", len(raw)) + raw)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def _read_arrays(fh) -> dict:
    (count,) = struct.unpack("<I", fh.read(4))
    out = {}
    for _ in range(count):
        (ln,) = struct.unpack("<I", fh.read(4))
        name = fh.read(ln).decode()
        (rank,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(fh.read(8 * size), dtype="<f8")
        out[name] = data.reshape(shape).astype(np.float64)
    return out


def _check_header(fh, magic):
    got = fh.read(len(magic))
    if got != magic:
        raise ConfigurationError(f"bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported format version {version}")


def save_checkpoint(path, params: TransceiverParams):
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<II", params.dims.M, params.dims.n))
        _write_arrays(fh, {k: v.detach().cpu().numpy() for k, v in params.named().items()})


def load_checkpoint(path) -> TransceiverParams:
    with open(path, "rb") as fh:
        _check_header(fh, CHECKPOINT_MAGIC)
        M, n = struct.unpack("<II", fh.read(8))
        arrays = _read_arrays(fh)
    return TransceiverParams.from_named(AutoencoderDims(M, n), arrays)


def save_nu_table(path, table: NuTable):
    with open(path, "wb") as fh:
        fh.write(NUTABLE_MAGIC + struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<III", table.order, table.mu, table.sps))
        _write_arrays(fh, {"sums": table.sums, "sumsq": table.sumsq, "counts": table.counts})


def load_nu_table(path) -> NuTable:
    with open(path, "rb") as fh:
        _check_header(fh, NUTABLE_MAGIC)
        order, mu, sps = struct.unpack("<III", fh.read(12))
        a = _read_arrays(fh)
    return NuTable(order, mu, sps, a["sums"], a["sumsq"], a["counts"].astype(np.int64))


def save_labeling(path, labeling: BitLabeling):
    Path(path).write_text("\n".join(labeling.to_lines()) + "\n")


def load_labeling(path) -> BitLabeling:
    return BitLabeling.from_lines(Path(path).read_text().splitlines())


@dataclass(frozen=True)
class ResultRow:
    system: str
    distance_km: float
    eta: int
    memory: int  # W for the SBRNN, mu for MLSD
    bler: float
    ber: float
    ber_lower_bound: float
    labeling: str
    weights: str
    avg_xent: float
    weight_vector: str
    flops_pdb: float
    flops_tx_pdb: float
    seed: int
    config_hash: str

    def sort_key(self):
        return (self.system, self.eta, self.distance_km, self.labeling, self.weights, self.seed)


_CASTS = {f.name: f.type for f in fields(ResultRow)}


def _cell(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(ResultRow)])
    for r in sorted(rows, key=ResultRow.sort_key):
        w.writerow([_cell(v) for v in asdict(r).values()])
    return buf.getvalue()


def csv_to_rows(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        kw = {}
        for k, v in rec.items():
            t = _CASTS[k]
            kw[k] = float(v) if t == "float" else int(v) if t == "int" else v
        out.append(ResultRow(**kw))
    return out


def write_csv(path, rows):
    try:
        Path(path).write_text(rows_to_csv(rows))
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> list[ResultRow]:
    return csv_to_rows(Path(path).read_text())


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss", "validation_bler"])
        for step, loss, vb in trace.rows():
            w.writerow([step, repr(float(loss)), "" if math.isnan(vb) else repr(float(vb))])


_COLORS = ["#c0392b", "#2471a3", "#1e8449", "#7d3c98", "#d68910", "#17202a", "#a04000", "#148f77"]


def plot_series(rows):
    """One series per (system, eta): optimized labeling and weights for the SBRNN, Gray for MLSD."""
    series = {}
    for r in rows:
        if r.system == "sbrnn" and (r.labeling != "tabu" or r.weights != "optimized"):
            continue
        series.setdefault((r.system, r.eta), []).append((r.distance_km, r.ber))
    return {k: sorted(v) for k, v in sorted(series.items())}


def render_svg(rows, hd_fec_threshold: float | None = None, floor: float = 1e-7,
               width: int = 640, height: int = 440) -> str:
    """log10(BER) versus distance as polylines, with an optional HD-FEC reference line."""
    series = plot_series(rows)
    if not series:
        raise ConfigurationError("nothing to plot")
    left, right, top, bottom = 70, 170, 20, 50
    xs = [d for pts in series.values() for d, _ in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1
    ys = [math.log10(max(b, floor)) for pts in series.values() for _, b in pts]
    if hd_fec_threshold:
        ys.append(math.log10(hd_fec_threshold))
    y0, y1 = math.floor(min(ys)), max(0, math.ceil(max(ys)))
    if y1 == y0:
        y0 -= 1

    def px(d):
        return left + (d - x0) / (x1 - x0) * (width - left - right)

    def py(ly):
        return top + (y1 - ly) / (y1 - y0) * (height - top - bottom)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{width - left - right}" height="{height - top - bottom}" '
           'fill="none" stroke="#000"/>']
    for e in range(y0, y1 + 1):
        y = py(e)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for d in sorted(set(xs)):
        x = px(d)
        out.append(f'<line x1="{x:.2f}" y1="{height - bottom}" x2="{x:.2f}" y2="{height - bottom + 4}" stroke="#000"/>')
        out.append(f'<text x="{x:.2f}" y="{height - bottom + 16}" text-anchor="middle">{d:g}</text>')
    out.append(f'<text x="{(left + width - right) / 2:.1f}" y="{height - 12}" text-anchor="middle">distance (km)</text>')
    out.append(f'<text x="16" y="{(top + height - bottom) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(top + height - bottom) / 2:.1f})">BER</text>')
    if hd_fec_threshold:
        y = py(math.log10(hd_fec_threshold))
        out.append(f'<line class="hd-fec" x1="{left}" y1="{y:.2f}" x2="{width - right}" y2="{y:.2f}" '
                   'stroke="#555" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{width - right + 6}" y="{y + 4:.2f}">HD-FEC {hd_fec_threshold:g}</text>')
    for i, ((system, eta), pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(d):.2f},{py(math.log10(max(b, floor))):.2f}" for d, b in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}">'
                   f'<title>{system} eta={eta}</title></polyline>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{width - right + 6}" y1="{ly}" x2="{width - right + 26}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 30}" y="{ly + 4}">{system} η={eta}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, rows, hd_fec_threshold=None):
    try:
        Path(path).write_text(render_svg(rows, hd_fec_threshold))
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from exc
