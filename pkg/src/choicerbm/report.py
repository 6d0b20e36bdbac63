"""Model persistence and Hinton-diagram rendering.

Model files are canonical JSON: a format/version header, the five
parameter blocks at full precision, normalization statistics, column
names, the training configuration and the headline fit metrics.  Writing
is canonical (sorted keys, fixed separators), so write -> read -> write
is byte-identical.

Hinton diagrams are standalone SVG 1.1 documents: one square per matrix
entry, area proportional to |value|, white fill for positive and black
for negative entries, and a blue outline wherever the aligned t value
clears the significance threshold.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .dataset import NormStats
from .model import CrbmParams, ParamBlocks
from .trainer import TrainConfig

MODEL_FORMAT = "choicerbm-model"
MODEL_FORMAT_VERSION = 1


class ModelFileError(ValueError):
    """Model file is unreadable, of the wrong version, or inconsistent."""


def save_model(p: CrbmParams, path, norm_stats: NormStats = None,
               feature_names=None, alternative_names=None,
               train_config: TrainConfig = None, metrics: dict = None,
               std_errs: ParamBlocks = None, tstats: ParamBlocks = None,
               choice_column: str = None):
    """Write a model file; every numeric value survives a round trip exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "n_alternatives": p.n_alternatives,
        "n_hidden": p.n_hidden,
        "n_features": p.n_features,
        "params": {name: np.asarray(a).tolist() for name, a in p.blocks()},
    }
    if choice_column is not None:
        doc["choice_column"] = str(choice_column)
    if norm_stats is not None:
        doc["norm_stats"] = {
            "means": norm_stats.means.tolist(),
            "stds": norm_stats.stds.tolist(),
            "constant": [bool(v) for v in norm_stats.constant],
        }
    if feature_names is not None:
        doc["feature_names"] = list(feature_names)
    if alternative_names is not None:
        doc["alternative_names"] = list(alternative_names)
    if train_config is not None:
        doc["train_config"] = dataclasses.asdict(train_config)
    if metrics is not None:
        doc["metrics"] = {k: float(v) for k, v in metrics.items()}
    for key, blocks in (("std_errs", std_errs), ("tstats", tstats)):
        if blocks is not None:
            doc[key] = {name: np.asarray(a).tolist() for name, a in blocks.blocks()}
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"),
                         allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
        fh.write("\n")


def load_model(path):
    """Read a model file back as (params, metadata dict).

    Metadata keys mirror the optional save arguments; parameter and
    dimension consistency is verified before anything is returned.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: truncated or malformed model file "
                             f"({exc})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"{path}: unsupported format version {doc.get('version')!r}")
    dims = [doc.get(key) for key in ("n_alternatives", "n_hidden", "n_features")]
    if not all(isinstance(v, int) and v >= 0 for v in dims):
        raise ModelFileError(f"{path}: missing or invalid dimension header")
    n_alt, n_hid, n_feat = dims
    shapes = {
        "choice_hidden_w": (n_alt, n_hid),
        "choice_context_w": (n_alt, n_feat),
        "hidden_context_w": (n_hid, n_feat),
        "choice_bias": (n_alt,),
        "hidden_bias": (n_hid,),
    }

    def read_blocks(raw):
        return {name: np.asarray(raw[name], dtype=np.float64).reshape(shape)
                for name, shape in shapes.items()}

    try:
        params = CrbmParams(**read_blocks(doc["params"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(
            f"{path}: parameter blocks do not match the declared dimensions "
            f"({exc})") from None

    meta = {}
    if "norm_stats" in doc:
        ns = doc["norm_stats"]
        meta["norm_stats"] = NormStats(
            means=np.asarray(ns["means"], dtype=np.float64),
            stds=np.asarray(ns["stds"], dtype=np.float64),
            constant=np.asarray(ns["constant"], dtype=bool))
    if "feature_names" in doc:
        meta["feature_names"] = tuple(doc["feature_names"])
    if "alternative_names" in doc:
        meta["alternative_names"] = tuple(doc["alternative_names"])
    if "train_config" in doc:
        meta["train_config"] = TrainConfig(**doc["train_config"])
    if "metrics" in doc:
        meta["metrics"] = dict(doc["metrics"])
    if "choice_column" in doc:
        meta["choice_column"] = doc["choice_column"]
    for key in ("std_errs", "tstats"):
        if key in doc:
            try:
                meta[key] = ParamBlocks(**read_blocks(doc[key]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelFileError(f"{path}: bad {key} blocks ({exc})") from None
    return params, meta


@dataclass(frozen=True)
class HintonSpec:
    values: np.ndarray        # matrix to draw
    row_labels: tuple
    col_labels: tuple
    tstats: np.ndarray        # aligned with values
    threshold: float = 1.96
    cell_px: int = 24

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "tstats",
                           np.asarray(self.tstats, dtype=np.float64))
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if self.values.ndim != 2:
            raise ValueError("values must be a matrix")
        if self.tstats.shape != self.values.shape:
            raise ValueError("tstats shape does not match values")
        if len(self.row_labels) != self.values.shape[0]:
            raise ValueError("row label count does not match")
        if len(self.col_labels) != self.values.shape[1]:
            raise ValueError("column label count does not match")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def hinton_svg(spec: HintonSpec) -> str:
    """Render a Hinton diagram as a deterministic SVG document.

    Patch side length scales with sqrt(|value| / max|value|), so the area
    tracks the magnitude.  Zero entries produce zero-area patches.
    """
    rows, cols = spec.values.shape
    cell = spec.cell_px
    margin_left, margin_top, margin_bottom = 8 * cell, cell, 5 * cell
    width = margin_left + cols * cell + cell
    height = margin_top + rows * cell + margin_bottom
    vmax = float(np.abs(spec.values).max())

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">')
    out.append(
        f'<rect x="{margin_left}" y="{margin_top}" width="{cols * cell}" '
        f'height="{rows * cell}" fill="#b0b0b0"/>')
    for r in range(rows):
        for c in range(cols):
            v = spec.values[r, c]
            side = cell * np.sqrt(abs(v) / vmax) if vmax > 0 else 0.0
            cx = margin_left + c * cell + cell / 2
            cy = margin_top + r * cell + cell / 2
            fill = "#ffffff" if v > 0 else "#000000"
            stroke = ('stroke="#0050ff" stroke-width="2"'
                      if abs(spec.tstats[r, c]) >= spec.threshold
                      else 'stroke="none"')
            out.append(
                f'<rect x="{_fmt(cx - side / 2)}" y="{_fmt(cy - side / 2)}" '
                f'width="{_fmt(side)}" height="{_fmt(side)}" '
                f'fill="{fill}" {stroke}/>')
    for r, label in enumerate(spec.row_labels):
        y = margin_top + r * cell + cell / 2
        out.append(
            f'<text x="{margin_left - 6}" y="{_fmt(y + 4)}" '
            f'text-anchor="end" font-family="monospace" '
            f'font-size="{cell // 2}">{_escape(label)}</text>')
    for c, label in enumerate(spec.col_labels):
        x = margin_left + c * cell + cell / 2
        y = margin_top + rows * cell + 10
        out.append(
            f'<text x="{_fmt(x)}" y="{y}" text-anchor="end" '
            f'font-family="monospace" font-size="{cell // 2}" '
            f'transform="rotate(-60 {_fmt(x)} {y})">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))
