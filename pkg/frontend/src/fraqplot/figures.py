"""Render figures from fraq run outputs.

A figure spec is one JSON object:

    {"kind": "decay" | "control" | "spectrum" | "strichartz",
     "inputs": {...},        # paths into one or more run directories
     "output": "fig.png",
     "options": {...}}       # axis options, e.g. {"logy": false} for decay

Inputs per kind:
  decay      series: series.csv, manifest: manifest.json (gamma overlay + hash)
  control    result: result.json (control_norms), manifest: manifest.json
  spectrum   result: result.json (gramian_spectrum), manifest: manifest.json
  strichartz reports: [result.json, ...], manifest optional

Rendering is read-only; every figure carries the manifest's config hash in
the footer.  Schema violations raise FigureError naming the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureError", "FigureSpec", "load_spec", "render"]

SERIES_HEADER = "t,mass,energy,hs_norm,dissipation_integral"
KINDS = ("decay", "control", "spectrum", "strichartz")


class FigureError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class FigureSpec:
    kind: str
    inputs: dict
    output: Path
    options: dict = field(default_factory=dict)


def load_spec(path: str | Path) -> FigureSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FigureError("spec", f"cannot read figure spec: {exc}") from exc
    kind = raw.get("kind")
    if kind not in KINDS:
        raise FigureError("kind", f"must be one of {', '.join(KINDS)}")
    if "output" not in raw:
        raise FigureError("output", "required field is missing")
    inputs = raw.get("inputs")
    if not isinstance(inputs, dict):
        raise FigureError("inputs", "must be an object of input paths")
    return FigureSpec(kind=kind, inputs=inputs, output=Path(raw["output"]), options=raw.get("options", {}))


# ---------------------------------------------------------------------------
# input readers (validate against the documented run-output schemas)


def _input_path(spec: FigureSpec, key: str) -> Path:
    if key not in spec.inputs:
        raise FigureError(f"inputs.{key}", "required input is missing")
    p = Path(spec.inputs[key])
    if not p.exists():
        raise FigureError(f"inputs.{key}", f"no such file: {p}")
    return p


def _read_json(spec: FigureSpec, key: str) -> dict:
    p = _input_path(spec, key)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FigureError(f"inputs.{key}", f"not valid JSON: {exc}") from exc


def _read_series(spec: FigureSpec) -> dict[str, np.ndarray]:
    p = _input_path(spec, "series")
    lines = p.read_text().strip().splitlines()
    if not lines or lines[0] != SERIES_HEADER:
        raise FigureError("inputs.series", f"header must be '{SERIES_HEADER}'")
    if len(lines) < 2:
        raise FigureError("inputs.series", "no data rows")
    try:
        data = np.array([[float(tok) for tok in row.split(",")] for row in lines[1:]])
    except ValueError as exc:
        raise FigureError("inputs.series", f"non-numeric row: {exc}") from exc
    if data.shape[1] != 5:
        raise FigureError("inputs.series", "rows must have 5 columns")
    cols = SERIES_HEADER.split(",")
    return {name: data[:, i] for i, name in enumerate(cols)}


def _read_manifest(spec: FigureSpec, required: bool = True) -> dict:
    if not required and "manifest" not in spec.inputs:
        return {}
    m = _read_json(spec, "manifest")
    if "config_hash" not in m:
        raise FigureError("inputs.manifest", "missing config_hash")
    return m


def _footer(fig, manifest: dict) -> None:
    h = manifest.get("config_hash", "")
    label = f"config {h[:12]}" if h else "config n/a"
    fig.text(0.01, 0.005, label, fontsize=6, color="0.45", family="monospace")


def _new_fig():
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=130)
    ax.grid(True, alpha=0.3)
    return fig, ax


# ---------------------------------------------------------------------------
# renderers


def _render_decay(spec: FigureSpec) -> None:
    series = _read_series(spec)
    manifest = _read_manifest(spec)
    t, energy = series["t"], series["energy"]
    fig, ax = _new_fig()
    ax.plot(t, energy, lw=1.2, label="E(t)")
    gamma = manifest.get("metrics", {}).get("gamma")
    if gamma is not None:
        window = manifest.get("config", {}).get("fit_window")
        t0 = float(window[0]) if window else float(t[0])
        i0 = int(np.argmin(np.abs(t - t0)))
        ax.plot(
            t,
            energy[i0] * np.exp(-gamma * (t - t[i0])),
            "--",
            lw=1.0,
            label=rf"fit $e^{{-\gamma t}}$, $\gamma$={gamma:.3g}",
        )
    if spec.options.get("logy", True):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.set_title(spec.options.get("title", "energy decay"))
    ax.legend(frameon=False)
    _footer(fig, manifest)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)


def _render_control(spec: FigureSpec) -> None:
    result = _read_json(spec, "result")
    manifest = _read_manifest(spec)
    norms = result.get("control_norms")
    if not isinstance(norms, list) or not norms:
        raise FigureError("inputs.result", "missing or empty control_norms")
    try:
        t = np.array([row["t"] for row in norms])
        l2 = np.array([row["l2"] for row in norms])
        hs = np.array([row["hs"] for row in norms])
    except (KeyError, TypeError) as exc:
        raise FigureError("inputs.result", f"control_norms rows need t, l2, hs: {exc}") from exc
    fig, ax = _new_fig()
    ax.plot(t, l2, marker=".", lw=1.0, label=r"$\|h(\tau_m)\|_{L^2}$")
    ax.plot(t, hs, marker=".", lw=1.0, label=r"$\|h(\tau_m)\|_{H^s}$")
    ax.set_xlabel(r"$\tau_m$")
    ax.set_ylabel("control norm")
    ax.set_title(spec.options.get("title", "control profile"))
    ax.legend(frameon=False)
    _footer(fig, manifest)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)


def _render_spectrum(spec: FigureSpec) -> None:
    result = _read_json(spec, "result")
    manifest = _read_manifest(spec)
    values = result.get("gramian_spectrum")
    if not isinstance(values, list) or not values:
        raise FigureError("inputs.result", "missing or empty gramian_spectrum")
    vals = np.asarray(values, dtype=float)
    fig, ax = _new_fig()
    ax.bar(np.arange(len(vals)), vals, width=0.85)
    if spec.options.get("logy", False) and np.all(vals > 0):
        ax.set_yscale("log")
    ax.set_xlabel("eigenvalue index (ascending)")
    ax.set_ylabel("eigenvalue")
    ax.set_title(spec.options.get("title", "observability gramian spectrum"))
    _footer(fig, manifest)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)


def _render_strichartz(spec: FigureSpec) -> None:
    paths = spec.inputs.get("reports")
    if not isinstance(paths, list) or not paths:
        raise FigureError("inputs.reports", "must be a nonempty list of report paths")
    reports = []
    for i, p in enumerate(paths):
        path = Path(p)
        if not path.exists():
            raise FigureError(f"inputs.reports[{i}]", f"no such file: {p}")
        rep = json.loads(path.read_text())
        for key in ("p", "q", "n", "empirical_constant"):
            if key not in rep:
                raise FigureError(f"inputs.reports[{i}]", f"missing field {key}")
        reports.append(rep)
    manifest = _read_manifest(spec, required=False)
    fig, ax = _new_fig()
    by_pair: dict[tuple, list] = {}
    for rep in reports:
        by_pair.setdefault((rep["p"], rep["q"]), []).append((rep["n"], rep["empirical_constant"]))
    for (p, q), pts in sorted(by_pair.items()):
        pts.sort()
        ns, cs = zip(*pts)
        ax.plot(ns, cs, marker="o", lw=1.0, label=f"(p,q)=({p:g},{q:g})")
    ax.set_xlabel("modes per dimension n")
    ax.set_ylabel("empirical constant")
    ax.set_title(spec.options.get("title", "dispersive-constant sweep"))
    ax.legend(frameon=False)
    _footer(fig, manifest)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)


_RENDERERS = {
    "decay": _render_decay,
    "control": _render_control,
    "spectrum": _render_spectrum,
    "strichartz": _render_strichartz,
}


def render(spec: FigureSpec) -> Path:
    """Render the figure and return the output path.  Inputs are only read."""
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    _RENDERERS[spec.kind](spec)
    return spec.output
