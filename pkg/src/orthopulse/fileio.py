"""Versioned structured-text artifacts: waveform sets, scenes, run configs.

Everything is JSON with sorted keys and full-precision decimal floats, so a
fixed seed reproduces byte-identical files and load(save(x)) round-trips
every numeric payload exactly. Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import importlib.resources
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .waveform import CodeFilterPair, MismatchedFilter, OrthogonalSet, PolyphaseCode
from .optimizer import OptimizerConfig
from .simulator import Scatterer, TripScene

WAVEFORM_FORMAT = "orthopulse-waveform"
WAVEFORM_VERSION = 1
SCENE_FORMAT = "orthopulse-scene"
SCENE_VERSION = 1
CONFIG_FORMAT = "orthopulse-synth-config"
CONFIG_VERSION = 1

OUT_DIR_ENV = "ORTHOPULSE_OUT_DIR"


class ConfigError(ValueError):
    """Invalid or inconsistent configuration/input document."""


def atomic_write_text(path, text: str):
    """Write-temp-then-rename so readers never見 a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path, doc):
    atomic_write_text(path, dump_json(doc))


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _require_keys(doc: dict, allowed: set, required: set, what: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {what}: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing keys in {what}: {sorted(missing)}")


def _check_header(doc: dict, fmt: str, version: int, what: str):
    if doc.get("format") != fmt:
        raise ConfigError(f"{what}: expected format {fmt!r}, got {doc.get('format')!r}")
    if doc.get("version") != version:
        raise ConfigError(
            f"{what}: unsupported version {doc.get('version')!r} (expected {version})"
        )


def save_waveform(path, oset: OrthogonalSet, config: dict = None, metrics: dict = None):
    """Persist a set: per-pair code phases (radians) and filter coefficients
    (re/im), geometry, objective value, and a hash of the generating config."""
    pairs = []
    for p in oset.pairs:
        pairs.append(
            {
                "code_phases_rad": [float(v) for v in p.code.phases],
                "filter_real": [float(v) for v in p.filter.coefficients.real],
                "filter_imag": [float(v) for v in p.filter.coefficients.imag],
                "mainlobe_gain_real": float(p.mainlobe_gain.real),
                "mainlobe_gain_imag": float(p.mainlobe_gain.imag),
            }
        )
    doc = {
        "format": WAVEFORM_FORMAT,
        "version": WAVEFORM_VERSION,
        "code_length": oset.code_length,
        "filter_length": oset.filter_length,
        "set_size": oset.set_size,
        "mainlobe_center": oset.mainlobe_center,
        "mainlobe_width": oset.mainlobe_width,
        "sample_period_s": float(oset.pairs[0].code.sample_period),
        "isl_error": None if oset.isl_error is None else float(oset.isl_error),
        "config": config,
        "config_hash": None if config is None else config_hash(config),
        "metrics": metrics,
        "pairs": pairs,
    }
    write_json(path, doc)


_WAVEFORM_KEYS = {
    "format",
    "version",
    "code_length",
    "filter_length",
    "set_size",
    "mainlobe_center",
    "mainlobe_width",
    "sample_period_s",
    "isl_error",
    "config",
    "config_hash",
    "metrics",
    "pairs",
}
_PAIR_KEYS = {
    "code_phases_rad",
    "filter_real",
    "filter_imag",
    "mainlobe_gain_real",
    "mainlobe_gain_imag",
}


def load_waveform(path):
    """Load a waveform file; returns (OrthogonalSet, document dict)."""
    with open(path) as handle:
        doc = json.load(handle)
    _check_header(doc, WAVEFORM_FORMAT, WAVEFORM_VERSION, "waveform file")
    _require_keys(doc, _WAVEFORM_KEYS, _WAVEFORM_KEYS, "waveform file")
    n = int(doc["code_length"])
    lf = int(doc["filter_length"])
    if len(doc["pairs"]) != int(doc["set_size"]):
        raise ConfigError("waveform file: set_size does not match the pair count")
    pairs = []
    for entry in doc["pairs"]:
        _require_keys(entry, _PAIR_KEYS, _PAIR_KEYS, "waveform pair")
        phases = np.asarray(entry["code_phases_rad"], dtype=np.float64)
        re = np.asarray(entry["filter_real"], dtype=np.float64)
        im = np.asarray(entry["filter_imag"], dtype=np.float64)
        if phases.size != n or re.size != lf or im.size != lf:
            raise ConfigError("waveform pair: payload lengths do not match the header")
        code = PolyphaseCode.from_phases(phases, float(doc["sample_period_s"]))
        filt = MismatchedFilter(
            re + 1j * im, int(doc["mainlobe_center"]), int(doc["mainlobe_width"])
        )
        gain = complex(entry["mainlobe_gain_real"], entry["mainlobe_gain_imag"])
        pairs.append(CodeFilterPair(code=code, filter=filt, mainlobe_gain=gain))
    oset = OrthogonalSet(pairs=tuple(pairs), isl_error=doc["isl_error"])
    return oset, doc


def load_synth_config(path) -> OptimizerConfig:
    """Parse a synth config document into an OptimizerConfig (unknown keys
    rejected, omitted keys take the defaults)."""
    with open(path) as handle:
        doc = json.load(handle)
    _check_header(doc, CONFIG_FORMAT, CONFIG_VERSION, "synth config")
    from dataclasses import fields as dc_fields

    allowed = {f.name for f in dc_fields(OptimizerConfig)} | {"format", "version"}
    _require_keys(doc, allowed, {"format", "version"}, "synth config")
    kwargs = {k: v for k, v in doc.items() if k not in ("format", "version")}
    try:
        return OptimizerConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synth config: {exc}") from exc


_SCENE_KEYS = {
    "format",
    "version",
    "gates",
    "pri_s",
    "carrier_wavelength_m",
    "noise_power",
    "first_trip",
    "second_trip",
    "label",
}
_SCATTERER_KEYS = {"gate", "reflectivity_re", "reflectivity_im", "velocity_mps"}


def _parse_scatterers(entries, what: str):
    out = []
    for entry in entries:
        _require_keys(entry, _SCATTERER_KEYS, _SCATTERER_KEYS, what)
        out.append(
            Scatterer(
                gate=int(entry["gate"]),
                reflectivity=complex(
                    float(entry["reflectivity_re"]), float(entry["reflectivity_im"])
                ),
                velocity=float(entry["velocity_mps"]),
            )
        )
    return tuple(out)


def load_scene(path) -> TripScene:
    with open(path) as handle:
        doc = json.load(handle)
    _check_header(doc, SCENE_FORMAT, SCENE_VERSION, "scene file")
    required = _SCENE_KEYS - {"label"}
    _require_keys(doc, _SCENE_KEYS, required, "scene file")
    try:
        return TripScene(
            gates=int(doc["gates"]),
            first_trip=_parse_scatterers(doc["first_trip"], "first_trip scatterer"),
            second_trip=_parse_scatterers(doc["second_trip"], "second_trip scatterer"),
            noise_power=float(doc["noise_power"]),
            pri=float(doc["pri_s"]),
            carrier_wavelength=float(doc["carrier_wavelength_m"]),
        )
    except ValueError as exc:
        raise ConfigError(f"scene file: {exc}") from exc


def bundled_scene_path(name: str) -> Path:
    """Path of a scene shipped with the package (e.g. 'fig4_analog')."""
    resource = importlib.resources.files("orthopulse") / "scenes" / f"{name}.json"
    with importlib.resources.as_file(resource) as concrete:
        return Path(concrete)


def write_csv(path, header, rows):
    """CSV with a header row naming columns and units; atomic."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "."))
