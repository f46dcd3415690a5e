"""Batch analysis: configuration, outcome construction, subgroups, and reports.

A report is a directory of deterministic CSV/JSON files. Identical inputs
and configuration give byte-identical files: no timestamps, sorted keys,
fixed numeric formatting, and a manifest that is enough to rerun.
"""

import contextlib
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .adjust import SVT_CONSTANT, adjusted_overlap_bounds
from .bounds import (IndicatorSpectra, MAX_CELL_SUPPORT, binary_disruption, dpo_bounds, dte_curve,
                     frechet_hoeffding, mean_difference, pair_count_factor, pmf_cell_bounds)
from .exceptions import NetworkValidationError, NumericalError
from .netmat import FORMATS, Network, format_number, load_network, symmetrize_bipartite
from .oracle import sharp_destroyed_created
from .ste import disruption_lower_bound, ste_field

MAX_REPORT_ORACLE_N = 8
MAX_DTE_GRID = 201
KDE_POINTS = 512
MAX_KDE_SAMPLES = 100_000


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

@dataclass
class NetworkInput:
    path: str
    format: str = "edge_list"
    labels: Optional[str] = None
    pre_path: Optional[str] = None
    pre_format: Optional[str] = None


@dataclass
class AnalysisConfig:
    arm1: NetworkInput
    arm0: NetworkInput
    outcome: str = "levels"
    diagonal: str = "zero"
    attributes: Optional[str] = None
    subgroups: list = field(default_factory=lambda: [{"name": "all", "expr": "all"}])
    adjust: str = "none"
    adjust_variant: str = "rowmean"
    denoise: Optional[object] = None
    svt_constant: float = SVT_CONSTANT
    dte_grid: Optional[list] = None
    histogram_bins: int = 40
    oracle: bool = True

    def validate(self):
        if self.outcome not in ("levels", "did"):
            raise NetworkValidationError(f"outcome must be 'levels' or 'did', got {self.outcome!r}")
        for name, arm in (("arm1", self.arm1), ("arm0", self.arm0)):
            for p in (arm.path, arm.labels, arm.pre_path):
                if p is not None and not Path(p).is_file():
                    raise NetworkValidationError(f"{name}: file not found: {p}")
            if arm.format not in FORMATS:
                raise NetworkValidationError(f"{name}: unknown format {arm.format!r}")
            if self.outcome == "did" and arm.pre_path is None:
                raise NetworkValidationError(f"{name}: DiD outcomes need a pre-period network (pre_path)")
        if self.attributes is not None and not Path(self.attributes).is_file():
            raise NetworkValidationError(f"attribute file not found: {self.attributes}")
        if self.adjust not in ("none", "reduction"):
            raise NetworkValidationError(f"adjust must be 'none' or 'reduction', got {self.adjust!r}")
        if self.denoise is not None and self.denoise != "auto":
            tau = float(self.denoise)
            if not tau > 0:
                raise NetworkValidationError(f"SVT threshold must be positive, got {tau}")
        names = [g["name"] for g in self.subgroups]
        if len(set(names)) != len(names):
            raise NetworkValidationError("subgroup names must be unique")
        for g in self.subgroups:
            if g["expr"] != "all" and self.attributes is None:
                raise NetworkValidationError(f"subgroup {g['name']!r} needs an attribute file")
        return self

    def to_dict(self):
        return asdict(self)


def _resolve(base: Path, p):
    if p is None:
        return None
    q = Path(p)
    return str(q if q.is_absolute() else (base / q).resolve())


def _arm_from_dict(d, base):
    if not isinstance(d, dict) or "path" not in d:
        raise NetworkValidationError("each arm needs at least a 'path'")
    return NetworkInput(path=_resolve(base, d["path"]), format=d.get("format", "edge_list"),
                        labels=_resolve(base, d.get("labels")), pre_path=_resolve(base, d.get("pre_path")),
                        pre_format=d.get("pre_format"))


def config_from_dict(d: dict, base_dir=".") -> AnalysisConfig:
    """Build a config; relative paths are resolved against ``base_dir``."""
    base = Path(base_dir).resolve()
    known = {"arm1", "arm0", "outcome", "diagonal", "attributes", "subgroups", "adjust", "adjust_variant",
             "denoise", "svt_constant", "dte_grid", "histogram_bins", "oracle"}
    unknown = set(d) - known
    if unknown:
        raise NetworkValidationError(f"unknown config keys: {sorted(unknown)}")
    if "arm1" not in d or "arm0" not in d:
        raise NetworkValidationError("config needs 'arm1' and 'arm0' sections")
    subgroups = d.get("subgroups") or [{"name": "all", "expr": "all"}]
    subgroups = [{"name": str(g["name"]), "expr": str(g.get("expr", "all"))} for g in subgroups]
    denoise = d.get("denoise")
    if isinstance(denoise, str) and denoise.lower() in ("none", ""):
        denoise = None
    cfg = AnalysisConfig(
        arm1=_arm_from_dict(d["arm1"], base), arm0=_arm_from_dict(d["arm0"], base),
        outcome=d.get("outcome", "levels"), diagonal=d.get("diagonal", "zero"),
        attributes=_resolve(base, d.get("attributes")), subgroups=subgroups,
        adjust=d.get("adjust", "none"), adjust_variant=d.get("adjust_variant", "rowmean"),
        denoise=denoise, svt_constant=float(d.get("svt_constant", SVT_CONSTANT)),
        dte_grid=None if d.get("dte_grid") is None else [float(x) for x in d["dte_grid"]],
        histogram_bins=int(d.get("histogram_bins", 40)), oracle=bool(d.get("oracle", True)))
    return cfg.validate()


def load_config(path) -> AnalysisConfig:
    """Read a YAML (or JSON) config file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise NetworkValidationError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise NetworkValidationError(f"config {path} must be a mapping")
    return config_from_dict(data, path.parent)


def load_manifest(path) -> AnalysisConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "config" not in data:
        raise NetworkValidationError(f"{path} is not a report manifest")
    return config_from_dict(data["config"], Path(path).parent)


# ----------------------------------------------------------------------------
# outcomes and subgroups
# ----------------------------------------------------------------------------

def build_did_outcome(post: Network, pre: Network) -> Network:
    """Cellwise ``post - pre`` after aligning ``pre`` to ``post``'s label order."""
    if set(post.labels) != set(pre.labels):
        diff = sorted(set(post.labels) ^ set(pre.labels))
        raise NetworkValidationError(f"pre/post label sets differ: {diff[:10]}")
    index = {lab: i for i, lab in enumerate(pre.labels)}
    order = [index[lab] for lab in post.labels]
    pre = pre.permuted(order)
    mask = post.mask | pre.mask
    return post.with_values(post.filled(0.0) - pre.filled(0.0), mask=mask)


def read_attributes(path) -> dict:
    """CSV with a ``label`` column and one column per attribute."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "label" not in reader.fieldnames:
            raise NetworkValidationError(f"attribute file {path} needs a 'label' column")
        return {row["label"].strip(): {k: (v or "").strip() for k, v in row.items() if k != "label"}
                for row in reader}


def _selector(net, attrs, term):
    term = term.strip()
    if "=" not in term:
        raise NetworkValidationError(f"subgroup term {term!r} must look like attr=value[|value]")
    key, vals = term.split("=", 1)
    key = key.strip()
    allowed = {v.strip() for v in vals.split("|")}
    idx = []
    for i, lab in enumerate(net.labels):
        if lab not in attrs or key not in attrs[lab]:
            raise NetworkValidationError(f"agent {lab!r} has no attribute {key!r}")
        if attrs[lab][key] in allowed:
            idx.append(i)
    if not idx:
        raise NetworkValidationError(f"subgroup term {term!r} selects no agents")
    return np.array(idx)


def subset_by_group(net: Network, attrs: dict, expr: str) -> Network:
    """Induced subnetwork for ``attr=value[|value]``, or ``all``.

    ``A x B`` selects the dyads between two disjoint agent sets and returns
    them as a symmetrized bipartite network.
    """
    expr = expr.strip()
    if expr == "all":
        return net
    if " x " in expr:
        left, right = expr.split(" x ", 1)
        ri, ci = _selector(net, attrs, left), _selector(net, attrs, right)
        if set(ri) & set(ci):
            raise NetworkValidationError(f"cross-group sides of {expr!r} overlap")
        B = net.values[np.ix_(ri, ci)]
        return symmetrize_bipartite([net.labels[i] for i in ri], [net.labels[i] for i in ci], B, group=net.group)
    idx = _selector(net, attrs, expr)
    if idx.size < 2:
        raise NetworkValidationError(f"subgroup {expr!r} selects fewer than 2 agents")
    return Network(labels=tuple(net.labels[i] for i in idx), values=net.values[np.ix_(idx, idx)],
                   mask=net.mask[np.ix_(idx, idx)], group=net.group, diagonal_policy=net.diagonal_policy)


# ----------------------------------------------------------------------------
# report helpers
# ----------------------------------------------------------------------------

@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except (NetworkValidationError, NumericalError) as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _load_arm(arm: NetworkInput, cfg: AnalysisConfig, group: int) -> Network:
    net = load_network(arm.path, arm.format, labels_path=arm.labels, diagonal=cfg.diagonal, group=group)
    if cfg.outcome == "did":
        pre = load_network(arm.pre_path, arm.pre_format or arm.format, labels_path=arm.labels,
                           diagonal=cfg.diagonal, group=group)
        net = build_did_outcome(net, pre)
    return net


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_ready(x):
    if isinstance(x, dict):
        return {str(k): _json_ready(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_ready(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _json_ready(x.tolist())
    return x


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_ready(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def silverman_kde(samples, points=KDE_POINTS) -> dict:
    """Gaussian kernel density with Silverman's rule-of-thumb bandwidth."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size > MAX_KDE_SAMPLES:
        # Evenly spaced order statistics keep the result deterministic.
        x = x[np.linspace(0, x.size - 1, MAX_KDE_SAMPLES).round().astype(np.int64)]
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        return {"degenerate": True, "points": [float(x[0])], "density": None, "bandwidth": 0.0}
    h = 0.9 * spread * x.size ** -0.2
    grid = np.linspace(x[0] - 3 * h, x[-1] + 3 * h, points)
    dens = np.empty(points)
    for start in range(0, points, 64):
        z = (grid[start:start + 64, None] - x[None, :]) / h
        dens[start:start + 64] = np.exp(-0.5 * z * z).sum(axis=1)
    dens /= x.size * h * math.sqrt(2 * math.pi)
    return {"degenerate": False, "points": grid, "density": dens, "bandwidth": h}


def default_dte_grid(net1: Network, net0: Network) -> np.ndarray:
    diffs = np.unique(np.subtract.outer(net1.support(), net0.support()))
    if diffs.size > MAX_DTE_GRID:
        diffs = np.unique(np.quantile(diffs, np.linspace(0, 1, MAX_DTE_GRID)))
    return diffs


def _denoise_arg(cfg):
    if cfg.denoise is None:
        return None
    if cfg.denoise == "auto":
        return "auto" if cfg.svt_constant == SVT_CONSTANT else ("auto", cfg.svt_constant)
    return float(cfg.denoise)


def analyze_pair(net1: Network, net0: Network, cfg: AnalysisConfig) -> dict:
    """Every report quantity for one pair of arms; files are written by the caller."""
    denoise = _denoise_arg(cfg)
    out = {"n1": net1.n, "n0": net0.n}
    with _stage("baselines"):
        out["mean_difference"] = mean_difference(net1, net0)
        out["disruption_lower_bound"] = disruption_lower_bound(net1, net0)
    supp1, supp0 = net1.support(), net0.support()
    if len(supp1) <= MAX_CELL_SUPPORT and len(supp0) <= MAX_CELL_SUPPORT:
        with _stage("cell bounds"):
            out["cells"] = pmf_cell_bounds(net1, net0, adjust=cfg.adjust if cfg.adjust != "none" else None,
                                           denoise=denoise)
        fh = []
        for a in supp1:
            for b in supp0:
                iv = frechet_hoeffding(net1, net0, a, b)
                fh.append(iv.to_dict(y1=float(a), y0=float(b)))
        out["frechet_hoeffding"] = fh
    with _stage("dte"):
        grid = np.asarray(cfg.dte_grid) if cfg.dte_grid is not None else default_dte_grid(net1, net0)
        out["dte"] = dte_curve(net1, net0, grid, denoise=denoise)
    with _stage("ste"):
        for basis in ("treated", "untreated"):
            f = ste_field(net1, net0, basis)
            out[f"ste_{basis}"] = {"l2_squared": f.l2_squared(), "degenerate": f.degenerate,
                                   "histogram": f.histogram(cfg.histogram_bins), "kde": silverman_kde(f.values)}
    if net1.is_binary() and net0.is_binary():
        with _stage("binary disruption"):
            spectra = (IndicatorSpectra(net1, denoise), IndicatorSpectra(net0, denoise))
            factor = pair_count_factor(net0)
            overlap = {"eigenvalue": dpo_bounds(net1, net0, 0.0, 0.0, spectra=spectra),
                       "frechet_hoeffding": frechet_hoeffding(net1, net0, 0.0, 0.0)}
            if cfg.adjust == "reduction":
                overlap["reduction"] = adjusted_overlap_bounds(net1, net0, 0.0, 0.0, variant=cfg.adjust_variant,
                                                               denoise=denoise, spectra=spectra)
            summary = {}
            for key, iv in overlap.items():
                d, c = binary_disruption(net1, net0, iv)
                summary[key] = {"destroyed_fraction": d.to_dict(), "created_fraction": c.to_dict(),
                                "destroyed_pairs": d.scaled(factor).to_dict(),
                                "created_pairs": c.scaled(factor).to_dict()}
            out["binary_disruption"] = summary
        if cfg.oracle and net1.n == net0.n and net1.n <= MAX_REPORT_ORACLE_N and not net1.has_mask:
            with _stage("oracle"):
                d, c = sharp_destroyed_created(net1, net0)
                out["oracle"] = {"destroyed": d.to_dict(), "created": c.to_dict()}
    return out


def run_report(config: AnalysisConfig, out_dir) -> dict:
    """Write the full report bundle for ``config`` into ``out_dir``.

    Returns the manifest dictionary. Files per subgroup ``g``:
    ``cells_g.csv`` (when outcomes are discrete), ``dte_g.csv``,
    ``ste_g.json``, and ``summary_g.json``.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("ingest"):
        net1 = _load_arm(config.arm1, config, group=1)
        net0 = _load_arm(config.arm0, config, group=0)
        attrs = read_attributes(config.attributes) if config.attributes else {}
    files = []
    for g in config.subgroups:
        name = g["name"]
        with _stage(f"subgroup {name}"):
            s1 = subset_by_group(net1, attrs, g["expr"])
            s0 = subset_by_group(net0, attrs, g["expr"])
            res = analyze_pair(s1, s0, config)
        if "cells" in res:
            fn = f"cells_{name}.csv"
            res["cells"].to_csv(out / fn)
            files.append(fn)
        fn = f"dte_{name}.csv"
        with open(out / fn, "w", encoding="utf-8", newline="") as fh:
            fh.write("y,lower,upper\n")
            for y, lo, hi in res["dte"].rows():
                fh.write(f"{format_number(y)},{format_number(lo)},{format_number(hi)}\n")
        files.append(fn)
        fn = f"ste_{name}.json"
        _write_json(out / fn, {"treated": res["ste_treated"], "untreated": res["ste_untreated"]})
        files.append(fn)
        summary = {k: v for k, v in res.items() if k not in ("cells", "dte", "ste_treated", "ste_untreated")}
        summary["subgroup"] = g
        fn = f"summary_{name}.json"
        _write_json(out / fn, summary)
        files.append(fn)

    inputs = {}
    for arm_name, arm in (("arm1", config.arm1), ("arm0", config.arm0)):
        for key in ("path", "labels", "pre_path"):
            p = getattr(arm, key)
            if p is not None:
                inputs[f"{arm_name}.{key}"] = _sha256(p)
    if config.attributes:
        inputs["attributes"] = _sha256(config.attributes)
    import numba
    import scipy
    manifest = {"config": config.to_dict(), "input_sha256": inputs, "files": sorted(files),
                "versions": {"netdisrupt": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "numba": numba.__version__}}
    _write_json(out / "manifest.json", manifest)
    return manifest
