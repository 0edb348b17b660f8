"""Experiment orchestration: configs, per-regime pipeline, suites and artifacts.

A regime run has five stages, each cached on disk under a hash of the
configuration that determines it, so an interrupted suite resumes where it
stopped:

1. ``rescale``   long-run mean/std of the uncoupled unrescaled models
2. ``full``      full two-scale model: slow statistics and fast reference
3. ``calibrate`` fast limiting system: response operators
4. ``closures``  reduced and zero-order models: slow statistics
5. ``report``    L2 errors and plot-ready curve files
"""
import copy
import hashlib
import json
import logging
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .calibrate import CalibrationData, ReferenceAccumulator, ReferenceStats, calibrate_operators
from .calibrate import calibrate_rescaling
from .closure import ClosureSystem
from .errors import (ChecksumError, ConfigConflictError, ConfigError, FdtClosureError,
                     FormatVersionError, StageError)
from .integrate import FullSystem, IntegrationPlan, record, sample_blocks
from .model import ModelParams
from .stats import StatisticsSummary, l2_distance, slow_statistics

log = logging.getLogger(__name__)

STUDIED_REGIMES = [
    (0.0, 0.8, 0.0, 0.0), (0.0, -0.8, 0.0, 0.0),
    (0.0, 0.0, 0.3, 0.0), (0.0, 0.0, -0.3, 0.0),
    (0.0, 0.0, 0.0, 0.3), (0.0, 0.0, 0.0, -0.3),
    (1.0, 0.8, 0.3, 0.3), (1.0, -0.8, -0.3, -0.3),
]
CI_REGIMES = [(0.0, 0.8, 0.0, 0.0), (0.0, 0.0, 0.0, -0.3), (1.0, -0.8, -0.3, -0.3)]

STATISTICS = ("pdf", "acf", "ccf", "kcf")
STAT_LABELS = {"pdf": "PDF", "acf": "Corr", "ccf": "C-corr", "kcf": "K-corr"}
MODELS = ("reduced", "zero_order")

DEFAULTS = {
    "profile": "desk",
    "seed": 0,
    "regime": [0.0, 0.0, 0.0, 0.0],
    "regimes": None,
    "out": "runs",
    "model": {"N_x": 20, "J": 4, "eps": 0.01, "F_x": 6.0, "F_y": 12.0,
              "lambda_x": 0.3, "lambda_y": 0.3},
    "rescale": {"xbar": None, "beta_x": None, "ybar": None, "beta_y": None,
                "plan": {"dt": 0.005, "t_burn": 100.0, "t_total": 20000.0, "sample_stride": 10}},
    "plans": {
        "full": {"dt": 5e-5, "t_burn": 100.0, "t_total": 10000.0, "sample_stride": 1000},
        "fast": {"dt": 5e-3, "t_burn": 100.0, "t_total": 10000.0, "sample_stride": 10},
        "closure": {"dt": 5e-3, "t_burn": 100.0, "t_total": 10000.0, "sample_stride": 10},
    },
    "calibration": {"reference": "limiting", "symmetrize": False, "eig_floor": 1e-8},
    "stats": {"pdf_lo": -5.0, "pdf_hi": 5.0, "pdf_bins": 200, "lag_step": 0.05,
              "lag_max": 50.0, "method": "fft"},
}

PROFILES = {
    "paper": {},
    "desk": {"plans": {"full": {"t_total": 2000.0}, "fast": {"t_total": 20000.0},
                       "closure": {"t_total": 2000.0}}},
}


# ---------------------------------------------------------------- config

def _merge(base, over, path=""):
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{where}' must be a mapping")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val
    return base


def _set_path(d, dotted, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def canonical_hash(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def regime_label(coupling):
    return "_".join(f"{v:g}" for v in coupling)


def parse_regime(text):
    """``"0,0.8,0,0"`` -> ``(0.0, 0.8, 0.0, 0.0)``."""
    try:
        vals = tuple(float(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse regime {text!r}") from exc
    if len(vals) != 4:
        raise ConfigError(f"regime needs four values a,b,c,d, got {text!r}")
    return vals


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings for one regime."""

    data: dict

    @classmethod
    def resolve(cls, file_data=None, profile=None, overrides=None):
        """Defaults, then profile, then config file, then ``overrides``.

        ``overrides`` maps dotted keys (``"plans.full.t_total"``) to values.
        """
        data = copy.deepcopy(DEFAULTS)
        file_data = copy.deepcopy(file_data or {})
        if not isinstance(file_data, dict):
            raise ConfigError("config file must contain a mapping")
        prof = profile or file_data.get("profile") or data["profile"]
        if prof not in PROFILES:
            raise ConfigError(f"unknown profile {prof!r}; choose from {sorted(PROFILES)}")
        _merge(data, copy.deepcopy(PROFILES[prof]))
        _merge(data, file_data)
        nested = {}
        for key, val in (overrides or {}).items():
            _set_path(nested, key, val)
        _merge(data, nested)
        data["profile"] = prof
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, profile=None, overrides=None):
        try:
            raw = yaml.safe_load(Path(path).read_text()) if path else {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.resolve(raw or {}, profile, overrides)

    def validate(self):
        d = self.data
        reg = d["regime"]
        d["regime"] = list(parse_regime(reg if isinstance(reg, str)
                                        else ",".join(str(v) for v in reg)))
        if d["regimes"] is not None:
            d["regimes"] = [list(parse_regime(r if isinstance(r, str)
                                              else ",".join(str(v) for v in r)))
                            for r in d["regimes"]]
        try:
            d["seed"] = int(d["seed"])
            for name in ("full", "fast", "closure"):
                self.plan(name)
            IntegrationPlan(**d["rescale"]["plan"])
            self.model_params((1.0, 1.0, 1.0, 1.0) if self.rescale_given is None
                              else self.rescale_given)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if d["calibration"]["reference"] not in ("limiting", "full"):
            raise ConfigError("calibration.reference must be 'limiting' or 'full'")
        if d["stats"]["method"] not in ("fft", "direct"):
            raise ConfigError("stats.method must be 'fft' or 'direct'")
        for name in ("full", "closure"):
            plan = self.plan(name)
            ratio = d["stats"]["lag_step"] / plan.sample_dt
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError(f"plans.{name} sampling does not divide the lag step")

    @property
    def coupling(self):
        return tuple(float(v) for v in self.data["regime"])

    @property
    def label(self):
        return regime_label(self.coupling)

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def out_dir(self):
        return Path(self.data["out"]) / self.label

    @property
    def rescale_given(self):
        r = self.data["rescale"]
        vals = [r[k] for k in ("xbar", "beta_x", "ybar", "beta_y")]
        if all(v is not None for v in vals):
            return tuple(float(v) for v in vals)
        if any(v is not None for v in vals):
            raise ConfigError("give all four rescale constants or none")
        return None

    def plan(self, name, seed_offset=None):
        offsets = {"full": 0, "fast": 1, "closure": 2}
        seed = self.seed + (offsets[name] if seed_offset is None else seed_offset)
        return IntegrationPlan(seed=seed, **self.data["plans"][name])

    def model_params(self, rescale):
        m = self.data["model"]
        a, b, c, d = self.coupling
        xbar, bx, ybar, by = rescale
        return ModelParams(N_x=int(m["N_x"]), J=int(m["J"]), eps=m["eps"], F_x=m["F_x"],
                           F_y=m["F_y"], lambda_x=m["lambda_x"], lambda_y=m["lambda_y"],
                           a=a, b=b, c=c, d=d, xbar=xbar, beta_x=bx, ybar=ybar, beta_y=by)

    def stats_kwargs(self):
        s = self.data["stats"]
        return {"bin_edges": np.linspace(s["pdf_lo"], s["pdf_hi"], int(s["pdf_bins"]) + 1),
                "s_max": float(s["lag_max"]), "ds": float(s["lag_step"]), "method": s["method"]}

    # stage keys: everything that determines a stage's output
    def stage_key(self, stage, rescale=None):
        d = self.data
        base = {"model": d["model"], "regime": d["regime"], "rescale": rescale}
        if stage == "full":
            return {**base, "plan": self.plan("full").to_dict(), "stats": d["stats"]}
        if stage == "calibrate":
            return {**base, "full": self.plan("full").to_dict(),
                    "plan": self.plan("fast").to_dict(), "calibration": d["calibration"],
                    "lags": [d["stats"]["lag_step"], d["stats"]["lag_max"]]}
        if stage == "closures":
            return {"calibration": self.stage_key("calibrate", rescale),
                    "plan": self.plan("closure").to_dict(), "stats": d["stats"]}
        raise KeyError(stage)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def write_resolved(self, path, rescale=None):
        data = self.to_dict()
        if rescale is not None:
            data["rescale"].update(dict(zip(("xbar", "beta_x", "ybar", "beta_y"), rescale)))
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")
        return path


# ---------------------------------------------------------------- calibration archive

MAGIC = b"FDTCAL\x00\x00"
FORMAT_VERSION = "1.0"


def save_calibration(cal, path, config):
    """Write ``cal`` to a self-describing binary archive.

    Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
    header (format version, embedded config, array table, metadata), raw
    little-endian float64 arrays in C order, and a 32-byte SHA-256 of all
    preceding bytes.
    """
    arrays = []
    payload = []
    offset = 0
    for name in CalibrationData.ARRAYS:
        arr = np.ascontiguousarray(getattr(cal, name), dtype="<f8")
        arrays.append({"name": name, "shape": list(arr.shape), "offset": offset,
                       "nbytes": arr.nbytes})
        payload.append(arr.tobytes())
        offset += arr.nbytes
    header = {"format": "fdtclosure-calibration", "version": FORMAT_VERSION,
              "config": config, "rescale": [float(v) for v in cal.rescale],
              "arrays": arrays, "meta": cal.meta}
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(payload)
    digest = hashlib.sha256(body).digest()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + digest)
    os.replace(tmp, path)
    return path


def _config_conflicts(stored, expected, prefix=""):
    out = []
    for key in sorted(set(stored) | set(expected)):
        a, b = stored.get(key), expected.get(key)
        if isinstance(a, dict) and isinstance(b, dict):
            out += _config_conflicts(a, b, f"{prefix}{key}.")
        elif a != b:
            out.append(f"{prefix}{key}: stored={a!r} requested={b!r}")
    return out


def load_calibration(path, expected_config=None):
    """Read an archive written by :func:`save_calibration`.

    Raises
    ------
    ChecksumError
        Truncated or corrupted file.
    FormatVersionError
        Not a calibration archive or an unsupported version.
    ConfigConflictError
        ``expected_config`` differs from the embedded config.
    """
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 + 32:
        raise ChecksumError(f"{path}: file too short")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    if body[:len(MAGIC)] != MAGIC:
        raise FormatVersionError(f"{path}: not a calibration archive")
    (hlen,) = struct.unpack("<Q", body[len(MAGIC):len(MAGIC) + 8])
    start = len(MAGIC) + 8
    header = json.loads(body[start:start + hlen].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: unsupported format version {header.get('version')!r}")
    if expected_config is not None:
        diffs = _config_conflicts(header["config"], json.loads(json.dumps(expected_config)))
        if diffs:
            raise ConfigConflictError(f"{path} was produced by a different config: "
                                      + "; ".join(diffs[:5]))
    data0 = start + hlen
    arrays = {}
    for entry in header["arrays"]:
        lo = data0 + entry["offset"]
        buf = body[lo:lo + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(entry["shape"]).copy()
    return CalibrationData(rescale=tuple(header["rescale"]), meta=header["meta"], **arrays)


# ---------------------------------------------------------------- stage cache

def _stage_done(directory, key):
    marker = Path(directory) / "stage.json"
    if not marker.exists():
        return None
    try:
        info = json.loads(marker.read_text())
    except json.JSONDecodeError:
        return None
    return info if info.get("key") == canonical_hash(key) else None


def _mark_stage(directory, key, **info):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    info["key"] = canonical_hash(key)
    (directory / "stage.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


# ---------------------------------------------------------------- pipeline

def resolve_rescaling(cfg, cache_dir=None):
    """Rescaling constants from the config or from (cached) long runs."""
    given = cfg.rescale_given
    if given is not None:
        return given
    m = cfg.data["model"]
    plan_d = cfg.data["rescale"]["plan"]
    cache_dir = Path(cache_dir or Path(cfg.data["out"]) / "rescale_cache")
    out = []
    for F, N, seed in ((m["F_x"], m["N_x"], cfg.seed), (m["F_y"], m["N_x"] * m["J"], cfg.seed + 7)):
        key = {"F": float(F), "N": int(N), "plan": plan_d, "seed": seed}
        path = cache_dir / f"F{F:g}_N{N}_{canonical_hash(key)}.json"
        if path.exists():
            mean, std = json.loads(path.read_text())["value"]
        else:
            plan = IntegrationPlan(seed=seed, **plan_d)
            mean, std = calibrate_rescaling(float(F), int(N), plan)
            cache_dir.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps({"key": key, "value": [mean, std]}, indent=2))
            os.replace(tmp, path)
        out += [mean, std]
    return tuple(out)


def run_full_model(p, plan, n_x=None, context="full model"):
    """Slow samples and reference fast statistics from one full-model run."""
    system = FullSystem(p)
    rng = np.random.default_rng(plan.seed)
    u0 = rng.uniform(-0.5, 0.5, p.N_x + p.N_y)
    acc = ReferenceAccumulator(p)
    slow = np.empty((plan.n_samples, p.N_x))
    k = 0
    for blk in sample_blocks(system, u0, plan, context=context):
        acc.update(blk)
        slow[k:k + len(blk)] = blk[:, :p.N_x]
        k += len(blk)
    return slow, acc.finalize()


def run_closure(kind, cal, p, plan):
    system = ClosureSystem(kind, cal, p)
    x0 = np.random.default_rng(plan.seed).uniform(-0.5, 0.5, p.N_x)
    samples = record(system, x0, plan, context=f"{system.name} closure")
    return samples, system.clamps


def _save_reference(path, ref):
    np.savez(path, zbar_star=ref.zbar_star, sigma_star=ref.sigma_star, h_star=ref.h_star,
             Hdiag_star=ref.Hdiag_star, x_mean=ref.x_mean, n_samples=ref.n_samples)


def _load_reference(path):
    with np.load(path) as z:
        return ReferenceStats(z["zbar_star"], z["sigma_star"], z["h_star"], z["Hdiag_star"],
                              z["x_mean"], int(z["n_samples"]))


@dataclass
class RegimeReport:
    label: str
    coupling: tuple
    errors: dict
    errors_rms: dict
    curve_files: dict
    runtimes: dict
    diagnostics: dict
    stats: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"label": self.label, "coupling": list(self.coupling), "errors": self.errors,
                "errors_rms": self.errors_rms, "curve_files": self.curve_files,
                "runtimes": self.runtimes, "diagnostics": self.diagnostics}

    def ordering(self):
        """``{stat: reduced < zero_order}``."""
        return {s: self.errors["reduced"][s] < self.errors["zero_order"][s] for s in STATISTICS}


def _grid_length(curve):
    g = curve.bin_edges if hasattr(curve, "bin_edges") else curve.lags
    return float(g[-1] - g[0])


def compare_statistics(full, reduced, zero_order):
    """L2 errors against the full model, plus their interval-normalized form."""
    errors, rms = {}, {}
    for name, summ in (("reduced", reduced), ("zero_order", zero_order)):
        errors[name], rms[name] = {}, {}
        for stat in STATISTICS:
            ref = full.curves()[stat]
            val = l2_distance(ref, summ.curves()[stat])
            errors[name][stat] = val
            rms[name][stat] = val / np.sqrt(_grid_length(ref))
    return errors, rms


def calibrate_regime(cfg, force=False):
    """Stages 1-3: rescaling, full model and response operators.

    Returns ``(p, rescale, full_stats, cal, runtimes)``; cached stages whose
    configuration is unchanged are loaded instead of recomputed.
    """
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    runtimes = {}

    t0 = time.perf_counter()
    rescale = _stage("rescale", resolve_rescaling, cfg)
    runtimes["rescale"] = time.perf_counter() - t0
    cfg.write_resolved(out / "resolved_config.yaml", rescale)
    p = cfg.model_params(rescale)
    skw = cfg.stats_kwargs()

    # full model
    fdir = out / "full"
    key = cfg.stage_key("full", rescale)
    info = None if force else _stage_done(fdir, key)
    if info is None:
        t0 = time.perf_counter()
        plan = cfg.plan("full")
        slow, ref = _stage("full", run_full_model, p, plan)
        full_stats = _stage("full", slow_statistics, slow, plan.sample_dt, **skw)
        full_stats.to_files(fdir)
        _save_reference(fdir / "reference.npz", ref)
        runtimes["full"] = time.perf_counter() - t0
        _mark_stage(fdir, key, runtime=runtimes["full"])
    else:
        runtimes["full"] = info["runtime"]
    full_stats = StatisticsSummary.from_files(fdir)
    ref = _load_reference(fdir / "reference.npz")

    # calibration
    cal_path = out / "calibration.fdtc"
    ckey = cfg.stage_key("calibrate", rescale)
    info = None if force else _stage_done(out / "calibrate", ckey)
    if info is None or not cal_path.exists():
        t0 = time.perf_counter()
        c = cfg.data["calibration"]
        cal = _stage("calibrate", calibrate_operators, p, ref, cfg.plan("fast"),
                     reference=c["reference"], symmetrize=bool(c["symmetrize"]),
                     s_max=skw["s_max"], ds=skw["ds"], eig_floor=float(c["eig_floor"]))
        save_calibration(cal, cal_path, ckey)
        runtimes["calibrate"] = time.perf_counter() - t0
        _mark_stage(out / "calibrate", ckey, runtime=runtimes["calibrate"])
    else:
        runtimes["calibrate"] = info["runtime"]
    cal = _stage("calibrate", load_calibration, cal_path, ckey)
    return p, rescale, full_stats, cal, runtimes


def run_regime(cfg, force=False):
    """Run the five-stage pipeline for one regime and return its report."""
    p, rescale, full_stats, cal, runtimes = calibrate_regime(cfg, force)
    out = cfg.out_dir
    skw = cfg.stats_kwargs()

    # closures
    summaries = {}
    diagnostics = {"clamps": {}, "calibration": cal.meta}
    lkey = cfg.stage_key("closures", rescale)
    for kind in MODELS:
        kdir = out / kind
        info = None if force else _stage_done(kdir, lkey)
        if info is None:
            t0 = time.perf_counter()
            plan = cfg.plan("closure")
            samples, clamps = _stage(kind, run_closure, kind, cal, p, plan)
            summ = _stage(kind, slow_statistics, samples, plan.sample_dt, **skw)
            summ.to_files(kdir)
            rt = time.perf_counter() - t0
            _mark_stage(kdir, lkey, runtime=rt, clamps=clamps)
            info = {"runtime": rt, "clamps": clamps}
        runtimes[kind] = info["runtime"]
        diagnostics["clamps"][kind] = info["clamps"]
        summaries[kind] = StatisticsSummary.from_files(kdir)

    errors, rms = compare_statistics(full_stats, summaries["reduced"], summaries["zero_order"])
    report = RegimeReport(cfg.label, cfg.coupling, errors, rms, {}, runtimes, diagnostics,
                          stats={"full": full_stats, **summaries})
    report.curve_files = _stage("report", emit_plot_data, report, out / "curves")
    body = report.to_dict()
    body.pop("runtimes")
    (out / "report.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    (out / "runtimes.json").write_text(json.dumps(runtimes, indent=2, sort_keys=True) + "\n")
    return report


def emit_plot_data(report, directory):
    """Four-column CSVs (grid, full, reduced, zero_order), one per statistic.

    Headers are ``x,full,reduced,zero_order`` for the PDF (bin centres) and
    ``s,full,reduced,zero_order`` for the lag curves.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for stat in STATISTICS:
        curves = [report.stats[m].curves()[stat] for m in ("full",) + MODELS]
        if stat == "pdf":
            grid, cols, head = curves[0].centers, [c.density for c in curves], "x"
        else:
            grid, cols, head = curves[0].lags, [c.values for c in curves], "s"
        path = directory / f"{stat}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{head},full,reduced,zero_order\n")
            for row in np.column_stack([grid] + cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        paths[stat] = str(path)
    return paths


# ---------------------------------------------------------------- suite

def _suite_worker(cfg_data):
    cfg = ExperimentConfig(cfg_data)
    try:
        return cfg.label, run_regime(cfg).to_dict(), None
    except FdtClosureError as exc:
        stage = getattr(exc, "stage", None)
        return cfg.label, None, {"stage": stage, "error": str(exc)}


def suite_configs(base, regimes=None):
    """One config per regime, sharing everything else with ``base``."""
    out = []
    for reg in regimes if regimes is not None else STUDIED_REGIMES:
        data = base.to_dict()
        data["regime"] = list(reg)
        out.append(ExperimentConfig(data))
    return out


def run_suite(configs, jobs=1, summary_dir=None):
    """Run regimes (in parallel when ``jobs > 1``) and write a combined summary.

    Failures are recorded per regime; the suite continues. Returns
    ``(reports, failures)`` keyed by regime label.
    """
    configs = list(configs)
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels) or len({str(c.out_dir) for c in configs}) != len(configs):
        raise ConfigError("suite regimes must have distinct labels and output directories")
    # resolve shared rescaling once so workers only read the cache
    if configs:
        _stage("rescale", resolve_rescaling, configs[0])
    results = []
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_suite_worker, [c.data for c in configs]))
    else:
        results = [_suite_worker(c.data) for c in configs]
    reports = {lab: rep for lab, rep, _ in results if rep is not None}
    failures = {lab: err for lab, _, err in results if err is not None}
    if summary_dir is None:
        summary_dir = Path(configs[0].data["out"]) if configs else None
    if summary_dir is not None:
        write_summary(reports, failures, summary_dir, order=labels)
    return reports, failures


def write_summary(reports, failures, directory, order=None):
    """``summary.json`` and ``summary.csv`` shaped like the error tables."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    order = order or sorted(set(reports) | set(failures))
    entries = []
    rows = ["regime,statistic,reduced,zero_order,reduced_rms,zero_order_rms,reduced_better"]
    for lab in order:
        if lab in reports:
            rep = reports[lab]
            entries.append({"label": lab, "coupling": rep["coupling"], "status": "ok",
                            "errors": rep["errors"], "errors_rms": rep["errors_rms"],
                            "clamps": rep["diagnostics"]["clamps"]})
            for s in STATISTICS:
                r, z = rep["errors"]["reduced"][s], rep["errors"]["zero_order"][s]
                rr, zr = rep["errors_rms"]["reduced"][s], rep["errors_rms"]["zero_order"][s]
                rows.append(f"{lab},{STAT_LABELS[s]},{r!r},{z!r},{rr!r},{zr!r},{int(r < z)}")
        elif lab in failures:
            entries.append({"label": lab, "status": "failed", **failures[lab]})
    summary = {"regimes": entries}
    (directory / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (directory / "summary.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    meta = {"written": time.strftime("%Y-%m-%dT%H:%M:%S"), "backend": kernels.BACKEND}
    (directory / "summary_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return summary


def format_summary(summary):
    """Plain-text tables, one block per regime."""
    lines = []
    for entry in summary["regimes"]:
        lines.append(f"(a,b,c,d) = ({entry['label'].replace('_', ',')})")
        if entry["status"] != "ok":
            lines.append(f"  FAILED in stage {entry.get('stage')}: {entry.get('error')}")
            continue
        lines.append(f"  {'':8s} {'Reduced':>12s} {'Zero-order':>12s}")
        for s in STATISTICS:
            r = entry["errors"]["reduced"][s]
            z = entry["errors"]["zero_order"][s]
            lines.append(f"  {STAT_LABELS[s]:8s} {r:12.4e} {z:12.4e}")
    return "\n".join(lines)
