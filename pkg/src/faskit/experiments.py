"""Declarative experiment specs and the runner that turns them into result tables."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import numpy as np

from . import __version__
from .channel import (
    PortGeometry,
    average_variance,
    build_block_model,
    build_corr_1d_jakes,
    build_corr_grid,
    identity_model,
    sample_eigen,
    sample_mimo,
)
from .estimation import (
    PathEstimate,
    PilotScene,
    SensingDictionary,
    l3scr_estimate,
    ls_estimate,
    nmse,
    observed_channel,
    omp_estimate,
    reconstruct_channel,
)
from .fama import (
    CumaConfig,
    QpskScenario,
    gdof,
    massive_mimo_rate,
    qpsk_network_rate,
    sfama_outage_curve,
)
from .montecarlo import Estimate, map_chunks, sample_estimate
from .numerics import RandomStream
from .selection import (
    LinkBudget,
    best_port_gain,
    calibrate_xi,
    diversity_spectrum,
    count_above,
    dmt_fas,
    dmt_tas,
    dual_gain,
    link_metrics,
    mrc_gain,
    siso_gain,
    tas_antenna_count,
)


class ConfigError(ValueError):
    """Invalid experiment description; the message starts with the field path."""


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class Sweep:
    name: str
    values: tuple


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: Mapping[str, Any]
    sweep: Sweep
    trials: int
    seed: int
    out: Optional[str] = None
    plot: Optional[str] = None
    axes: str = "linear"
    timing: bool = False

    def canonical(self) -> str:
        """Stable JSON text of everything that affects the numbers."""
        body = {
            "kind": self.kind, "params": dict(sorted(self.params.items())),
            "sweep": {"name": self.sweep.name, "values": list(self.sweep.values)},
            "trials": self.trials, "seed": self.seed, "timing": self.timing,
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


@dataclass
class Row:
    x: float
    metrics: dict[str, Estimate]
    trials: int
    wall_time_s: float = 0.0
    error: Optional[str] = None


@dataclass
class ResultTable:
    spec: ExperimentSpec
    metric_names: tuple[str, ...]
    rows: list[Row] = field(default_factory=list)
    ci_method: str = ""

    @property
    def metadata(self) -> dict[str, str]:
        return {
            "toolkit": f"faskit {__version__}",
            "kind": self.spec.kind,
            "spec_sha256": self.spec.digest(),
            "seed": str(self.spec.seed),
            "sweep": self.spec.sweep.name,
            "ci": self.ci_method,
        }

    @property
    def failed(self) -> bool:
        return any(r.error for r in self.rows)


# ----------------------------------------------------------------------------
# per-kind point functions


def _exact(v: float) -> Estimate:
    return Estimate(float(v), float(v), float(v), 0, 0.0)


def _from_se(value: float, se: float, n: int) -> Estimate:
    return Estimate(value, value - 1.96 * se, value + 1.96 * se, n, se)


def _fas_model(p):
    n = int(p["ports_per_axis"])
    if p["geometry"] == "linear":
        return build_corr_1d_jakes(n, float(p["W"]))
    if p["geometry"] == "planar":
        return build_corr_grid(PortGeometry.planar(n, n, float(p["W"]), float(p["W"])))
    raise ConfigError("params.geometry: must be 'linear' or 'planar'")


def _corr_spectrum(p, trials, seed, timing):
    model = _fas_model(p)
    k = int(p["index"])
    if not 0 <= k < model.n_ports:
        raise ConfigError("sweep.values: eigenvalue index out of range")
    out = {"eigenvalue": _exact(model.eig.lambdas[k])}
    if p["block"]:
        if p["geometry"] != "linear":
            raise ConfigError("params.block: block model needs the linear geometry")
        spec = build_block_model(model, mu2=float(p["mu2"])).spectrum()
        out["block_eigenvalue"] = _exact(spec[k])
    return out


def _avg_variance(p, trials, seed, timing):
    model = _fas_model(p)
    return {"avg_variance": _exact(average_variance(model, int(p["n_hat"])))}


_SCHEMES = ("siso", "tx", "dual", "mrc")


def _link_sampler(p):
    scheme = p["scheme"]
    if scheme not in _SCHEMES:
        raise ConfigError(f"params.scheme: must be one of {', '.join(_SCHEMES)}")
    if scheme == "siso":
        one = identity_model(1)
        return (lambda s, n: sample_eigen(one, s, size=n).values), siso_gain
    model = _fas_model(p)
    if scheme == "dual":
        return (lambda s, n: sample_mimo(model, model, s, size=n).values), dual_gain
    sel = mrc_gain if scheme == "mrc" else best_port_gain
    return (lambda s, n: sample_eigen(model, s, size=n).values), sel


def _link(p, trials, seed, timing):
    sampler, sel = _link_sampler(p)
    budget = LinkBudget(10.0 ** (float(p["snr_db"]) / 10.0), float(p["r_min"]), trials, seed)
    m = link_metrics(sampler, sel, budget)
    return {"outage": m.outage, "rate": m.rate, "power_db": m.power_db}


def _outage(p, trials, seed, timing):
    return {"outage": _link(p, trials, seed, timing)["outage"]}


def _rate(p, trials, seed, timing):
    m = _link(p, trials, seed, timing)
    return {"rate": m["rate"], "power_db": m["power_db"]}


def _dmt(p, trials, seed, timing):
    r = float(p["r"])
    if p["variant"] == "tas":
        curve = dmt_tas(int(p["n_tx"]), int(p["n_rx"]))
    elif p["variant"] == "fas":
        other = int(p["n_other"]) or None
        curve = dmt_fas(int(p["Np_tx"]), int(p["Np_rx"]), int(p["n_min"]), other)
    else:
        raise ConfigError("params.variant: must be 'fas' or 'tas'")
    return {"d": _exact(curve.at(r))}


def _diversity_table(p, trials, seed, timing):
    N = int(p["N"])
    xi = float(p["xi"])
    if xi <= 0:
        xi = calibrate_xi(float(p["calibration_W"]), N, int(p["calibration_target"]),
                          geometry=p["geometry"]).xi
    lam = diversity_spectrum(float(p["W"]), N, p["geometry"])
    n_eff = count_above(lam, xi)
    m_tas = tas_antenna_count(float(p["W"]), 0.5, 2 if p["geometry"] == "planar" else 1)
    return {"effective_ports": _exact(n_eff), "dual_diversity": _exact(n_eff * n_eff),
            "tas_antennas": _exact(m_tas), "xi": _exact(xi)}


def _estimate(p, trials, seed, timing):
    M, N, N_O, L = int(p["M"]), int(p["N"]), int(p["N_O"]), int(p["L"])
    tau, W, D = float(p["tau"]), float(p["W"]), int(p["D"])
    noise = 0.0 if p["snr_db"] is None else 10.0 ** (-float(p["snr_db"]) / 10.0)
    scene = PilotScene(M, N, N_O, tau, W, noise_var=noise)
    tx_dict = SensingDictionary(D, N_O, tau)
    rx_dict = SensingDictionary(D, M, 0.5)
    res = {"nmse_l3scr": [], "nmse_omp": [], "time_l3scr": [], "time_omp": []}
    for t in range(trials):
        stream = RandomStream(seed, t)
        rng = stream.substream(0).generator()
        g = rng.standard_normal((L, 2)) @ np.array([1.0, 1j]) / math.sqrt(2.0)
        aoa = rng.choice(D, L, replace=False) * math.pi / D
        aod = rng.choice(D, L, replace=False) * math.pi / D
        truth = PathEstimate(g, aoa, aod)
        H_obs = observed_channel(truth, scene)
        H_ls = ls_estimate(H_obs, scene, stream.substream(1))
        t0 = time.perf_counter()
        est = l3scr_estimate(H_ls, scene, tx_dict)
        t1 = time.perf_counter()
        omp = omp_estimate(H_ls, tx_dict, rx_dict)
        t2 = time.perf_counter()
        H_full = reconstruct_channel(truth, M, N, W)
        res["nmse_l3scr"].append(nmse(reconstruct_channel(est, M, N, W), H_full))
        res["nmse_omp"].append(nmse(reconstruct_channel(omp.paths, M, N, W), H_full))
        res["time_l3scr"].append(t1 - t0)
        res["time_omp"].append(t2 - t1)
    keys = list(res) if timing else ["nmse_l3scr", "nmse_omp"]
    return {k: sample_estimate(res[k]) for k in keys}


def _fama_outage(p, trials, seed, timing):
    gamma = 10.0 ** (float(p["gamma_th_db"]) / 10.0)
    est = sfama_outage_curve(float(p["W"]), int(p["N"]), [gamma], trials, seed,
                             int(p["users"]), float(p["power_ratio"]), p["model"])
    return {"outage": est[0]}


def _qpsk_geometry(p) -> PortGeometry:
    n, W = int(p["ports_per_axis"]), float(p["W"])
    if p["geometry"] == "planar":
        return PortGeometry.planar(n, n, W, W)
    if p["geometry"] == "linear":
        return PortGeometry.linear(n, W)
    raise ConfigError("params.geometry: must be 'linear' or 'planar'")


def _scenario(p, cuma: CumaConfig = CumaConfig()) -> QpskScenario:
    return QpskScenario(int(p["users"]), _qpsk_geometry(p), float(p["rice_factor"]),
                        int(p["n_paths"]), float(p["snr_db"]), int(p["symbols"]), cuma)


def _qpsk_rate(p, trials, seed, timing):
    if p["scheme"] not in ("sfama", "ffama"):
        raise ConfigError("params.scheme: must be 'sfama' or 'ffama'")
    r = qpsk_network_rate(_scenario(p), p["scheme"], trials, seed)
    return {"sum_rate": _from_se(r.sum_rate, r.sum_rate_se, trials)}


def _cuma(p, trials, seed, timing):
    n_max = int(p["n_max"]) or None
    cfg = CumaConfig(float(p["rho"]), n_max, int(p["n_rf"]))
    r = qpsk_network_rate(_scenario(p, cfg), "cuma", trials, seed)
    return {"sum_rate": _from_se(r.sum_rate, r.sum_rate_se, trials)}


def _precoding(p, trials, seed, timing):
    n = int(p["bs_per_axis"])
    side = (n - 1) * float(p["bs_spacing"])
    geom = PortGeometry.planar(n, n, side, side)
    args = (geom, int(p["users"]), float(p["rice_factor"]), int(p["n_paths"]),
            float(p["snr_db"]), trials, seed)
    mrt = massive_mimo_rate(*args, precoder="mrt")
    los = massive_mimo_rate(*args, precoder="los")
    return {"mrt": mrt.sum_rate, "los": los.sum_rate}


def _gdof(p, trials, seed, timing):
    N, W = int(p["N"]), float(p["W"])
    snr = 10.0 ** (float(p["snr_db"]) / 10.0)
    alpha = float(p["alpha"])
    cross = snr ** (alpha - 1.0)           # INR = SNR^alpha
    model = build_corr_1d_jakes(N, W) if N > 1 else identity_model(1)

    def chunk(stream: RandomStream, n: int):
        h = sample_eigen(model, stream, size=(n, 2, 2)).values
        G = np.abs(h) ** 2
        G[:, 0, 1] *= cross
        G[:, 1, 0] *= cross
        return np.array([[gdof(g, snr, 1.0, s).gdof for s in ("TIN", "ORTHO", "FAMA")]
                         for g in G])

    vals = np.concatenate(map_chunks(chunk, seed, trials, chunk=500), axis=0)
    return {name: sample_estimate(vals[:, i]) for i, name in enumerate(("tin", "ortho", "fama"))}


@dataclass(frozen=True)
class KindSchema:
    defaults: Mapping[str, Any]
    sweeps: tuple[str, ...]
    metrics: tuple[str, ...]
    run: Callable
    ci: str


_MC_PROB = "normal-approximation binomial 95%"
_MC_MEAN = "Student t 95% on the mean"
_EXACT = "exact (analytic, no interval)"

_LINK_DEFAULTS = {"scheme": "tx", "geometry": "planar", "ports_per_axis": 10, "W": 2.0,
                  "snr_db": 40.0, "r_min": 15.0}
_QPSK_DEFAULTS = {"users": 4, "geometry": "planar", "ports_per_axis": 15, "W": 13.0,
                  "rice_factor": 7.0, "n_paths": 2, "snr_db": 0.0, "symbols": 100}

SCHEMAS: dict[str, KindSchema] = {
    "corr-spectrum": KindSchema(
        {"geometry": "linear", "ports_per_axis": 100, "W": 4.0, "index": 0, "block": False,
         "mu2": 0.97}, ("index", "W"),
        ("eigenvalue", "block_eigenvalue"), _corr_spectrum, _EXACT),
    "avg-variance": KindSchema(
        {"geometry": "linear", "ports_per_axis": 100, "W": 0.5, "n_hat": 1},
        ("n_hat", "W"), ("avg_variance",), _avg_variance, _EXACT),
    "outage": KindSchema(dict(_LINK_DEFAULTS), ("snr_db", "r_min", "W", "ports_per_axis"),
                         ("outage",), _outage, _MC_PROB),
    "rate": KindSchema(dict(_LINK_DEFAULTS), ("snr_db", "r_min", "W", "ports_per_axis"),
                       ("rate", "power_db"), _rate, _MC_MEAN),
    "dmt": KindSchema(
        {"variant": "fas", "Np_tx": 13, "Np_rx": 13, "n_min": 4, "n_other": 0,
         "n_tx": 4, "n_rx": 4, "r": 0}, ("r",), ("d",), _dmt, _EXACT),
    "diversity-table": KindSchema(
        {"geometry": "planar", "N": 100, "W": 0.5, "xi": 0.0, "calibration_W": 0.5,
         "calibration_target": 13}, ("W",),
        ("effective_ports", "dual_diversity", "tas_antennas", "xi"), _diversity_table, _EXACT),
    "estimate": KindSchema(
        {"M": 64, "N": 100, "N_O": 10, "tau": 0.5, "W": 29.7, "D": 192, "L": 2, "snr_db": None},
        ("L", "snr_db"), ("nmse_l3scr", "nmse_omp", "time_l3scr", "time_omp"), _estimate, _MC_MEAN),
    "fama-outage": KindSchema(
        {"W": 7.0, "N": 150, "users": 2, "model": "jakes", "power_ratio": 1.0,
         "gamma_th_db": 0.0}, ("gamma_th_db", "W", "N", "users"), ("outage",),
        _fama_outage, _MC_PROB),
    "qpsk-rate": KindSchema(dict(_QPSK_DEFAULTS, scheme="sfama"), ("users", "snr_db", "W"),
                            ("sum_rate",), _qpsk_rate, "normal 95% from batch-means standard error"),
    "cuma": KindSchema(dict(_QPSK_DEFAULTS, users=10, rho=0.6, n_max=0, n_rf=2),
                       ("users", "rho", "n_max", "n_rf", "snr_db"), ("sum_rate",), _cuma,
                       "normal 95% from batch-means standard error"),
    "precoding": KindSchema(
        {"bs_per_axis": 8, "bs_spacing": 0.5, "users": 8, "rice_factor": 7.0, "n_paths": 2,
         "snr_db": 50.0}, ("rice_factor", "users", "snr_db"), ("mrt", "los"), _precoding,
        _MC_MEAN),
    "gdof": KindSchema(
        {"N": 20, "W": 2.0, "snr_db": 30.0, "alpha": 0.5}, ("alpha", "snr_db", "N", "W"),
        ("tin", "ortho", "fama"), _gdof, _MC_MEAN),
}

KINDS = tuple(SCHEMAS)


# ----------------------------------------------------------------------------
# validation


def _check_type(path: str, value, default):
    if default is None:
        # optional number; absent means "off"
        return None if value is None else _check_type(path, value, 0.0)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported value")


_TOP_KEYS = {"kind", "seed", "trials", "out", "plot", "axes", "timing", "params", "sweep"}
_SEED_MAX = 2 ** 64 - 1


def spec_from_mapping(cfg: Mapping[str, Any], kind: Optional[str] = None) -> ExperimentSpec:
    """Build and validate a spec from a parsed config mapping.

    ``kind`` (from the command line) must agree with the file if both are set.
    """
    unknown = sorted(set(cfg) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    file_kind = cfg.get("kind")
    if kind is not None and file_kind is not None and file_kind != kind:
        raise ConfigError(f"kind: file says '{file_kind}' but '{kind}' was requested")
    kind = kind or file_kind
    if kind not in SCHEMAS:
        raise ConfigError(f"kind: must be one of {', '.join(KINDS)}")
    schema = SCHEMAS[kind]

    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= _SEED_MAX:
        raise ConfigError("seed: expected an unsigned 64-bit integer")
    trials = cfg.get("trials", 1000)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials: expected an integer >= 1")
    axes = cfg.get("axes", "linear")
    if axes not in ("linear", "log-y"):
        raise ConfigError("axes: must be 'linear' or 'log-y'")
    timing = cfg.get("timing", False)
    if not isinstance(timing, bool):
        raise ConfigError("timing: expected true or false")
    for key in ("out", "plot"):
        if cfg.get(key) is not None and not isinstance(cfg[key], str):
            raise ConfigError(f"{key}: expected a path string")

    raw = cfg.get("params", {})
    if not isinstance(raw, Mapping):
        raise ConfigError("params: expected a table")
    params = dict(schema.defaults)
    for key, value in raw.items():
        if key not in schema.defaults:
            raise ConfigError(f"params.{key}: unknown parameter for kind '{kind}'")
        params[key] = _check_type(f"params.{key}", value, schema.defaults[key])

    sw = cfg.get("sweep")
    if not isinstance(sw, Mapping):
        raise ConfigError("sweep: missing table with 'name' and 'values'")
    extra = sorted(set(sw) - {"name", "values"})
    if extra:
        raise ConfigError(f"sweep.{extra[0]}: unknown key")
    name = sw.get("name")
    if name not in schema.sweeps:
        raise ConfigError(f"sweep.name: must be one of {', '.join(schema.sweeps)}")
    values = sw.get("values")
    if not isinstance(values, list) or not values:
        raise ConfigError("sweep.values: expected a non-empty list")
    default = schema.defaults[name]
    checked = [_check_type(f"sweep.values[{i}]", v, 0.0 if default is None else default)
               for i, v in enumerate(values)]
    diffs = np.diff(np.asarray(checked, dtype=float))
    if diffs.size and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError("sweep.values: must be strictly monotone")
    return ExperimentSpec(kind, params, Sweep(name, tuple(checked)), trials, seed,
                          cfg.get("out"), cfg.get("plot"), axes, timing)


def point_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for sweep point ``index``."""
    ss = np.random.SeedSequence(seed, spawn_key=(0xF5, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Evaluate every sweep point; a failing point yields an error row."""
    schema = SCHEMAS[spec.kind]
    table = ResultTable(spec, (), ci_method=schema.ci)
    names: list[str] = []
    for i, x in enumerate(spec.sweep.values):
        params = dict(spec.params)
        params[spec.sweep.name] = x
        t0 = time.perf_counter()
        try:
            metrics = schema.run(params, spec.trials, point_seed(spec.seed, i), spec.timing)
            if any(not (m.ci_low <= m.value <= m.ci_high) for m in metrics.values()
                   if math.isfinite(m.value)):
                raise NumericalError("interval does not bracket the estimate")
            row = Row(float(x), metrics, max(m.trials for m in metrics.values()))
        except ConfigError:
            raise
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            row = Row(float(x), {}, spec.trials, error=f"{type(exc).__name__}: {exc}")
        row.wall_time_s = time.perf_counter() - t0
        for m in row.metrics:
            if m not in names:
                names.append(m)
        table.rows.append(row)
    order = [m for m in schema.metrics if m in names]
    if not order:
        order = [schema.metrics[0]]
    table.metric_names = tuple(order)
    return table
