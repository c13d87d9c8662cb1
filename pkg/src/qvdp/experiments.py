"""Named experiments reproducing the headline measurement protocols.

Each experiment takes a flat, validated configuration dict and returns a
mapping of output name -> CSV text. Writing, manifests and flag handling
live in :mod:`qvdp.cli`; keeping these functions pure makes replay and
worker-count determinism checks trivial.

CSV conventions: ``#``-prefixed ``key: value`` header lines carry scalar
metadata, followed by one column-name row and the data rows. Grids are
written row-major (Q outer, P inner). Floats use ``repr`` so identical
runs are byte-identical.
"""

from __future__ import annotations

import math

import numpy as np

from qvdp.coupled import (
    CoupledParams,
    baseline_sync_level,
    run_coupled_measured,
    sync_measure,
)
from qvdp.errors import ConfigError
from qvdp.fock import (
    DensityMatrix,
    apply_povm,
    coherent_state,
    displacement,
    steady_state,
    survival_experiment,
    target_state,
    wigner_from_density,
    _evolve_matrix,
)
from qvdp.measurement import MeasurementSchedule, run_measured_evolution
from qvdp.phase_space import phase_distribution, wigner_histogram
from qvdp.sde_core import IntegratorConfig, OscillatorParams, limit_cycle_radius
from qvdp.spectral import (
    SpectralSeries,
    critical_interval,
    fourier_q,
    peak_normalized,
    threshold_ratio,
)

EXPERIMENTS = (
    "wigner-panels",
    "zeno-spectrum",
    "threshold-scan",
    "dichotomic-survival",
    "coupled-sync",
    "sync-scan",
)

# keys accepted by every experiment
_COMMON_KEYS = {
    "experiment", "omega_m", "kappa1", "kappa2", "dt", "record_stride",
    "n_traj", "seed", "out_dir", "workers", "quiet", "published_scale",
}
_EXTRA_KEYS = {
    "wigner-panels": {"delta_t_list", "snapshot_times", "total_time", "h", "extent"},
    "zeno-spectrum": {"n_list", "total_time"},
    "threshold-scan": {"ratio_list", "omega_delta_t", "n_repeats", "total_time"},
    "dichotomic-survival": {"dim", "delta_t_grid", "horizon", "n_grid", "export_wigner"},
    "coupled-sync": {"mu", "delta_omega", "total_time", "baseline_window"},
    "sync-scan": {"mu", "delta_omega", "delta_t_list", "m_reps", "total_time",
                  "baseline_window"},
}

DEFAULTS = {
    "omega_m": 1.0,
    "kappa1": 0.1,
    "kappa2": 0.005,
    "dt": 0.005,
    "record_stride": 1,
    "n_traj": 50_000,
    "seed": 1234,
    "workers": None,
    "quiet": False,
    "published_scale": False,
}

#: trajectory counts used when --published-scale is requested
PUBLISHED_SCALE_N = {
    "wigner-panels": 500_000,
    "zeno-spectrum": 5_000,
    "threshold-scan": 1,
    "coupled-sync": 1_000_000,
    "sync-scan": 50_000,
}


def resolve_config(raw: dict) -> dict:
    """Merge defaults, validate keys and types; returns the full config."""
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    allowed = _COMMON_KEYS | _EXTRA_KEYS[exp]
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) for {exp}: {', '.join(sorted(unknown))}")
    cfg = dict(DEFAULTS)
    cfg.update(_experiment_defaults(exp))
    cfg.update(raw)
    if cfg.get("published_scale") and exp in PUBLISHED_SCALE_N:
        cfg["n_traj"] = PUBLISHED_SCALE_N[exp]
    if cfg["n_traj"] < 1:
        raise ConfigError(f"n_traj must be >= 1, got {cfg['n_traj']}")
    return cfg


def _experiment_defaults(exp: str) -> dict:
    if exp == "wigner-panels":
        return {"delta_t_list": [math.inf, 10.0, 1.0], "total_time": 180.0,
                "snapshot_times": [0.0, 60.0, 120.0, 180.0], "h": 0.1,
                "extent": None, "record_stride": 200}
    if exp == "zeno-spectrum":
        return {"n_list": [0, 4, 16, 64, 211, 600, 2000, 6000],
                "total_time": 600.0, "n_traj": 5_000}
    if exp == "threshold-scan":
        return {"ratio_list": [1e-4, 2e-4, 3.5e-4, 5e-4, 7e-4, 1e-3, 2e-3, 5e-3, 1e-2],
                "omega_delta_t": 0.3, "n_repeats": 10, "total_time": 600.0, "n_traj": 1}
    if exp == "dichotomic-survival":
        return {"dim": 50, "horizon": 2.0, "export_wigner": False,
                "delta_t_grid": [0.01, 0.02, 0.03, 0.05, 0.075, 0.1]
                + [round(x, 3) for x in np.linspace(0.2, 3.0, 15)],
                "n_grid": [10, 20, 25, 40, 50, 100, 125, 200, 250, 500, 1000]}
    if exp == "coupled-sync":
        return {"mu": 0.02, "delta_omega": 0.01, "total_time": 400.0,
                "baseline_window": 100.0, "dt": 0.02, "record_stride": 25}
    if exp == "sync-scan":
        return {"mu": 0.02, "delta_omega": 0.01, "delta_t_list": [2.0, 5.0, 10.0, 20.0, 50.0],
                "m_reps": 20, "total_time": 400.0, "baseline_window": 100.0,
                "dt": 0.02, "record_stride": 25}
    return {}


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(meta: dict, columns: list[str], rows) -> str:
    lines = [f"# {k}: {_fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _wigner_csv(hist, meta: dict) -> str:
    qc = hist.q_centers
    dens = hist.density
    meta = dict(meta)
    meta.update({"format": "qvdp-wigner-grid-v1", "h": hist.h, "extent": hist.extent,
                 "n_bins": hist.n_bins, "n_total": hist.n_total, "dropped": hist.dropped})
    rows = []
    for i in range(hist.n_bins):
        for j in range(hist.n_bins):
            rows.append((qc[i], qc[j], int(hist.counts[i, j]), dens[i, j]))
    return csv_text(meta, ["q_center", "p_center", "count", "density"], rows)


def _signed_wigner_csv(q, p, w, meta: dict) -> str:
    meta = dict(meta)
    meta.update({"format": "qvdp-wigner-grid-v1", "h": float(q[1] - q[0]),
                 "extent": float(max(abs(q[0]), abs(q[-1]))), "n_bins": len(q),
                 "signed": True})
    rows = []
    for i in range(len(q)):
        for j in range(len(p)):
            rows.append((q[i], p[j], w[i, j]))
    return csv_text(meta, ["q_center", "p_center", "density"], rows)


def _progress(cfg, msg: str) -> None:
    if not cfg.get("quiet"):
        import sys

        print(f"qvdp: {msg}", file=sys.stderr)


def run_wigner_panels(cfg: dict) -> dict[str, str]:
    """Wigner panel grid: one histogram CSV per (schedule, snapshot time)."""
    params = OscillatorParams(cfg["omega_m"], cfg["kappa1"], cfg["kappa2"])
    r = limit_cycle_radius(params)
    extent = cfg["extent"] if cfg["extent"] is not None else 1.5 * r
    outputs = {}
    for dt_meas in cfg["delta_t_list"]:
        icfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                                seed=cfg["seed"])
        schedule = MeasurementSchedule(float(dt_meas), cfg["total_time"])
        run = run_measured_evolution(params, schedule, icfg, r / 2.0,
                                     int(cfg["n_traj"]),
                                     snapshot_times=cfg["snapshot_times"])
        tag = "inf" if math.isinf(float(dt_meas)) else _fmt(float(dt_meas))
        _progress(cfg, f"wigner-panels: schedule delta_t={tag} done "
                       f"({len(run.collapses)} collapses)")
        for t, states in sorted(run.snapshots.items()):
            hist = wigner_histogram(states, h=cfg["h"], extent=extent)
            meta = {"time": t, "delta_t": tag, "limit_cycle_radius": r,
                    "seed": cfg["seed"]}
            outputs[f"wigner_dt-{tag}_t-{_fmt(t)}.csv"] = _wigner_csv(hist, meta)
    return outputs


def run_zeno_spectrum(cfg: dict) -> dict[str, str]:
    """Spectra of <Q>(t) versus the number of measurements n (long format)."""
    params = OscillatorParams(cfg["omega_m"], cfg["kappa1"], cfg["kappa2"])
    r = limit_cycle_radius(params)
    t_total = cfg["total_time"]
    dtc, n_c = critical_interval(params, t_total)
    rows = []
    peak_rows = []
    for n in cfg["n_list"]:
        n = int(n)
        delta_t = math.inf if n == 0 else t_total / n
        icfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                                seed=cfg["seed"])
        run = run_measured_evolution(params, MeasurementSchedule(delta_t, t_total),
                                     icfg, r / 2.0, int(cfg["n_traj"]))
        series = fourier_q(run.stats.mean_q, cfg["dt"] * cfg["record_stride"],
                           times=run.stats.times)
        _progress(cfg, f"zeno-spectrum: n={n} done")
        omega_cap = 2.0 * math.pi * params.omega_m  # exported band
        keep = series.frequencies <= omega_cap
        for w, m in zip(series.frequencies[keep], series.magnitudes[keep]):
            rows.append((n, w, m))
        peak_rows.append((n, series.magnitude_at(params.omega_m)))
    meta = {"format": "qvdp-spectrum-scan-v1", "total_time": t_total,
            "critical_delta_t": dtc, "critical_n": n_c, "n_traj": cfg["n_traj"],
            "omega_max": 2.0 * math.pi * params.omega_m, "seed": cfg["seed"]}
    return {
        "spectra.csv": csv_text(meta, ["n", "omega", "magnitude"], rows),
        "peaks.csv": csv_text(meta, ["n", "peak_magnitude"], peak_rows),
    }


def run_threshold_scan(cfg: dict) -> dict[str, str]:
    """Normalized spectral peak vs kappa2/kappa1 at fixed measurement interval.

    Follows the single-trajectory recipe: the spectrum of one trajectory's
    Q(t), averaged over ``n_repeats`` independent seeds.
    """
    omega_dt = cfg["omega_delta_t"]
    t_total = cfg["total_time"]
    rows = []
    for ratio in cfg["ratio_list"]:
        params = OscillatorParams(cfg["omega_m"], cfg["kappa1"],
                                  float(ratio) * cfg["kappa1"])
        r = limit_cycle_radius(params)
        delta_t = omega_dt / params.omega_m
        freqs, mags = None, None
        for rep in range(int(cfg["n_repeats"])):
            icfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                                    seed=cfg["seed"] + rep)
            run = run_measured_evolution(params, MeasurementSchedule(delta_t, t_total),
                                         icfg, r / 2.0, int(cfg["n_traj"]))
            series = fourier_q(run.stats.mean_q, cfg["dt"] * cfg["record_stride"],
                               times=run.stats.times)
            freqs = series.frequencies
            mags = series.magnitudes if mags is None else mags + series.magnitudes
        avg = SpectralSeries(frequencies=freqs, magnitudes=mags / int(cfg["n_repeats"]))
        rows.append((ratio, peak_normalized(avg, params)))
        _progress(cfg, f"threshold-scan: ratio={ratio:g} done")
    meta = {"format": "qvdp-threshold-scan-v1", "omega_delta_t": omega_dt,
            "threshold_ratio": threshold_ratio(omega_dt), "total_time": t_total,
            "n_repeats": cfg["n_repeats"], "seed": cfg["seed"]}
    return {"threshold.csv": csv_text(meta, ["kappa2_over_kappa1", "peak_normalized"], rows)}


def run_dichotomic_survival(cfg: dict) -> dict[str, str]:
    """Survival probability curves and the fixed-horizon repeated product."""
    params = OscillatorParams(cfg["omega_m"], cfg["kappa1"], cfg["kappa2"])
    dim = int(cfg["dim"])
    curves = {s: survival_experiment(params, cfg["delta_t_grid"], start=s, dim=dim,
                                     horizon=cfg["horizon"], n_grid=cfg["n_grid"])
              for s in ("m1", "m2")}
    _progress(cfg, "dichotomic-survival: curves done")
    meta = {"format": "qvdp-survival-v1", "dim": dim, "horizon": cfg["horizon"],
            "c_m1": curves["m1"].c_m, "c_m2": curves["m2"].c_m,
            "kappa1": cfg["kappa1"], "kappa2": cfg["kappa2"]}
    p1_rows = list(zip(curves["m1"].delta_t, curves["m1"].p1, curves["m2"].p1))
    pt1_rows = list(zip(curves["m1"].n_grid, curves["m1"].p_t1, curves["m2"].p_t1))
    outputs = {
        "survival_p1.csv": csv_text(meta, ["delta_t", "p1_from_m1", "p1_from_m2"], p1_rows),
        "survival_pt1.csv": csv_text(meta, ["n", "pt1_from_m1", "pt1_from_m2"], pt1_rows),
    }
    if cfg["export_wigner"]:
        outputs.update(_dichotomic_wigner_panels(params, dim, cfg))
    return outputs


def _dichotomic_wigner_panels(params, dim: int, cfg: dict) -> dict[str, str]:
    """Six signed Wigner maps telling the measurement story.

    (a) state diffused for one interval, (b) same after a further interval,
    (c) post-success state, (d) it evolved, (e) post-failure state,
    (f) it evolved.
    """
    import warnings as _w

    rho_s = steady_state(params, dim)
    a0 = target_state(rho_s, 0.0, params)
    interval = 10.0 / params.omega_m
    r = limit_cycle_radius(params)
    grid = np.linspace(-1.3 * r, 1.3 * r, 81)
    rho_a = DensityMatrix(_evolve_matrix(coherent_state(a0, dim).matrix, params, interval))
    alpha_t = target_state(rho_s, interval, params)
    rho_b = DensityMatrix(_evolve_matrix(rho_a.matrix.copy(), params, interval))
    rho_c, _ = apply_povm(rho_a, alpha_t, 1)
    rho_d = DensityMatrix(_evolve_matrix(rho_c.matrix.copy(), params, interval))
    rho_e, _ = apply_povm(rho_a, alpha_t, 2)
    rho_f = DensityMatrix(_evolve_matrix(rho_e.matrix.copy(), params, interval))
    panels = {"a": rho_a, "b": rho_b, "c": rho_c, "d": rho_d, "e": rho_e, "f": rho_f}
    outputs = {}
    for name, rho in panels.items():
        with _w.catch_warnings():
            _w.simplefilter("ignore", RuntimeWarning)
            w = wigner_from_density(rho, grid, grid)
        meta = {"panel": name, "time_interval": interval,
                "limit_cycle_radius": r, "min_w": float(w.min())}
        outputs[f"wigner_povm_{name}.csv"] = _signed_wigner_csv(grid, grid, w, meta)
    _progress(cfg, "dichotomic-survival: wigner panels done")
    return outputs


def _coupled_params(cfg: dict) -> CoupledParams:
    return CoupledParams(omega_m1=cfg["omega_m"],
                         omega_m2=cfg["omega_m"] - cfg["delta_omega"],
                         kappa1=cfg["kappa1"], kappa2=cfg["kappa2"], mu=cfg["mu"])


def run_coupled_sync(cfg: dict) -> dict[str, str]:
    """Unmeasured coupled run: stationary theta_- distribution and well levels."""
    params = _coupled_params(cfg)
    icfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                            seed=cfg["seed"])
    run = run_coupled_measured(params, MeasurementSchedule(math.inf, cfg["total_time"]),
                               icfg, int(cfg["n_traj"]),
                               hist_from=cfg["total_time"] - cfg["baseline_window"])
    s_l = baseline_sync_level(run, cfg["baseline_window"])
    _progress(cfg, "coupled-sync: run done")
    meta = {"format": "qvdp-theta-dist-v1", "mu": cfg["mu"],
            "delta_omega": cfg["delta_omega"], "stationary_level": s_l,
            "window": cfg["baseline_window"], "n_traj": cfg["n_traj"],
            "seed": cfg["seed"]}
    dist_rows = list(zip(run.theta_hist.centers, run.theta_hist.density))
    series_rows = list(zip(run.times, run.w0, run.wpi))
    return {
        "theta_distribution.csv": csv_text(meta, ["theta", "density"], dist_rows),
        "well_series.csv": csv_text(meta, ["time", "w0", "wpi"], series_rows),
    }


def run_sync_scan(cfg: dict) -> dict[str, str]:
    """Synchronization degree S/S_l versus the measurement interval."""
    params = _coupled_params(cfg)
    icfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                            seed=cfg["seed"])
    base = run_coupled_measured(params, MeasurementSchedule(math.inf, cfg["total_time"]),
                                icfg, int(cfg["n_traj"]))
    s_l = baseline_sync_level(base, cfg["baseline_window"])
    _progress(cfg, f"sync-scan: baseline S_l={s_l:.4f}")
    rows = []
    for dtm in cfg["delta_t_list"]:
        runs = []
        for i in range(int(cfg["m_reps"])):
            rcfg = IntegratorConfig(dt=cfg["dt"], record_stride=cfg["record_stride"],
                                    seed=cfg["seed"] + 1 + i)
            runs.append(run_coupled_measured(params, MeasurementSchedule(float(dtm),
                                             cfg["total_time"]), rcfg, int(cfg["n_traj"])))
        res = sync_measure(runs, cfg["total_time"], s_l)
        rows.append((float(dtm), res.ratio, res.sigma_ratio))
        _progress(cfg, f"sync-scan: delta_t={dtm:g} -> S/S_l={res.ratio:.3f}")
    meta = {"format": "qvdp-sync-scan-v1", "mu": cfg["mu"],
            "delta_omega": cfg["delta_omega"], "s_baseline": s_l,
            "m_reps": cfg["m_reps"], "n_traj": cfg["n_traj"],
            "total_time": cfg["total_time"], "seed": cfg["seed"]}
    return {"sync_scan.csv": csv_text(meta, ["delta_t", "s_ratio", "sigma"], rows)}


_RUNNERS = {
    "wigner-panels": run_wigner_panels,
    "zeno-spectrum": run_zeno_spectrum,
    "threshold-scan": run_threshold_scan,
    "dichotomic-survival": run_dichotomic_survival,
    "coupled-sync": run_coupled_sync,
    "sync-scan": run_sync_scan,
}


def run_experiment(cfg: dict) -> dict[str, str]:
    """Dispatch a resolved config to its experiment runner."""
    return _RUNNERS[cfg["experiment"]](cfg)


def validate_config(cfg: dict) -> list[str]:
    """Dry-run guard checks; returns a list of violation messages."""
    violations = []
    try:
        params = OscillatorParams(cfg["omega_m"], cfg["kappa1"], cfg["kappa2"])
    except Exception as exc:  # report, do not raise
        violations.append(str(exc))
        params = None
    if cfg["n_traj"] < 1:
        violations.append(f"n_traj must be >= 1, got {cfg['n_traj']}")
    if params is not None and params.omega_m * cfg["dt"] > 0.05:
        violations.append(f"omega_m*dt = {params.omega_m * cfg['dt']:.4g} exceeds 0.05")
    for key in ("delta_t_list",):
        for dtm in cfg.get(key, []):
            if not math.isinf(float(dtm)) and float(dtm) < cfg["dt"]:
                violations.append(f"measurement interval {dtm} finer than dt={cfg['dt']}")
    if cfg["experiment"] == "zeno-spectrum":
        for n in cfg["n_list"]:
            if int(n) > 0 and cfg["total_time"] / int(n) < cfg["dt"]:
                violations.append(f"n={n} implies an interval finer than dt")
    if cfg["experiment"] == "dichotomic-survival" and params is not None:
        amp2 = steady_like_amplitude_sq(cfg)
        if amp2 >= cfg["dim"] / 4.0:
            violations.append(
                f"target |alpha|^2 ~ {amp2:.1f} violates the truncation guard "
                f"dim/4 = {cfg['dim'] / 4.0}")
    n_snap = len(cfg.get("snapshot_times", [])) * len(cfg.get("delta_t_list", [1]))
    est_bytes = cfg["n_traj"] * (16 * (1 + n_snap) + 8)
    if est_bytes > 8e9:
        violations.append(f"estimated memory {est_bytes / 1e9:.1f} GB exceeds 8 GB")
    return violations


def steady_like_amplitude_sq(cfg: dict) -> float:
    """Semiclassical estimate of the target amplitude squared (guard check)."""
    return cfg["kappa1"] / (2.0 * cfg["kappa2"]) + 1.0
