"""Experiment configs, seeded sweeps and CSV/JSON emission.

A config is one JSON document::

    {
      "experiment": "theorem",
      "seed": 0,
      "model": {"p": 0.3, "N": 10, "gamma": 0.9, "phi": 0.0, "m": 5},
      "sweep": {"gamma": [1.0, 0.9], "haar_seeds": 20},
      "discord": {"n_theta": 64},
      "tolerances": {"exact": 1e-10},
      "output": "out"
    }

``model`` may instead be ``{"state_file": "dump.json"}`` pointing at a
``state-dump`` output. Every runner returns the rows it wrote so callers and
tests can inspect them without re-reading files.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import discord_structure as ds
from .branching import theorem_check
from .geometry import bloch_coordinates, cap_profile, extract_geometric_state
from .infotheory import DiscordConfig, discord
from .models import CMaybeSpec, build_cmaybe_state, trial_seed
from .qstate import PureState, SubsystemLayout

log = logging.getLogger(__name__)

EXPERIMENTS = ("plateau", "cluster", "discord-scan", "props", "theorem", "state-dump")

PLATEAU_COLUMNS = ["seed", "N", "m", "I_SF", "H_S", "I_over_H_S", "discord_upper"]
CLUSTER_COLUMNS = ["seed", "N", "m", "radius", "cap_mass_0", "cap_mass_1"]
CLUSTER_SUMMARY_COLUMNS = ["seed", "N", "m", "radius", "n_seeds", "cap_mass_0", "cap_mass_1"]
POINT_COLUMNS = ["seed", "N", "m", "b_x", "b_y", "weight"]
SCAN_COLUMNS = [
    "seed", "N", "m", "p", "gamma", "I_SF", "H_S", "holevo_best",
    "holevo_pointer", "holevo_grid", "discord_upper", "optimizer",
]
THEOREM_COLUMNS = [
    "seed", "N", "m", "gamma", "eps_D", "eps_I", "fidelity", "eta",
    "branch_entropy_sum", "decoherence_flag", "relative_entropy",
    "entropy_gap", "offdiag_mass", "fs_distance",
]
SUMMARY_COLUMNS = ["group", "n", "spearman_rho", "p_value", "note"]

DEFAULT_RADII = [round(0.01 * k, 2) for k in range(51)]


class ConfigError(ValueError):
    pass


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 1


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0
    discord: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    source: str = "<config>"

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}:1: config must be a JSON object")

        def fail(key, msg):
            raise ConfigError(f"{source}:{_line_of(text, key)}: {key}: {msg}")

        known = {"experiment", "model", "sweep", "output", "seed", "discord", "tolerances", "window"}
        for k in raw:
            if k not in known:
                fail(k, "unknown key")
        exp = raw.get("experiment")
        if exp not in EXPERIMENTS:
            fail("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        for k in ("model", "sweep", "discord", "tolerances", "window"):
            if not isinstance(raw.get(k, {}), dict):
                fail(k, "must be an object")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
            fail("seed", "must be an unsigned 64-bit integer")
        sweep = raw.get("sweep", {})
        for k, v in sweep.items():
            if isinstance(v, list) and not v:
                fail(k, "grid must be nonempty")
        if "radius" in sweep and any(not 0.0 <= float(r) <= 0.5 for r in sweep["radius"]):
            fail("radius", "values must lie in [0, 0.5]")
        try:
            DiscordConfig(**raw.get("discord", {}))
        except TypeError as exc:
            fail("discord", str(exc))
        model = raw.get("model", {})
        if "state_file" not in model and exp != "props":
            try:
                CMaybeSpec(**_spec_kwargs(model))
            except (TypeError, ValueError) as exc:
                fail("model", str(exc))
        return cls(
            experiment=exp,
            model=model,
            sweep=sweep,
            output=raw.get("output", "out"),
            seed=seed,
            discord=raw.get("discord", {}),
            tolerances=raw.get("tolerances", {}),
            window=raw.get("window", {}),
            source=source,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_json(path.read_text(), str(path))

    def discord_config(self) -> DiscordConfig:
        return DiscordConfig(**self.discord)

    def spec(self, **over) -> CMaybeSpec:
        kw = _spec_kwargs(self.model)
        kw.update(over)
        return CMaybeSpec(**kw)


def _spec_kwargs(model: dict) -> dict:
    kw = {k: model[k] for k in ("p", "N", "gamma", "phi", "m", "seed") if k in model}
    extra = set(model) - set(kw) - {"state_file"}
    if extra:
        raise TypeError(f"unknown model keys {sorted(extra)}")
    kw.setdefault("p", 0.5)
    kw.setdefault("N", 8)
    return kw


# -- output ------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def pool_map(fn, tasks, threads: int = 1) -> list:
    """Ordered map over ``tasks``; ``threads`` 0 means one worker per CPU."""
    tasks = list(tasks)
    n = (os.cpu_count() or 1) if threads == 0 else threads
    if n <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(n, len(tasks))) as ex:
        return list(ex.map(fn, tasks))


# -- states ------------------------------------------------------------------


def dump_state(state: PureState) -> dict:
    return {
        "dims": list(state.layout.dims),
        "labels": list(state.layout.labels),
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def load_state(path) -> PureState:
    raw = json.loads(Path(path).read_text())
    amps = np.array([complex(re, im) for re, im in raw["amplitudes"]])
    return PureState(amps, SubsystemLayout(tuple(raw["dims"]), tuple(raw["labels"])))


def model_state(cfg: ExperimentConfig, **over) -> PureState:
    if "state_file" in cfg.model:
        return load_state(cfg.model["state_file"])
    spec = cfg.spec(**over)
    if spec.is_haar and "seed" not in cfg.model and "seed" not in over:
        spec = cfg.spec(seed=trial_seed(cfg.seed, cfg.experiment, 0), **over)
    return build_cmaybe_state(spec)


def _n_env(state: PureState) -> int:
    return len(state.layout.environment)


# -- plateau -----------------------------------------------------------------


def _plateau_point(task):
    amps, layout, m, dcfg, seed = task
    st = PureState(amps, layout).with_fragment(m)
    rep = discord(st, config=dcfg)
    h = rep.system_entropy
    return {
        "seed": seed,
        "N": _n_env(st),
        "m": m,
        "I_SF": rep.mutual_information,
        "H_S": h,
        "I_over_H_S": rep.mutual_information / h if h > 1e-12 else "",
        "discord_upper": rep.discord_upper,
    }


def run_plateau(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    st = model_state(cfg)
    n = _n_env(st)
    ms = cfg.sweep.get("m", list(range(1, n + 1)))
    seed = cfg.model.get("seed", cfg.seed)
    tasks = [(st.amplitudes, st.layout, int(m), cfg.discord_config(), seed) for m in ms]
    rows = pool_map(_plateau_point, tasks, threads)
    if any(r["I_over_H_S"] == "" for r in rows):
        log.info("H_S = 0: ratio column left empty")
    write_csv(Path(cfg.output) / "plateau.csv", PLATEAU_COLUMNS, rows)
    return rows


# -- cluster -----------------------------------------------------------------


def _cluster_point(task):
    p, n, k, seed, radii, window = task
    spec = CMaybeSpec(p=p, N=n, gamma="haar", m=n, seed=seed)
    gqs = extract_geometric_state(build_cmaybe_state(spec))
    c0 = cap_profile(gqs, [1, 0], radii)
    c1 = cap_profile(gqs, [0, 1], radii)
    rows = [
        {"seed": seed, "N": n, "m": n, "radius": r, "cap_mass_0": a, "cap_mass_1": b}
        for r, a, b in zip(radii, c0, c1)
    ]
    points = []
    if window and n == window.get("N", n):
        b = bloch_coordinates(gqs.chis)
        bx = window.get("b_x", [-1.0, 1.0])
        by = window.get("b_y", [-1.0, 1.0])
        sel = (b[:, 0] >= bx[0]) & (b[:, 0] <= bx[1]) & (b[:, 1] >= by[0]) & (b[:, 1] <= by[1])
        if "b_z_max" in window:
            sel &= b[:, 2] <= window["b_z_max"]
        for j in np.flatnonzero(sel):
            points.append({"seed": seed, "N": n, "m": n, "b_x": b[j, 0], "b_y": b[j, 1], "weight": gqs.weights[j]})
    return rows, points


def run_cluster(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    """Cap-mass CDFs of the Haar model around both pointer states.

    Trial ``k`` uses the same derived seed at every N, so the first qubits'
    gates are shared across N (common random numbers).
    """
    ns = [int(n) for n in cfg.sweep.get("N", [6, 8, 10, 12, 14])]
    n_seeds = int(cfg.sweep.get("seeds", 20))
    radii = [float(r) for r in cfg.sweep.get("radius", DEFAULT_RADII)]
    p = float(cfg.model.get("p", 0.3))
    window = dict(cfg.window)
    if window:
        window.setdefault("N", max(ns))
    tasks = [
        (p, n, k, trial_seed(cfg.seed, "cluster", k), radii, window) for n in ns for k in range(n_seeds)
    ]
    out = pool_map(_cluster_point, tasks, threads)
    rows = [r for rs, _ in out for r in rs]
    points = [q for _, ps in out for q in ps]
    summary = []
    for n in ns:
        sub = [r for r in rows if r["N"] == n]
        for j, r in enumerate(radii):
            at = sub[j :: len(radii)]
            summary.append(
                {
                    "seed": cfg.seed,
                    "N": n,
                    "m": n,
                    "radius": r,
                    "n_seeds": len(at),
                    "cap_mass_0": float(np.mean([a["cap_mass_0"] for a in at])),
                    "cap_mass_1": float(np.mean([a["cap_mass_1"] for a in at])),
                }
            )
    outdir = Path(cfg.output)
    write_csv(outdir / "cluster.csv", CLUSTER_COLUMNS, rows)
    write_csv(outdir / "cluster_summary.csv", CLUSTER_SUMMARY_COLUMNS, summary)
    if window:
        write_csv(outdir / "cluster_points.csv", POINT_COLUMNS, points)
    return summary


# -- discord scan --------------------------------------------------------------


def _scan_point(task):
    model, p, gamma, m, dcfg, seed = task
    spec = CMaybeSpec(**{**model, "p": p, "gamma": gamma, "m": m, "seed": seed})
    st = build_cmaybe_state(spec)
    rep = discord(st, config=dcfg)
    return {
        "seed": seed,
        "N": spec.N,
        "m": m,
        "p": p,
        "gamma": gamma,
        "I_SF": rep.mutual_information,
        "H_S": rep.system_entropy,
        "holevo_best": rep.holevo_best,
        "holevo_pointer": rep.holevo_pointer,
        "holevo_grid": "" if rep.holevo_grid is None else rep.holevo_grid,
        "discord_upper": rep.discord_upper,
        "optimizer": rep.optimizer,
    }


def run_discord_scan(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    base = _spec_kwargs(cfg.model)
    n = int(base["N"])
    ps = cfg.sweep.get("p", [base["p"]])
    gammas = cfg.sweep.get("gamma", [base.get("gamma", 1.0)])
    ms = cfg.sweep.get("m", list(range(1, n)))
    seed = base.get("seed", trial_seed(cfg.seed, "discord-scan", 0))
    model = {k: v for k, v in base.items() if k in ("N", "phi")}
    tasks = [(model, float(p), g, int(m), cfg.discord_config(), seed) for p in ps for g in gammas for m in ms]
    rows = pool_map(_scan_point, tasks, threads)
    write_csv(Path(cfg.output) / "discord_scan.csv", SCAN_COLUMNS, rows)
    return rows


# -- props -------------------------------------------------------------------


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random full-rank density matrix (Ginibre ensemble)."""
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = z @ z.conj().T
    return r / np.trace(r).real


def zero_discord_instance(seed: int, n_labels: int = 2, d_s: int = 2):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n_labels))
    sig = [random_density(rng, d_s) for _ in range(n_labels)]
    # random pure system vectors now and then, so rank-1 blocks are covered
    for j in range(n_labels):
        if rng.random() < 0.25:
            v = rng.standard_normal(d_s) + 1j * rng.standard_normal(d_s)
            v /= np.linalg.norm(v)
            sig[j] = np.outer(v, v.conj())
    return ds.build_zero_discord_state(p, sig, seed=seed)


def _props_record(kind, seed, st, tol, dcfg, bases=None):
    if bases is None:
        cert = ds.certify(st, tol=tol)
    else:
        cert = ds.certify(st, *bases, tol=tol)
    rec = {
        "kind": kind,
        "seed": seed,
        "N": _n_env(st),
        "m": len(st.layout.fragment),
        "certificate": cert.to_dict(),
    }
    if cert.g_exists:
        fb, fbb = bases if bases is not None else ds.default_bases(st)
        gqs = extract_geometric_state(st, fb, fbb)
        rebuilt = ds.rebuild_branching_state(gqs, cert.g_map, st.layout, fb, fbb)
        rec["rebuild_overlap"] = float(abs(np.vdot(st.amplitudes, rebuilt.amplitudes)) ** 2)
    if len(st.layout.fragment) == 1 and dcfg is not None:
        rec["discord_upper"] = float(discord(st, config=dcfg).discord_upper)
    return rec


def _props_task(task):
    k, seed, eps, tol, dcfg, n_labels = task
    st = zero_discord_instance(seed, n_labels)
    out = [_props_record("zero-discord", seed, st, tol, dcfg)]
    if eps:
        d_f = st.layout.dim_of(st.layout.fragment)
        d_fb = st.layout.dim_of(st.layout.remainder)
        comp = (np.eye(d_f), np.eye(d_fb))
        q = ds.perturb_forbidden_slot(st, eps, *comp)
        out.append(_props_record("perturbed", seed, q, tol, None, comp))
        out[-1]["eps"] = eps
    return out


def ghz_like(y, n_env: int = 2, m: int = 1) -> PureState:
    """``sqrt(y0)|0>|0..0> + sqrt(y1)|1>|1..1>``."""
    amps = np.zeros(2 ** (n_env + 1), dtype=complex)
    amps[0] = np.sqrt(y[0])
    amps[-1] = np.sqrt(y[1])
    return PureState(amps, SubsystemLayout.qubits(n_env, m))


def run_props(cfg: ExperimentConfig, threads: int = 1) -> dict:
    count = int(cfg.sweep.get("count", 100))
    eps = float(cfg.sweep.get("eps", 1e-3))
    n_labels = int(cfg.sweep.get("labels", 2))
    tol = float(cfg.tolerances.get("exact", ds.TOL_EXACT))
    dcfg = cfg.discord_config()
    tasks = [(k, trial_seed(cfg.seed, "props", k), eps, tol, dcfg, n_labels) for k in range(count)]
    records = [r for rs in pool_map(_props_task, tasks, threads) for r in rs]
    records.append(_props_record("ghz", cfg.seed, ghz_like((0.7, 0.3), 4, 2), tol, dcfg))
    if cfg.model:
        st = model_state(cfg)
        records.append(_props_record("model", cfg.seed, st, tol, dcfg))
    summary = {}
    for kind in sorted({r["kind"] for r in records}):
        sub = [r for r in records if r["kind"] == kind]
        res = [r["certificate"]["frobenius_residual"] for r in sub]
        summary[kind] = {
            "count": len(sub),
            "passed": sum(r["certificate"]["passed"]["all"] for r in sub),
            "residual_min": min(res),
            "residual_max": max(res),
        }
    report = {"tol": tol, "summary": summary, "records": records}
    write_json(Path(cfg.output) / "props.json", report)
    return report


# -- theorem -----------------------------------------------------------------


def _theorem_point(task):
    spec_kw, gamma, seed, dcfg = task
    spec = CMaybeSpec(**{**spec_kw, "gamma": gamma, "seed": seed})
    rec = theorem_check(build_cmaybe_state(spec), spec.m, dcfg)
    return {
        "seed": seed,
        "N": spec.N,
        "m": spec.m,
        "gamma": gamma,
        "eps_D": rec.eps_D,
        "eps_I": rec.eps_I,
        "fidelity": rec.fidelity,
        "eta": rec.eta,
        "branch_entropy_sum": rec.branch_entropy_sum,
        "decoherence_flag": rec.good_decoherence,
        "relative_entropy": rec.relative_entropy,
        "entropy_gap": rec.entropy_gap,
        "offdiag_mass": rec.offdiag_mass,
        "fs_distance": rec.fs_distance,
    }


def rank_summary(group: str, rows: list[dict]) -> dict:
    x = [r["eps_D"] + r["eps_I"] for r in rows]
    y = [r["eta"] for r in rows]
    out = {"group": group, "n": len(rows), "spearman_rho": "", "p_value": "", "note": ""}
    if len(rows) < 2 or len(set(x)) < 2 or len(set(y)) < 2:
        out["note"] = "undefined: constant input"
        return out
    res = spearmanr(x, y)
    out["spearman_rho"] = float(res.statistic)
    out["p_value"] = float(res.pvalue)
    return out


def run_theorem(cfg: ExperimentConfig, threads: int = 1) -> tuple[list[dict], list[dict]]:
    """Theorem records over a gamma grid plus an optional Haar pool.

    The gamma model is deterministic, so each gamma gives one record; the
    Haar pool draws ``sweep.haar_seeds`` independent gate sets.
    """
    kw = _spec_kwargs(cfg.model)
    kw.pop("gamma", None)
    kw.pop("seed", None)
    kw.setdefault("N", 10)
    kw.setdefault("m", kw["N"] // 2)
    gammas = cfg.sweep.get("gamma", [0.99, 0.95, 0.9, 0.8, 0.7])
    n_haar = int(cfg.sweep.get("haar_seeds", 0))
    dcfg = cfg.discord_config()
    tasks = [(kw, float(g), 0, dcfg) for g in gammas if g != "haar"]
    tasks += [(kw, "haar", trial_seed(cfg.seed, "theorem", k), dcfg) for k in range(n_haar)]
    rows = pool_map(_theorem_point, tasks, threads)
    g_rows = [r for r in rows if r["gamma"] != "haar"]
    h_rows = [r for r in rows if r["gamma"] == "haar"]
    summary = []
    if g_rows:
        summary.append(rank_summary("gamma", g_rows))
    if h_rows:
        summary.append(rank_summary("haar", h_rows))
    summary.append(rank_summary("all", rows))
    outdir = Path(cfg.output)
    write_csv(outdir / "theorem.csv", THEOREM_COLUMNS, rows)
    write_csv(outdir / "theorem_summary.csv", SUMMARY_COLUMNS, summary)
    return rows, summary


# -- state dump --------------------------------------------------------------


def run_state_dump(cfg: ExperimentConfig, threads: int = 1) -> dict:
    st = model_state(cfg)
    obj = {"model": cfg.model, **dump_state(st)}
    write_json(Path(cfg.output) / "state.json", obj)
    return obj


RUNNERS = {
    "plateau": run_plateau,
    "cluster": run_cluster,
    "discord-scan": run_discord_scan,
    "props": run_props,
    "theorem": run_theorem,
    "state-dump": run_state_dump,
}
