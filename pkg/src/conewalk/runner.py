"""Run configured pipelines and record a manifest sufficient to reproduce them."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import platform
import warnings
import zlib
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, kernels, vfunc, walk
from . import rng as crng
from .config import ConfigError, ExperimentConfig, parse_angle
from .eigen import circular_cone_lambda1, p_exponent


@dataclass
class RunManifest:
    config: dict
    version: str
    backend: str
    started: str
    finished: str = ""
    stages: dict = field(default_factory=dict)
    completed: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    platform: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def stage_seed(seed: int, stage: str) -> int:
    """Per-stage seed; stages never share random streams."""
    return crng.child_seed(seed, zlib.crc32(stage.encode()))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable({f.name: getattr(obj, f.name) for f in fields(obj)})
    return obj


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def write_plot(path: Path, columns: list, header: str) -> Path:
    np.savetxt(path, np.column_stack(columns), header=header, fmt="%.17g")
    return path


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---- stages ------------------------------------------------------------------

def _stage_eigen(cfg: ExperimentConfig, out: Path, seed: int) -> tuple[dict, list]:
    cone = None
    theta0 = cfg["eigen.theta0"]
    if theta0 is None:
        cone = cfg.cone()
        theta0 = cone.angle if cone.kind.name == "CIRCULAR" else math.pi / 2
    theta0 = parse_angle(theta0)
    mesh = int(cfg["eigen.mesh"])
    table = circular_cone_lambda1(theta0, mesh)
    csv_path, json_path = table.save(out / "eigen")
    summary = {"theta0": theta0, "mesh": mesh, "lambda1": table.lambda1, "p": p_exponent(table.lambda1, 3),
               "est_error": table.est_error}
    return summary, [csv_path, json_path]


def _stage_simulate(cfg, out, seed):
    form, law = cfg.form(), cfg.law()
    n, N, th = int(cfg["run.n"]), cfg.samples, cfg.threads
    rows, summary = [], {"n": n, "estimates": []}
    for i, x in enumerate(cfg.start_list()):
        est = walk.survival_estimate(form, law, x, n, N, seed, stream_id=i, threads=th)
        summary["estimates"].append({"x": x, "survival": est})
        rows.append([json.dumps(x), n, est.mean, est.stderr, N])
    files = [write_csv(out / "survival.csv", ["x", "n", "survival", "stderr", "samples"], rows)]
    x = cfg.start()
    beta = cfg["probe.beta"]
    if beta is not None:
        summary["tau_moment"] = walk.tau_moment_probe(form, law, x, float(beta), int(cfg["probe.horizon"]), N,
                                                      seed, stream_id=100, threads=th)
    t_exp = cfg["probe.t_exp"]
    if t_exp is not None:
        pts = walk.max_tail_probe(form, law, x, cfg["grid.n"], float(t_exp), float(cfg["probe.eps"]), N, seed,
                                  stream_id=200, threads=th)
        summary["max_tail"] = pts
        files.append(write_csv(out / "max_tail.csv", ["n", "truncated", "truncated_stderr", "tau_mean",
                                                      "tau_mean_stderr", "ratio", "ratio_stderr"],
                               [[q.n, q.truncated.mean, q.truncated.stderr, q.tau_mean.mean, q.tau_mean.stderr,
                                 q.ratio, q.ratio_stderr] for q in pts]))
    audit = int(cfg["run.audit"])
    if audit:
        arows = []
        for j in range(audit):
            path = walk.audit_path(form.cone, law, x, n, seed, stream_id=0, index=j)
            for k, pt in enumerate(path):
                arows.append([j, k] + [float(v) for v in pt])
        files.append(write_csv(out / "audit_paths.csv", ["path", "step"] + [f"x{i}" for i in range(len(x))], arows))
    summary["streams"] = "start i uses stream i; tau moments stream 100; max tail streams 200+grid index"
    return summary, files


def _stage_estimate_v(cfg, out, seed):
    form, law, N, th = cfg.form(), cfg.law(), cfg.samples, cfg.threads
    construction = int(cfg["v.construction"])
    rows, results = [], []
    for i, x in enumerate(cfg.start_list()):
        if construction == 1:
            shift = vfunc.ShiftSequence.for_cone(form, cfg["shift.gamma"])
            v, diag = vfunc.estimate_v_construction1(form, law, x, shift, cfg["grid.k"], N, seed, i, th)
            for k, m, s in zip(diag["k_grid"], diag["values"], diag["stderrs"]):
                rows.append([json.dumps(x), k, m, s])
        else:
            sched = vfunc.Schedule(int(cfg["schedule.n0"]), float(cfg["schedule.epsilon"]), int(cfg["schedule.m_max"]))
            v, diag = vfunc.estimate_v_construction2(form, law, x, sched, N, seed, i, th)
            diag = {"terms": diag, "ratio_decay_slope": vfunc.ratio_decay_slope(diag)}
            for r in diag["terms"]:
                rows.append([json.dumps(x), r["n"], r["mean"], r["stderr"]])
        results.append({"x": x, "v_hat": v, "diagnostics": diag})
    path = write_csv(out / f"v_construction{construction}.csv", ["x", "horizon", "mean", "stderr"], rows)
    return {"construction": construction, "results": results, "streams": "start i uses stream i"}, [path]


def _stage_decompose(cfg, out, seed):
    form, law, N, th = cfg.form(), cfg.law(), cfg.samples, cfg.threads
    shift = vfunc.ShiftSequence.for_cone(form, cfg["shift.gamma"])
    x = cfg.start()
    dec = vfunc.decompose_paths(form, law, x, cfg["grid.k"], shift, N, seed, 0, th, strict=False)
    rows = [[k, dec.w1[i].mean, dec.w1[i].stderr, dec.w2[i].mean, dec.w2[i].stderr, dec.w3[i].mean,
             dec.w3[i].stderr, dec.lhs[i].mean, dec.lhs[i].stderr] for i, k in enumerate(dec.checkpoints)]
    path = write_csv(out / "decomposition.csv", ["k", "w1", "w1_stderr", "w2", "w2_stderr", "w3", "w3_stderr",
                                                  "lhs", "lhs_stderr"], rows)
    if dec.identity_violations:
        raise vfunc.DecompositionError(f"{dec.identity_violations} identity violations")
    return {"x": x, "decomposition": dec}, [path]


def _stage_tail_fit(cfg, out, seed):
    form, law = cfg.form(), cfg.law()
    x = cfg.start()
    fit = asymptotics.tail_exponent_fit(form, law, x, cfg["grid.n"], cfg.samples, seed, 0, cfg.threads)
    ns = [g[0] for g in fit.grid]
    est = [g[1] for g in fit.grid]
    se = [g[2] for g in fit.grid]
    files = [write_csv(out / "tail_fit.csv", ["n", "survival", "stderr"], fit.grid),
             write_plot(out / "tail_fit.dat", [ns, est, se], "n survival stderr")]
    return {"x": x, "target_slope": -form.p / 2, "fit": fit, "streams": "grid point i uses stream i"}, files


def _stage_kappa(cfg, out, seed):
    form, law, N, th = cfg.form(), cfg.law(), cfg.samples, cfg.threads
    xs = cfg.start_list()
    shift = vfunc.ShiftSequence.for_cone(form, cfg["shift.gamma"])
    vs = [vfunc.estimate_v_construction1(form, law, x, shift, cfg["grid.k"], N, seed, 1000 + i, th)[0]
          for i, x in enumerate(xs)]
    tr = asymptotics.kappa_ratio_trace(form, law, xs, cfg["grid.n"], vs, N, seed, 0, th)
    rows = [[r["x_index"], r["n"], r["survival"], r["survival_stderr"], r["v_hat"], r["ratio"], r["ratio_stderr"]]
            for r in tr.rows]
    path = write_csv(out / "kappa_trace.csv", ["x_index", "n", "survival", "survival_stderr", "v_hat", "ratio",
                                               "ratio_stderr"], rows)
    return {"x_list": xs, "trace": tr, "streams": "V for start i stream 1000+i; survival for start i stream i"}, [path]


def _stage_density(cfg, out, seed):
    form, law = cfg.form(), cfg.law()
    x = cfg.start()
    rep = asymptotics.conditional_density_test(form, law, x, int(cfg["density.n"]), cfg.samples,
                                               int(cfg["density.bins"]), seed, 0, cfg.threads)
    rows = [[i, o, e] for i, (o, e) in enumerate(zip(rep.observed, rep.expected))]
    path = write_csv(out / "conditional_density.csv", ["cell", "observed", "expected"], rows)
    return {"x": x, "report": rep}, [path]


def _stage_lclt(cfg, out, seed):
    form, law = cfg.form(), cfg.law()
    x = cfg.start()
    rep = asymptotics.local_clt_ratio(form, law, x, int(cfg["lclt.n"]), None, cfg.samples, seed,
                                      min_hits=int(cfg["lclt.min_hits"]), threads=cfg.threads)
    rows = [[json.dumps(r["y"]), r["hits"], r["probability"], r["ratio"], r["ratio_stderr"]] for r in rep.rows]
    path = write_csv(out / "local_clt.csv", ["y", "hits", "probability", "ratio", "ratio_stderr"], rows)
    return {"x": x, "cv": rep.cv, "report": rep}, [path]


STAGE_FUNCS = {
    "eigen": _stage_eigen,
    "simulate": _stage_simulate,
    "estimate-v": _stage_estimate_v,
    "decompose": _stage_decompose,
    "tail-fit": _stage_tail_fit,
    "kappa-trace": _stage_kappa,
    "conditional-dist": _stage_density,
    "local-clt": _stage_lclt,
}


def run(config: ExperimentConfig, stages=None) -> RunManifest:
    """Validate, then execute the stages in order, writing artifacts under ``run.out``.

    Invalid configurations raise :class:`ConfigError` before any sampling. A
    failing stage is recorded in the manifest and later stages still run.
    """
    stages = list(stages if stages is not None else config.stages)
    if not stages:
        raise ConfigError("no stages requested")
    notes = config.validate(stages)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=dict(config.values), version=__version__, backend=kernels.default_backend(),
                           started=_now(), warnings=notes,
                           platform=f"{platform.python_implementation()} {platform.python_version()}")
    (out / "config.txt").write_text(config.to_text())
    for stage in stages:
        seed = stage_seed(config.seed, stage)
        sdir = out / stage
        sdir.mkdir(exist_ok=True)
        manifest.stages[stage] = {"seed": seed, "root_seed": config.seed, "samples": config.samples}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                summary, files = STAGE_FUNCS[stage](config, sdir, seed)
            except Exception as exc:  # recorded, not fatal for later stages
                manifest.failed[stage] = f"{type(exc).__name__}: {exc}"
                files = None
        manifest.warnings.extend(f"{stage}: {w.message}" for w in caught)
        if files is None:
            continue
        files.append(write_json(sdir / "summary.json", summary))
        manifest.completed.append(stage)
        for f in files:
            manifest.outputs[str(f.relative_to(out))] = _file_hash(f)
    manifest.finished = _now()
    write_json(out / "manifest.json", manifest)
    return manifest
