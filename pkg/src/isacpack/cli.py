"""Command-line front end.

Every command reads one config (see :mod:`isacpack.config`), applies flag
overrides, and writes plot-ready CSV files plus ``manifest.json`` into the
output directory. Exit codes: 0 success, 2 infeasible design, 3 bad config
or missing input. Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, kernels
from .alda import solve_fixed_d, solve_maxmin, kkt_report
from .bdps import optimize_split
from .config import METRICS, ConfigError, ExperimentConfig, load_config
from .errors import InfeasibleDetected, InvalidInput, NoFeasiblePoint
from .evaluation import (
    ambiguity,
    avg_beampattern,
    beampattern,
    beampattern_mse,
    default_grid,
    detection_probability,
    gen_rayleigh,
    min_distance_cdf,
    noise_sigma2,
    perturb_csit,
    simulate_ser,
    waveform_similarity,
)
from .io import (
    read_channel,
    read_reference,
    read_signals,
    sha256_file,
    write_channel,
    write_csv,
    write_json,
    write_reference,
    write_signals,
)
from .qcqp import QcqpInstance
from .signal_model import gen_lfm, gen_widebeam, reduce
from .sweep import sweep_tradeoff

EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3

# column layout of every CSV the CLI writes
SCHEMAS = {
    "signals.csv": "x0..x{N-1}: one designed signal per row, realified [Re; Im]",
    "reference.csv": "x0_real: realified reference waveform, one entry per row",
    "channel.csv": "row,col,re,im: complex channel entries",
    "ser.csv": "snr_db,ser,errors,trials,std_err",
    "cdf.csv": "rank,min_distance,cdf (failed channels counted in manifest)",
    "beampattern.csv": "theta_deg,avg_power,avg_gain_db,ref_power,ref_gain_db",
    "af.csv": "signal,delay,doppler,value (signal is 'ref' or a row index)",
    "pd.csv": "snr_db,pd_signals,pd_reference,trials,pfa",
    "similarity.csv": "signal,distance (||x_k - x0||)",
    "tradeoff.csv": ("d_target,eps,d_achieved,max_similarity,beampattern_mse_db,"
                     "ser_at_ref_snr,error (d columns are squared distances)"),
}


class _Fail(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code, self.kind = code, kind


def _schema_help():
    return "\b\nCSV schemas:\n" + "\n".join(f"  {k}: {v}" for k, v in SCHEMAS.items())


# --- problem assembly --------------------------------------------------

def build_channel(cfg: ExperimentConfig):
    pc = cfg.problem
    ch = pc.channel
    if ch.source == "identity":
        return np.eye(pc.n_tx, dtype=complex)
    if ch.source == "file":
        try:
            H = read_channel(ch.path)
        except OSError as exc:
            raise ConfigError(f"cannot read channel file: {exc}") from exc
        if H.shape[1] != pc.n_tx:
            raise ConfigError(f"channel has {H.shape[1]} columns, n_tx={pc.n_tx}")
        return H
    seed = cfg.seed if ch.seed is None else ch.seed
    return gen_rayleigh(pc.n_r, pc.n_tx, 1, seed).draws[0]


def build_reference(cfg: ExperimentConfig):
    pc = cfg.problem
    ref = pc.reference
    if ref.kind == "lfm":
        return gen_lfm(2 * pc.n_tx, pc.P).x0
    if ref.kind == "widebeam":
        return gen_widebeam(pc.n_tx, pc.P, lobe=ref.lobe).x0
    try:
        x0 = read_reference(ref.path)
    except OSError as exc:
        raise ConfigError(f"cannot read reference file: {exc}") from exc
    if x0.size != 2 * pc.n_tx:
        raise ConfigError(f"reference has {x0.size} entries, expected {2 * pc.n_tx}")
    return x0


def _design_channel(cfg, H):
    """Channel the transmitter designs with (perturbed when ``eval.eta > 0``)."""
    if cfg.eval.eta == 0:
        return H
    sn2 = 2.0 * float(noise_sigma2(cfg.problem.P, cfg.eval.ref_snr_db))
    return perturb_csit(H, cfg.eval.eta, sn2, cfg.seed + 1)


def run_design(cfg: ExperimentConfig, H, x0):
    """Design a signal set; returns ``(signals, summary dict)``."""
    pc = cfg.problem
    inst = reduce(_design_channel(cfg, H), x0, pc.M, pc.P, pc.eps)
    acfg = cfg.solver.alda.build(cfg.seed)
    bcfg = cfg.solver.bisect.build()
    if cfg.solver.method == "bdps":
        plan, res, hist = optimize_split(inst, cfg.solver.bdps.G, cfg.solver.bdps.ga.build(cfg.seed),
                                         acfg, bcfg, threads=cfg.threads)
        summary = {
            "method": "bdps",
            "d_achieved": res.d_true,
            "d_true": res.d_true,
            "d_combined": res.d_combined,
            "d_groups": res.d_groups,
            "power": res.power_used,
            "similarity": res.similarity,
            "plan": plan.to_dict(),
            "ga": {"best_fitness": hist.best_fitness, "evaluations": hist.evaluations,
                   "cache_hits": hist.cache_hits},
        }
        return res.signals, summary
    if pc.d is None:
        res = solve_maxmin(inst, acfg, bcfg)
    else:
        res = solve_fixed_d(inst, pc.d, acfg, bcfg)
    summary = {
        "method": "alda",
        "d_achieved": res.d_achieved,
        "d_achieved_sq": res.d_achieved**2,
        "d_target": res.d_target,
        "power": res.power_used,
        "similarity": res.similarity,
        "converged": res.converged,
        "scaled": res.scaled,
        "notes": res.notes,
    }
    if res.state is not None:
        d_kkt = res.d_target if res.d_target is not None else res.d_achieved**2
        k = kkt_report(QcqpInstance(inst, d_kkt), res.state)
        summary["kkt"] = k.as_dict()
        summary["outer_iterations"] = res.state.outer_iter
    return res.signals, summary


# --- metric writers ----------------------------------------------------

def _eval_metric(name, cfg, H, x0, X, outdir, summary):
    ev = cfg.eval
    grid = default_grid(ev.angle_step)
    if name == "ser":
        c = simulate_ser(X, H, ev.snr_db, ev.trials, cfg.seed, P=cfg.problem.P, threads=cfg.threads)
        write_csv(outdir / "ser.csv", ["snr_db", "ser", "errors", "trials", "std_err"],
                  zip(c.snr_db, c.ser, c.errors_per_point, [c.trials_per_point] * c.snr_db.size,
                      c.std_err))
    elif name == "cdf":
        ens = gen_rayleigh(cfg.problem.n_r, cfg.problem.n_tx, ev.n_channels, cfg.seed)

        def designer(Hc, d, eps):
            return run_design(cfg, Hc, x0)[0]

        cdf = min_distance_cdf(ens, designer, cfg.problem.d, cfg.problem.eps)
        write_csv(outdir / "cdf.csv", ["rank", "min_distance", "cdf"],
                  zip(range(cdf.samples.size), cdf.samples, cdf.cdf))
        summary["cdf"] = {"channels": ev.n_channels, "failed": cdf.n_failed}
    elif name == "beampattern":
        a = avg_beampattern(X, grid, normalize=True)
        r = beampattern(x0, grid, normalize=True)
        write_csv(outdir / "beampattern.csv",
                  ["theta_deg", "avg_power", "avg_gain_db", "ref_power", "ref_gain_db"],
                  zip(grid, a.power, a.gain_db, r.power, r.gain_db))
        summary["beampattern_mse_db"] = beampattern_mse(X, x0, grid)
    elif name == "af":
        rows = []
        for label, sig in [("ref", x0)] + [(str(i), x) for i, x in enumerate(X)]:
            g = ambiguity(sig)
            for i, t in enumerate(g.delays):
                for j, nu in enumerate(g.doppler):
                    rows.append((label, t, nu, g.values[i, j]))
        write_csv(outdir / "af.csv", ["signal", "delay", "doppler", "value"], rows)
    elif name == "pd":
        lobe = cfg.problem.reference.lobe
        kw = dict(mc_trials=ev.pd_trials, pfa=ev.pfa, seed=cfg.seed, calib_trials=ev.calib_trials,
                  P=cfg.problem.P, threads=cfg.threads)
        ps = detection_probability(X, lobe, ev.snr_db, **kw)
        pr = detection_probability(x0[None, :], lobe, ev.snr_db, **kw)
        write_csv(outdir / "pd.csv", ["snr_db", "pd_signals", "pd_reference", "trials", "pfa"],
                  zip(ps.snr_db, ps.pd, pr.pd, [ps.trials] * ps.snr_db.size,
                      [ps.pfa] * ps.snr_db.size))
    elif name == "similarity":
        per, mx = waveform_similarity(X, x0)
        write_csv(outdir / "similarity.csv", ["signal", "distance"], enumerate(per))
        summary["max_similarity"] = mx
    elif name == "tradeoff":
        _write_tradeoff(cfg, H, x0, outdir)
    else:  # pragma: no cover - guarded by the config schema
        raise ConfigError(f"unknown metric {name}")


def _write_tradeoff(cfg, H, x0, outdir):
    pc = cfg.problem
    inst = reduce(_design_channel(cfg, H), x0, pc.M, pc.P, pc.eps)
    pts = sweep_tradeoff(inst, cfg.sweep.d_values, cfg.solver.alda.build(cfg.seed),
                         cfg.sweep.mode, cfg.sweep.rtol)
    grid = default_grid(cfg.eval.angle_step)
    rows = []
    for p in pts:
        if p.result is None:
            rows.append((p.d_target, p.eps, math.nan, math.nan, math.nan, math.nan, p.error))
            continue
        X = p.result.signals
        ser = simulate_ser(X, H, [cfg.eval.ref_snr_db], cfg.eval.trials, cfg.seed,
                           P=pc.P, threads=cfg.threads).ser[0]
        rows.append((p.d_target, p.eps, p.d_achieved**2, p.max_similarity,
                     beampattern_mse(X, x0, grid), ser, ""))
    write_csv(outdir / "tradeoff.csv",
              ["d_target", "eps", "d_achieved", "max_similarity", "beampattern_mse_db",
               "ser_at_ref_snr", "error"], rows)


# --- plumbing ----------------------------------------------------------

def _load(config, seed, out, threads, extra=None):
    over = dict(extra or {})
    if seed is not None:
        over["seed"] = seed
    if out is not None:
        over["out"] = out
    if threads is not None:
        over["threads"] = threads
    return load_config(config, over)


def _manifest(cfg, command, outdir, files, inputs=None, summary=None):
    write_json(outdir / "manifest.json", {
        "command": command,
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "inputs": inputs or {},
        "outputs": {f: sha256_file(outdir / f) for f in sorted(files)},
        "summary": summary or {},
    })


def _run(fn):
    """Execute a command body, mapping failures to exit codes and JSON errors."""
    try:
        fn()
    except _Fail as exc:
        _die(exc.code, exc.kind, str(exc))
    except (NoFeasiblePoint, InfeasibleDetected) as exc:
        _die(EXIT_INFEASIBLE, type(exc).__name__, str(exc))
    except (InvalidInput, FileNotFoundError) as exc:
        _die(EXIT_CONFIG, type(exc).__name__, str(exc))


def _die(code, kind, message):
    click.echo(json.dumps({"error": kind, "message": message, "exit_code": code}), err=True)
    sys.exit(code)


def _outdir(cfg):
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def common(f):
    f = click.option("--threads", type=int, default=None, help="Worker threads.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None,
                     help="Output directory.")(f)
    f = click.option("--seed", type=int, default=None, help="Master seed.")(f)
    f = click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
                     help="YAML/JSON config or a previous manifest.json.")(f)
    return f


@click.group(epilog=_schema_help())
@click.version_option(__version__)
def main():
    """Design and evaluate ISAC signal sets.

    Flags override config values, which override built-in defaults.
    """


@main.command(epilog=_schema_help())
@common
def design(config, seed, out, threads):
    """Design a signal set; writes signals.csv and result.json."""
    def body():
        cfg = _load(config, seed, out, threads)
        H, x0 = build_channel(cfg), build_reference(cfg)
        X, summary = run_design(cfg, H, x0)
        od = _outdir(cfg)
        write_signals(od / "signals.csv", X)
        write_json(od / "result.json", summary)
        _manifest(cfg, "design", od, ["signals.csv", "result.json"],
                  summary={"d_achieved": summary["d_achieved"]})
    _run(body)


@main.command(name="eval", epilog=_schema_help())
@common
@click.option("--metric", "metrics", multiple=True, type=click.Choice(METRICS),
              help="Metric to compute; repeatable.")
@click.option("--signals", type=click.Path(dir_okay=False), default=None,
              help="signals.csv to evaluate instead of designing.")
def eval_cmd(config, seed, out, threads, metrics, signals):
    """Evaluate a signal set; one CSV per metric plus manifest.json."""
    def body():
        extra = {}
        if metrics:
            extra["eval"] = {"metrics": list(metrics)}
        if signals:
            extra.setdefault("eval", {})["signals"] = str(Path(signals).resolve())
        cfg = _load(config, seed, out, threads, extra)
        if not cfg.eval.metrics:
            raise ConfigError("no metrics requested")
        H, x0 = build_channel(cfg), build_reference(cfg)
        inputs = {}
        if cfg.eval.signals:
            if not Path(cfg.eval.signals).is_file():
                raise _Fail(EXIT_CONFIG, "MissingInput", f"signals file {cfg.eval.signals} not found")
            X = read_signals(cfg.eval.signals)
            if X.shape[1] != x0.size:
                raise ConfigError(f"signals have {X.shape[1]} columns, expected {x0.size}")
            inputs["signals"] = sha256_file(cfg.eval.signals)
        else:
            X, _ = run_design(cfg, H, x0)
        summary = {}
        od = Path(cfg.out)
        staged = []
        od.mkdir(parents=True, exist_ok=True)
        for m in dict.fromkeys(cfg.eval.metrics):
            _eval_metric(m, cfg, H, x0, X, od, summary)
            staged.append(f"{m}.csv")
        _manifest(cfg, "eval", od, staged, inputs, summary)
    _run(body)


@main.command(name="sweep-tradeoff", epilog=_schema_help())
@common
def sweep_cmd(config, seed, out, threads):
    """Distance versus similarity frontier; writes tradeoff.csv."""
    def body():
        cfg = _load(config, seed, out, threads)
        H, x0 = build_channel(cfg), build_reference(cfg)
        od = _outdir(cfg)
        _write_tradeoff(cfg, H, x0, od)
        _manifest(cfg, "sweep-tradeoff", od, ["tradeoff.csv"])
    _run(body)


@main.command(name="gen-channel", epilog=_schema_help())
@common
def gen_channel(config, seed, out, threads):
    """Write the configured channel to channel.csv."""
    def body():
        cfg = _load(config, seed, out, threads)
        H = build_channel(cfg)
        od = _outdir(cfg)
        write_channel(od / "channel.csv", H)
        _manifest(cfg, "gen-channel", od, ["channel.csv"])
    _run(body)


@main.command(name="gen-reference", epilog=_schema_help())
@common
def gen_reference(config, seed, out, threads):
    """Write the configured reference waveform to reference.csv."""
    def body():
        cfg = _load(config, seed, out, threads)
        x0 = build_reference(cfg)
        od = _outdir(cfg)
        write_reference(od / "reference.csv", x0)
        _manifest(cfg, "gen-reference", od, ["reference.csv"])
    _run(body)


if __name__ == "__main__":  # pragma: no cover
    main()
