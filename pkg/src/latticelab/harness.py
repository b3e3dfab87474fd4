"""Monte Carlo sweep orchestration: config, paired trials, persistence.

A sweep walks a (rho, r) grid and runs every configured decoder on the
same channel, message, and noise within each trial.  Randomness for trial
i of cell (rho_idx, r_idx) comes from a substream keyed by
(master_seed, rho_idx, r_idx, i), so results are reproducible bit-for-bit
regardless of worker count or scheduling.

Trials are grouped into fixed-size chunks; chunks are the parallel work
unit and are merged back in trial order, which keeps the emitted CSV
byte-identical across 1..n workers.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analysis import SweepRecord, cbar, dmt_reference
from .channel import (
    ChannelConfig,
    SUPPORTED_FADING,
    effective_lattice_matrix,
    sample_channel,
    substream,
    transmit,
)
from .codes import LatticeCodeSpec, builtin_code, constellation, load_code_spec, permute_columns
from .decoders import (
    VERDICTS,
    classify,
    decode_exact_regularized,
    decode_lr_regularized,
    decode_ml_sd,
)
from .preprocess import DEFAULT_DELTA, mmse_preprocess, receive_statistic, regularization_alpha
from .sphere import radius_from_z

OUT_DIR_ENV = "LATTICELAB_OUTDIR"
CHUNK_TRIALS = 256
CSV_NAME = "sweep.csv"
RAW_NAME = "trials_raw.csv"
PLOT_SCRIPT_NAME = "plots.gp"

CSV_COLUMNS = (
    "rho_db",
    "r",
    "decoder",
    "trials",
    "n_correct",
    "n_lattice_err",
    "n_out_of_codebook",
    "n_timeout",
    "n_empty_sphere",
    "flops_p50",
    "flops_p90",
    "flops_p99",
    "flops_max",
    "sigma_min_p01",
)

DECODER_KINDS = ("exact-regularized", "lr-regularized", "ml-sd", "ml-sd-mmse")
_VERDICT_INDEX = {v: i for i, v in enumerate(VERDICTS)}


class ConfigError(ValueError):
    """Bad sweep configuration (maps to CLI exit code 2)."""


@dataclass(frozen=True)
class DecoderSpec:
    """One decoder column in the sweep.

    z controls the search radius xi = sqrt(z ln rho); None selects the
    reference diversity value plus one.  A budget of
    budget_scale * rho^budget_exponent flops (optionally clamped by
    budget_cap) makes the decoder single-shot with a timeout verdict.
    """

    name: str
    kind: str
    z: float | None = None
    budget_exponent: float | None = None
    budget_scale: float = 1.0
    budget_cap: float | None = None
    delta: float = DEFAULT_DELTA
    enumeration: str = "natural"
    shrink_radius: bool = False
    column_order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in DECODER_KINDS:
            raise ConfigError(f"unknown decoder kind {self.kind!r}")
        if not self.name:
            raise ConfigError("decoder name must be non-empty")
        if self.budget_exponent is not None and self.budget_exponent <= 0:
            raise ConfigError("budget exponent must be positive when set")
        if self.budget_scale <= 0:
            raise ConfigError("budget scale must be positive")
        if self.z is not None and self.z <= 0:
            raise ConfigError("z must be positive when set")

    def budget(self, rho: float) -> float | None:
        if self.budget_exponent is None:
            return None
        b = self.budget_scale * rho**self.budget_exponent
        if self.budget_cap is not None:
            b = min(b, self.budget_cap)
        return b


@dataclass(frozen=True)
class SweepConfig:
    n_t: int
    n_r: int
    t: int
    code: str
    r_values: tuple[float, ...]
    rho_db_grid: tuple[float, ...]
    decoders: tuple[DecoderSpec, ...]
    trials: int
    master_seed: int
    out_dir: str | None = None
    noise_scale: float = 1.0
    fading: str = "rayleigh-iid"
    raw_log: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.decoders:
            raise ConfigError("at least one decoder required")
        names = [d.name for d in self.decoders]
        if len(set(names)) != len(names):
            raise ConfigError("decoder names must be unique")
        if not self.rho_db_grid:
            raise ConfigError("rho grid must be non-empty")
        if any(b <= a for a, b in zip(self.rho_db_grid, self.rho_db_grid[1:])):
            raise ConfigError("rho grid must be strictly increasing")
        if not self.r_values:
            raise ConfigError("at least one multiplexing gain required")
        r_max = min(self.n_t, self.n_r)
        if any(not 0 <= r <= r_max for r in self.r_values):
            raise ConfigError(f"r values must lie in [0, {r_max}]")
        if self.fading not in SUPPORTED_FADING:
            raise ConfigError(f"unsupported fading {self.fading!r}")
        if self.noise_scale < 0:
            raise ConfigError("noise scale must be >= 0")

    @property
    def rho_grid(self) -> tuple[float, ...]:
        return tuple(10.0 ** (db / 10.0) for db in self.rho_db_grid)


def load_config(path) -> SweepConfig:
    """Parse a JSON sweep description; raise ConfigError on bad content."""
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        system = doc["system"]
        decoders = tuple(
            DecoderSpec(
                name=d["name"],
                kind=d["kind"],
                z=d.get("z"),
                budget_exponent=d.get("budget_exponent"),
                budget_scale=d.get("budget_scale", 1.0),
                budget_cap=d.get("budget_cap"),
                delta=d.get("delta", DEFAULT_DELTA),
                enumeration=d.get("enumeration", "natural"),
                shrink_radius=bool(d.get("shrink_radius", False)),
                column_order=tuple(d["column_order"]) if "column_order" in d else None,
            )
            for d in doc["decoders"]
        )
        return SweepConfig(
            n_t=int(system["n_t"]),
            n_r=int(system["n_r"]),
            t=int(system["t"]),
            code=str(doc["code"]),
            r_values=tuple(float(x) for x in doc["r_values"]),
            rho_db_grid=tuple(float(x) for x in doc["rho_db"]),
            decoders=decoders,
            trials=int(doc["trials"]),
            master_seed=int(doc["master_seed"]),
            out_dir=doc.get("out_dir"),
            noise_scale=float(doc.get("noise_scale", 1.0)),
            fading=doc.get("fading", "rayleigh-iid"),
            raw_log=bool(doc.get("raw_log", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config field: {exc}") from exc


def resolve_out_dir(cfg: SweepConfig) -> Path:
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path.cwd()


@lru_cache(maxsize=8)
def _resolve_code(code: str, n_t: int, t: int) -> LatticeCodeSpec:
    if code.endswith(".json") or "/" in code:
        spec = load_code_spec(code)
        if spec.n_t != n_t or spec.t != t:
            raise ConfigError(
                f"code file is for {spec.n_t}x{spec.t}, config wants {n_t}x{t}"
            )
        return spec
    return builtin_code(code, n_t, t)


def _effective_z(dec: DecoderSpec, cfg: SweepConfig, r: float) -> float:
    if dec.z is not None:
        return dec.z
    return dmt_reference(r, cfg.n_t, cfg.n_r) + 1.0


@dataclass
class _DecoderAccumulator:
    counts: np.ndarray
    flops: list
    sigma: list
    nodes: list
    n_radius_exceed: int = 0


def _run_one_trial(cfg, code, rho_idx, r_idx, trial_idx, decoder_setups, raw_rows):
    """One paired trial: same (H, s, w) seen by every decoder."""
    rho = cfg.rho_grid[rho_idx]
    r = cfg.r_values[r_idx]
    rng = substream(cfg.master_seed, rho_idx, r_idx, trial_idx)
    ch = sample_channel(ChannelConfig(cfg.n_t, cfg.n_r, cfg.t, cfg.fading), rng)
    m = effective_lattice_matrix(ch, code, rho, r)
    box = constellation(code, rho, r)
    s = rng.integers(box.lo, box.hi + 1)
    y = transmit(m, s, rng, cfg.noise_scale)
    alpha = regularization_alpha(rho, r, code.t, code.kappa)

    # residual of the transmitted point in the regularized frame, shared
    # by all z-radius decoders for the radius-exceed diagnostic
    pre = mmse_preprocess(m, alpha)
    target = receive_statistic(pre, y)
    resid_true = target - pre.r_mat @ s.astype(float)
    w_norm2 = float(resid_true @ resid_true)

    outcomes = []
    for dec, setup, acc in decoder_setups:
        xi, budget, perm, code_dec, box_dec = setup
        if perm is None:
            m_dec, s_dec = m, s
        else:
            m_dec = effective_lattice_matrix(ch, code_dec, rho, r)
            s_dec = s[list(perm)]
        if dec.kind == "exact-regularized":
            result = decode_exact_regularized(
                m_dec, alpha, y, xi,
                enumeration=dec.enumeration, shrink_radius=dec.shrink_radius,
            )
        elif dec.kind == "lr-regularized":
            result = decode_lr_regularized(
                m_dec,
                alpha,
                y,
                xi,
                flop_budget=budget,
                delta=dec.delta,
                enumeration=dec.enumeration,
                shrink_radius=dec.shrink_radius,
            )
        elif dec.kind == "ml-sd":
            result = decode_ml_sd(
                m_dec, y, box_dec, flop_budget=budget,
                enumeration=dec.enumeration, shrink_radius=dec.shrink_radius,
            )
        else:  # ml-sd-mmse
            result = decode_ml_sd(
                m_dec,
                y,
                box_dec,
                flop_budget=budget,
                mmse=True,
                alpha=alpha,
                enumeration=dec.enumeration,
                shrink_radius=dec.shrink_radius,
            )
        verdict = classify(result, s_dec, box_dec)
        acc.counts[_VERDICT_INDEX[verdict]] += 1
        acc.flops.append(result.total_flops)
        acc.sigma.append(result.sigma_min)
        acc.nodes.append(result.total_nodes)
        if dec.kind in ("exact-regularized", "lr-regularized") and w_norm2 > xi * xi:
            acc.n_radius_exceed += 1
        outcomes.append((dec.name, verdict, result))
        if raw_rows is not None:
            raw_rows.append(
                (
                    cfg.rho_db_grid[rho_idx],
                    r,
                    dec.name,
                    trial_idx,
                    verdict,
                    result.total_flops,
                    result.total_nodes,
                    result.sigma_min,
                )
            )
    return outcomes


def _chunk_worker(args):
    """Run trials [start, stop) of one grid cell; returns mergeable pieces."""
    cfg, rho_idx, r_idx, start, stop = args
    code = _resolve_code(cfg.code, cfg.n_t, cfg.t)
    rho = cfg.rho_grid[rho_idx]
    r = cfg.r_values[r_idx]
    decoder_setups = []
    for dec in cfg.decoders:
        xi = radius_from_z(_effective_z(dec, cfg, r), rho)
        budget = dec.budget(rho)
        if dec.column_order is not None:
            code_dec = permute_columns(code, dec.column_order)
        else:
            code_dec = code
        box_dec = constellation(code_dec, rho, r)
        acc = _DecoderAccumulator(
            counts=np.zeros(len(VERDICTS), dtype=np.int64), flops=[], sigma=[], nodes=[]
        )
        perm = dec.column_order
        decoder_setups.append((dec, (xi, budget, perm, code_dec, box_dec), acc))
    raw_rows = [] if cfg.raw_log else None
    for trial_idx in range(start, stop):
        _run_one_trial(cfg, code, rho_idx, r_idx, trial_idx, decoder_setups, raw_rows)
    return (
        rho_idx,
        r_idx,
        start,
        [
            (
                acc.counts,
                np.array(acc.flops),
                np.array(acc.sigma),
                np.array(acc.nodes, dtype=np.int64),
                acc.n_radius_exceed,
            )
            for _, _, acc in decoder_setups
        ],
        raw_rows,
    )


def run_sweep(cfg: SweepConfig, n_workers: int = 1):
    """Execute the whole grid; returns (records, raw_rows).

    records come out ordered by (rho, r, decoder-config-order); raw_rows
    is None unless cfg.raw_log, else one tuple per (trial, decoder) in
    deterministic order.
    """
    jobs = []
    for rho_idx in range(len(cfg.rho_db_grid)):
        for r_idx in range(len(cfg.r_values)):
            for start in range(0, cfg.trials, CHUNK_TRIALS):
                stop = min(start + CHUNK_TRIALS, cfg.trials)
                jobs.append((cfg, rho_idx, r_idx, start, stop))
    if n_workers <= 1:
        results = [_chunk_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_chunk_worker, jobs, chunksize=1))
    # merge in trial order, which is deterministic by construction
    results.sort(key=lambda item: (item[0], item[1], item[2]))
    records = []
    raw_rows = [] if cfg.raw_log else None
    for rho_idx in range(len(cfg.rho_db_grid)):
        for r_idx in range(len(cfg.r_values)):
            cell = [res for res in results if res[0] == rho_idx and res[1] == r_idx]
            for d_idx, dec in enumerate(cfg.decoders):
                counts = np.zeros(len(VERDICTS), dtype=np.int64)
                flops = []
                sigma = []
                nodes = []
                exceed = 0
                for _, _, _, per_dec, _ in cell:
                    c, f, sg, nd, ex = per_dec[d_idx]
                    counts += c
                    flops.append(f)
                    sigma.append(sg)
                    nodes.append(nd)
                    exceed += ex
                records.append(
                    SweepRecord(
                        rho=cfg.rho_grid[rho_idx],
                        r=cfg.r_values[r_idx],
                        decoder=dec.name,
                        trials=cfg.trials,
                        verdict_counts={
                            v: int(counts[i]) for i, v in enumerate(VERDICTS)
                        },
                        flop_samples=np.concatenate(flops),
                        sigma_min_samples=np.concatenate(sigma),
                        node_samples=np.concatenate(nodes),
                        n_radius_exceed=exceed,
                    )
                )
            if raw_rows is not None:
                for _, _, _, _, rows in cell:
                    raw_rows.extend(rows)
    return records, raw_rows


def write_records_csv(records, path):
    """Emit the fixed-schema per-cell summary."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            counts = rec.verdict_counts
            writer.writerow(
                [
                    _fmt(10.0 * math.log10(rec.rho)),
                    _fmt(rec.r),
                    rec.decoder,
                    rec.trials,
                    counts["correct"],
                    counts["lattice-error"],
                    counts["out-of-codebook"],
                    counts["timeout"],
                    counts["empty-sphere"],
                    _fmt(float(np.quantile(rec.flop_samples, 0.50))),
                    _fmt(float(np.quantile(rec.flop_samples, 0.90))),
                    _fmt(float(np.quantile(rec.flop_samples, 0.99))),
                    _fmt(float(rec.flop_samples.max())),
                    _fmt(float(np.quantile(rec.sigma_min_samples, 0.01)))
                    if rec.sigma_min_samples is not None
                    else "",
                ]
            )


def write_raw_log(raw_rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rho_db", "r", "decoder", "trial", "verdict", "flops", "nodes", "sigma_min"]
        )
        for row in raw_rows:
            rho_db, r, name, trial, verdict, flops, nodes, sigma = row
            writer.writerow(
                [_fmt(rho_db), _fmt(r), name, trial, verdict, _fmt(flops), nodes, _fmt(sigma)]
            )


def read_records_csv(path):
    """Summary rows, parsed back to plain dicts (samples are quantile-only)."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_raw_records(path) -> list[SweepRecord]:
    """Rebuild full SweepRecords from the per-trial log."""
    cells: dict[tuple, dict] = {}
    order: list[tuple] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["rho_db"]), float(row["r"]), row["decoder"])
            if key not in cells:
                cells[key] = {
                    "counts": {v: 0 for v in VERDICTS},
                    "flops": [],
                    "nodes": [],
                    "sigma": [],
                }
                order.append(key)
            cell = cells[key]
            cell["counts"][row["verdict"]] += 1
            cell["flops"].append(float(row["flops"]))
            cell["nodes"].append(int(row["nodes"]))
            cell["sigma"].append(float(row["sigma_min"]))
    records = []
    for key in order:
        rho_db, r, decoder = key
        cell = cells[key]
        trials = len(cell["flops"])
        records.append(
            SweepRecord(
                rho=10.0 ** (rho_db / 10.0),
                r=r,
                decoder=decoder,
                trials=trials,
                verdict_counts=cell["counts"],
                flop_samples=np.array(cell["flops"]),
                sigma_min_samples=np.array(cell["sigma"]),
                node_samples=np.array(cell["nodes"], dtype=np.int64),
            )
        )
    return records


def _fmt(x) -> str:
    return "%.10g" % float(x)


def emit_plots(records, cfg: SweepConfig, out_dir) -> list[Path]:
    """Per-figure data files plus a gnuplot script.

    Log-log figures carry ln-transformed columns, stated in each header.
    Returns the list of written paths; empty records produce nothing but
    a notice on stdout.
    """
    out_dir = Path(out_dir)
    if not records:
        print("emit_plots: no records, nothing written")
        return []
    written = []
    by_decoder_r: dict[tuple, list] = {}
    for rec in records:
        by_decoder_r.setdefault((rec.r,), []).append(rec)
    decoder_names = [d.name for d in cfg.decoders]
    for (r_val,), recs in sorted(by_decoder_r.items()):
        tag = ("%g" % r_val).replace(".", "p")
        rhos = sorted({rec.rho for rec in recs})
        groups = {name: {rec.rho: rec for rec in recs if rec.decoder == name} for name in decoder_names}

        pe_path = out_dir / f"pe_vs_rho_r{tag}.dat"
        with open(pe_path, "w") as fh:
            fh.write("# error rate vs SNR (log-log): ln_rho, rho_db, then one P_e column per decoder\n")
            fh.write("# decoders: " + " ".join(decoder_names) + "\n")
            for rho in rhos:
                cols = [_fmt(math.log(rho)), _fmt(10 * math.log10(rho))]
                for name in decoder_names:
                    rec = groups[name][rho]
                    cols.append(_fmt(max(rec.error_rate, 0.0)))
                fh.write(" ".join(cols) + "\n")
        written.append(pe_path)

        cx_path = out_dir / f"complexity_r{tag}.dat"
        with open(cx_path, "w") as fh:
            fh.write(
                "# flop quantiles vs SNR (log-log): ln_rho, rho_db, then p50/p99 per decoder,"
                " last column = theoretical rho^cbar(r) overlay\n"
            )
            fh.write("# decoders: " + " ".join(decoder_names) + "\n")
            exponent = cbar(r_val, cfg.n_t, cfg.t)
            for rho in rhos:
                cols = [_fmt(math.log(rho)), _fmt(10 * math.log10(rho))]
                for name in decoder_names:
                    rec = groups[name][rho]
                    cols.append(_fmt(float(np.quantile(rec.flop_samples, 0.5))))
                    cols.append(_fmt(float(np.quantile(rec.flop_samples, 0.99))))
                cols.append(_fmt(rho**exponent))
                fh.write(" ".join(cols) + "\n")
        written.append(cx_path)

        if len(decoder_names) > 1:
            gap_path = out_dir / f"gap_r{tag}.dat"
            base = groups[decoder_names[0]]
            with open(gap_path, "w") as fh:
                fh.write(
                    "# error-ratio vs SNR: rho_db, then one column per non-baseline decoder"
                    f" (baseline = {decoder_names[0]}; blank when baseline errors are zero)\n"
                )
                for rho in rhos:
                    cols = [_fmt(10 * math.log10(rho))]
                    base_rec = base[rho]
                    for name in decoder_names[1:]:
                        rec = groups[name][rho]
                        if base_rec.n_errors == 0:
                            cols.append("nan")
                        else:
                            cols.append(_fmt(rec.n_errors / base_rec.n_errors))
                    fh.write(" ".join(cols) + "\n")
            written.append(gap_path)

    script = out_dir / PLOT_SCRIPT_NAME
    with open(script, "w") as fh:
        fh.write("# gnuplot script for the sweep figures\n")
        fh.write("set datafile missing 'nan'\n")
        for path in written:
            stem = path.stem
            fh.write(f"\nset output '{stem}.png'\nset terminal pngcairo\n")
            if stem.startswith("pe_vs_rho"):
                fh.write("set logscale y\nset xlabel 'SNR (dB)'\nset ylabel 'error rate'\n")
                fh.write(f"plot for [i=3:*] '{path.name}' using 2:i with linespoints title columnheader(i)\n")
            elif stem.startswith("complexity"):
                fh.write("set logscale y\nset xlabel 'SNR (dB)'\nset ylabel 'flops'\n")
                fh.write(f"plot for [i=3:*] '{path.name}' using 2:i with linespoints\n")
            else:
                fh.write("set xlabel 'SNR (dB)'\nset ylabel 'error ratio'\n")
                fh.write(f"plot for [i=2:*] '{path.name}' using 1:i with linespoints\n")
    written.append(script)
    return written
