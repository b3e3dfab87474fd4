#!/usr/bin/env python3
"""Run a sweep config end to end and summarize the complexity story.

Runs the Monte Carlo sweep, writes the CSV/raw/plot artifacts, then prints
per-decoder error rates, flop quantiles, the fitted complexity exponent,
and (when a budgeted variant is present) the paired error-ratio curve
against the exact decoder.

Usage:
    python3 scripts/complexity_separation.py [--config FILE] [--workers N]
                                             [--d-target X]
"""

import argparse
import math
from pathlib import Path

import numpy as np

from latticelab.analysis import estimate_exponent, estimate_gap
from latticelab.harness import (
    CSV_NAME,
    RAW_NAME,
    emit_plots,
    load_config,
    resolve_out_dir,
    run_sweep,
    write_raw_log,
    write_records_csv,
)

DEFAULT_CONFIG = Path(__file__).resolve().parent / "configs" / "sweep-2x2-quick.json"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=DEFAULT_CONFIG)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--d-target", type=float, default=1.0)
    args = ap.parse_args()

    cfg = load_config(args.config)
    print(f"running {args.config.name}: {cfg.trials} trials x {len(cfg.rho_db_grid)} SNR "
          f"points x {len(cfg.decoders)} decoders")
    records, raw_rows = run_sweep(cfg, n_workers=args.workers)

    out_dir = resolve_out_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out_dir / CSV_NAME)
    if raw_rows is not None:
        write_raw_log(raw_rows, out_dir / RAW_NAME)
    emit_plots(records, cfg, out_dir)
    print(f"artifacts in {out_dir}/")

    by_decoder = {}
    for rec in records:
        by_decoder.setdefault(rec.decoder, []).append(rec)

    print(f"\n{'decoder':>12} {'rho_db':>7} {'P(err)':>9} {'flops p50':>10} "
          f"{'p99':>9} {'max':>10}")
    for name, recs in by_decoder.items():
        for rec in recs:
            print(f"{name:>12} {10 * math.log10(rec.rho):>7.0f} {rec.error_rate:>9.5f} "
                  f"{np.percentile(rec.flop_samples, 50):>10.0f} "
                  f"{np.percentile(rec.flop_samples, 99):>9.0f} "
                  f"{rec.flop_samples.max():>10.0f}")

    print(f"\nfitted complexity exponents (d_target={args.d_target}):")
    for name, recs in by_decoder.items():
        try:
            c_hat = estimate_exponent(recs, d_target=args.d_target)
            print(f"  {name:>12}: c_hat = {c_hat:+.4f}")
        except Exception as exc:  # tail unreachable at tiny trial counts
            print(f"  {name:>12}: not estimable ({exc})")

    exact = by_decoder.get("exact")
    budgeted = by_decoder.get("lr-budgeted")
    if exact and budgeted:
        print("\npaired error ratio, budgeted vs exact (1-sigma):")
        for point in estimate_gap(exact, budgeted):
            if point.ratio is None:
                print(f"  {10 * math.log10(point.rho):>5.0f} dB: no exact errors")
            else:
                print(f"  {10 * math.log10(point.rho):>5.0f} dB: "
                      f"{point.ratio:.4f} +- {point.sigma:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
