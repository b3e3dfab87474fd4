"""Command-line entry points: sweep, analyze, formulas, selftest.

Exit codes: 0 success, 2 configuration error, 3 I/O error.  The selftest
subcommand returns 1 when an internal oracle check fails.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    InsufficientDataError,
    c_rld_min_delay,
    cbar,
    cbar_via_optimization,
    dmt_reference,
    estimate_exponent,
    estimate_gap,
)
from .harness import (
    CSV_NAME,
    RAW_NAME,
    ConfigError,
    emit_plots,
    load_config,
    read_raw_records,
    read_records_csv,
    resolve_out_dir,
    run_sweep,
    write_raw_log,
    write_records_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    records, raw_rows = run_sweep(cfg, n_workers=args.workers)
    out_dir = resolve_out_dir(cfg)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_records_csv(records, out_dir / CSV_NAME)
        if raw_rows is not None:
            write_raw_log(raw_rows, out_dir / RAW_NAME)
        emit_plots(records, cfg, out_dir)
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(records)} records to {out_dir / CSV_NAME}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    if args.d_target < 0:
        print("d-target must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    in_dir = Path(args.in_dir)
    csv_path = in_dir / CSV_NAME
    if not csv_path.exists():
        print(f"missing {csv_path}", file=sys.stderr)
        return EXIT_IO
    try:
        rows = read_records_csv(csv_path)
    except OSError as exc:
        print(f"cannot read {csv_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    derived = []

    # error-ratio table straight from the summary counts
    decoders = []
    for row in rows:
        if row["decoder"] not in decoders:
            decoders.append(row["decoder"])
    baseline = args.baseline or decoders[0]
    if baseline not in decoders:
        print(f"baseline decoder {baseline!r} not in records", file=sys.stderr)
        return EXIT_CONFIG
    by_cell = {(row["rho_db"], row["r"], row["decoder"]): row for row in rows}
    grid = sorted({(float(row["rho_db"]), row["rho_db"], row["r"]) for row in rows})
    print(f"error ratio vs baseline {baseline!r}:")
    for _, rho_db, r in grid:
        base = by_cell[(rho_db, r, baseline)]
        base_err = int(base["trials"]) - int(base["n_correct"])
        for name in decoders:
            if name == baseline:
                continue
            row = by_cell[(rho_db, r, name)]
            err = int(row["trials"]) - int(row["n_correct"])
            ratio = "undefined" if base_err == 0 else "%.4g" % (err / base_err)
            print(f"  rho_db={rho_db} r={r} {name}: {ratio}")
            derived.append(("gap_ratio", name, rho_db, r, ratio))

    raw_path = in_dir / RAW_NAME
    if raw_path.exists():
        records = read_raw_records(raw_path)
        groups: dict[tuple, list] = {}
        for rec in records:
            groups.setdefault((rec.decoder, rec.r), []).append(rec)
        print(f"complexity exponents at d_target={args.d_target}:")
        for (name, r), recs in sorted(groups.items()):
            try:
                est = estimate_exponent(recs, args.d_target)
            except (ValueError, InsufficientDataError) as exc:
                print(f"  {name} (r={r}): not estimable ({exc})")
                continue
            print(f"  {name} (r={r}): {est:.4f}")
            derived.append(("complexity_exponent", name, "", r, "%.6g" % est))
    else:
        print(f"no {RAW_NAME}; skipping exponent estimation (enable raw_log to collect it)")

    try:
        with open(in_dir / "derived_metrics.csv", "w") as fh:
            fh.write("metric,decoder,rho_db,r,value\n")
            for metric, name, rho_db, r, value in derived:
                fh.write(f"{metric},{name},{rho_db},{r},{value}\n")
    except OSError as exc:
        print(f"cannot write derived metrics: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _cmd_formulas(args) -> int:
    n_t, t = args.n_t, args.t
    if n_t < 1 or t < 1:
        print("n-t and t must be positive", file=sys.stderr)
        return EXIT_CONFIG
    print(f"closed-form table for n_t={n_t}, t={t} (diversity column assumes n_r=n_t)")
    print(f"{'r':>5} {'c_min_delay':>12} {'cbar':>8} {'cbar_opt':>9} {'diversity':>10}")
    for r in np.arange(0.0, n_t + 1e-9, 0.1):
        r = round(float(r), 10)
        print(
            f"{r:5.1f} {c_rld_min_delay(r, n_t):12.4f} {cbar(r, n_t, t):8.4f}"
            f" {cbar_via_optimization(r, n_t, t):9.4f} {dmt_reference(r, n_t, n_t):10.4f}"
        )
    return EXIT_OK


def _selftest_sphere_cvp() -> bool:
    from .linalg import singular_values, thin_qr
    from .sphere import SearchConfig, brute_force_cvp, sphere_search

    rng = np.random.default_rng(101)
    for _ in range(50):
        kappa = int(rng.integers(1, 4))
        _, r_mat = thin_qr(rng.standard_normal((kappa + 3, kappa)))
        y = 1.5 * rng.standard_normal(kappa)
        bound = int(np.ceil((np.linalg.norm(y) + 3.0) / singular_values(r_mat)[0])) + 1
        vec, metric = brute_force_cvp(r_mat, y, bound)
        out = sphere_search(r_mat, y, SearchConfig(radius=math.sqrt(metric) + 1e-6))
        if out.best is None or not np.array_equal(out.best, vec):
            return False
    return True


def _selftest_sphere_ml() -> bool:
    from .codes import ConstellationBox
    from .decoders import decode_ml_sd
    from .sphere import brute_force_ml

    rng = np.random.default_rng(102)
    box = ConstellationBox(lo=-2 * np.ones(3, dtype=np.int64), hi=2 * np.ones(3, dtype=np.int64))
    for _ in range(30):
        m = rng.standard_normal((5, 3))
        y = m @ rng.integers(-2, 3, size=3) + rng.standard_normal(5)
        vec, _ = brute_force_ml(m, y, box)
        out = decode_ml_sd(m, y, box)
        if not np.array_equal(out.s_hat, vec):
            return False
    return True


def _selftest_reduction() -> bool:
    from .linalg import thin_qr
    from .preprocess import lll_reduce

    rng = np.random.default_rng(103)
    for _ in range(100):
        kappa = int(rng.integers(2, 6))
        _, r_mat = thin_qr(rng.standard_normal((kappa + 2, kappa)))
        red = lll_reduce(r_mat)
        det = round(abs(np.linalg.det(red.t_mat.astype(float))))
        if det != 1:
            return False
        if not np.allclose(red.q_tilde @ red.r_tilde, r_mat @ red.t_mat, atol=1e-8):
            return False
    return True


def _selftest_formulas() -> bool:
    for r in np.arange(0.0, 2.0 + 1e-9, 0.1):
        if abs(cbar(float(r), 2, 2) - cbar_via_optimization(float(r), 2, 2)) > 2 * 2 * 2 / 64:
            return False
    return True


def _selftest_lr_equivalence() -> bool:
    from .channel import ChannelConfig, effective_lattice_matrix, sample_channel, substream, transmit
    from .codes import builtin_code, constellation
    from .decoders import decode_exact_regularized, decode_lr_regularized
    from .preprocess import regularization_alpha
    from .sphere import radius_from_z

    code = builtin_code("threaded-2x2", 2, 2)
    for seed in range(100):
        rng = substream(seed, 7)
        ch = sample_channel(ChannelConfig(2, 2, 2), rng)
        m = effective_lattice_matrix(ch, code, 100.0, 1.0)
        box = constellation(code, 100.0, 1.0)
        s = rng.integers(box.lo, box.hi + 1)
        y = transmit(m, s, rng)
        alpha = regularization_alpha(100.0, 1.0, 2, 8)
        xi = radius_from_z(2.0, 100.0)
        exact = decode_exact_regularized(m, alpha, y, xi)
        lr = decode_lr_regularized(m, alpha, y, xi)
        if abs(exact.metric - lr.metric) > 1e-8:
            return False
    return True


def _cmd_selftest(_args) -> int:
    suites = [
        ("sphere-vs-cvp-oracle", _selftest_sphere_cvp),
        ("sphere-vs-ml-oracle", _selftest_sphere_ml),
        ("reduction-invariants", _selftest_reduction),
        ("closed-form-vs-optimization", _selftest_formulas),
        ("lr-exact-equivalence", _selftest_lr_equivalence),
    ]
    failed = 0
    for name, fn in suites:
        ok = fn()
        print(f"{name}: {'pass' if ok else 'FAIL'}")
        failed += 0 if ok else 1
    return 1 if failed else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="latticelab",
        description="Lattice decoding experiments on the quasi-static MIMO channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a Monte Carlo sweep from a JSON config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_an = sub.add_parser("analyze", help="estimate exponents and gaps from sweep outputs")
    p_an.add_argument("--in", dest="in_dir", required=True)
    p_an.add_argument("--d-target", dest="d_target", type=float, required=True)
    p_an.add_argument("--baseline", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_f = sub.add_parser("formulas", help="print closed-form exponent/diversity tables")
    p_f.add_argument("--n-t", dest="n_t", type=int, required=True)
    p_f.add_argument("--t", dest="t", type=int, required=True)
    p_f.set_defaults(func=_cmd_formulas)

    p_st = sub.add_parser("selftest", help="run the built-in oracle checks")
    p_st.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
