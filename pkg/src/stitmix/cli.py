"""Command line entry point: ``stitmix {simulate,bound,estimate-beta,verify,render}``.

Exit codes: 0 ok, 1 runtime error, 2 config error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path


from . import io, mixing, stit, verify
from .config import ConfigError, RunConfig, load_config
from .geometry import Window, polytope_from_json
from .replicate import replicate_rng
from .tessellation import Tessellation

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("stitmix")


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(cfg: RunConfig) -> int:
    m = cfg.measure.build()
    out = _outdir(cfg)
    state = stit.simulate(m, Window(cfg.b, m.dim), cfg.t, replicate_rng(cfg.seed, 0))
    stit.check_invariants(state)
    io.write_json(out / "tessellation.json", state.to_json())
    T = state.tessellation()
    if m.dim == 2:
        io.write_svg(out / "tessellation.svg", T)
    io.write_csv(
        out / "cells.csv",
        ["id", "volume", "lambda_hit", "centroid", "window_facet"],
        [(k, c.volume, state.rates[k], " ".join(repr(float(x)) for x in c.centroid), int(c.has_window_facet()))
         for k, c in sorted(state.cells.items())],
    )
    print(f"{len(T)} cells, zeta={state.zeta:.6g}, {len(state.jump_log)} jumps -> {out}")
    return EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    m = cfg.measure.build()
    out = _outdir(cfg)
    lam = m.lambda_hit(Window(cfg.a, m.dim).polytope())
    z = mixing.zeta_samples(m, cfg.a, cfg.t, cfg.replicates, cfg.seed, cfg.threads)
    rows = []
    for b in cfg.b_grid:
        L = m.big_L(cfg.a, b)
        for u in cfg.us:
            s = min(b ** -u, cfg.t * (1 - 1e-9))
            for v in cfg.vs:
                M = b ** v
                p = mixing.empirical_tail(z, M)
                x = mixing.BetaBoundInputs(cfg.a, b, cfg.t, s, M, m.dim, lam, L, p)
                rows.append((b, u, v, s, M, L, p,
                             mixing.theorem2_bound(x, clamp=False), mixing.theorem2_bound(x),
                             mixing.simplified_bound(x, clamp=False), mixing.simplified_bound(x)))
    io.write_csv(out / "bound.csv",
                 ["b", "u", "v", "s", "M", "L", "p_tail", "bound_raw", "bound",
                  "simplified_raw", "simplified"], rows)
    print(f"{len(rows)} bound evaluations -> {out / 'bound.csv'}")
    return EXIT_OK


def cmd_estimate_beta(cfg: RunConfig) -> int:
    m = cfg.measure.build()
    if m.dim != 2:
        raise ConfigError("beta estimation uses planar probe layouts; set measure.dim to 2")
    out = _outdir(cfg)
    res = mixing.decay_experiment(m, cfg.a, cfg.t, cfg.b_grid, cfg.replicates, cfg.seed, cfg.threads,
                                  k=cfg.probes, layout=cfg.layout, us=cfg.us, vs=cfg.vs)
    rows = []
    for r in res.rows:
        rows.append((r.b, "beta_hat", r.beta_hat, r.beta_stderr))
        rows.append((r.b, "bound", r.bound, 0.0))
        rows.append((r.b, "bound_raw", r.bound_raw, 0.0))
        rows.append((r.b, "free_bound_raw", r.free_bound_raw, 0.0))
    io.write_csv(out / "decay.csv", ["b", "estimator", "value", "stderr"], rows)
    print(f"bound slope {res.slope_bound:.3f} (raw {res.slope_raw:.3f}), "
          f"Spearman rho(beta_hat, b) {res.spearman_rho:.3f} -> {out / 'decay.csv'}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = verify.run_battery(cfg)
    for r in results:
        print(r.line())
    out = _outdir(cfg)
    io.write_csv(out / "verify.csv", ["check", "kind", "status", "detail"],
                 [(r.name, r.kind, r.status, r.detail) for r in results])
    failed = [r for r in results if r.status == verify.FAIL]
    print(f"{len(results) - len(failed)}/{len(results)} checks not failing")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_render(cfg: RunConfig, snapshot: str) -> int:
    d = io.read_json(snapshot)
    T = Tessellation(polytope_from_json(d["window"]), [polytope_from_json(c) for c in d["cells"]])
    out = _outdir(cfg)
    path = io.write_svg(out / (Path(snapshot).stem + ".svg"), T)
    print(f"rendered {len(T)} cells -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--out")
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="stitmix", description="STIT tessellation simulation and mixing checks")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one tessellation and write JSON/SVG/CSV")
    sub.add_parser("bound", parents=[common], help="evaluate the mixing bounds over the (s, M, b) grid")
    sub.add_parser("estimate-beta", parents=[common], help="run the decay experiment")
    sub.add_parser("verify", parents=[common], help="run the invariant battery")
    r = sub.add_parser("render", parents=[common], help="render a JSON snapshot to SVG")
    r.add_argument("snapshot")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        strict = args.command != "verify"
        cfg = load_config(args.config, strict_measure=strict)
        cfg = cfg.with_overrides(strict, seed=args.seed, replicates=args.replicates, out=args.out,
                                 threads=args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "bound":
            return cmd_bound(cfg)
        if args.command == "estimate-beta":
            return cmd_estimate_beta(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_render(cfg, args.snapshot)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
