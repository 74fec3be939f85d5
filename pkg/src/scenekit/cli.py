"""Command-line interface.

Subcommands: rasterize, vectorize, extract-agents, eval, noise, sample,
simulate, roundtrip, gen-corpus. Exit codes: 0 ok, 1 domain error, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import diffusion, io as sio, metrics, raster, simulate
from .vectorize import VectorizeConfig, vectorize
from .agents import ExtractConfig, extract_agents
from .errors import ScenekitError
from .scenario import Agent, AgentState, Scenario, normalize_scenario


def _score_dict(score: metrics.GeoTopoScore) -> dict:
    return {
        "geo": {"precision": score.geo[0], "recall": score.geo[1], "f1": score.geo[2]},
        "topo": {"precision": score.topo[0], "recall": score.topo[1], "f1": score.topo[2]},
        "matched": score.matched_count,
    }


def _print_score(score: metrics.GeoTopoScore) -> None:
    print(f"GEO  precision={score.geo[0]:.4f} recall={score.geo[1]:.4f} "
          f"f1={score.geo[2]:.4f}")
    print(f"TOPO precision={score.topo[0]:.4f} recall={score.topo[1]:.4f} "
          f"f1={score.topo[2]:.4f}")


def cmd_rasterize(args) -> int:
    s = normalize_scenario(sio.read_scenario(args.scenario))
    fm = raster.rasterize(s, args.size, args.size, args.stroke)
    raster.write_raster(fm, args.output)
    if args.png:
        raster.render_png(fm, args.png)
    return 0


def cmd_vectorize(args) -> int:
    fm = raster.read_raster(args.raster)
    cfg = VectorizeConfig(stroke=args.stroke, k_thresh=args.k_thresh)
    s = vectorize(fm, cfg)
    sio.write_scenario(s, args.output)
    return 0


def cmd_extract_agents(args) -> int:
    fm = raster.read_raster(args.raster)
    dets = extract_agents(fm, ExtractConfig(v_max=args.v_max))
    out = [{
        "x": round(d.center.x, 4), "y": round(d.center.y, 4),
        "heading": round(d.heading, 4), "speed": round(d.speed, 4),
        "length": round(d.length, 4), "width": round(d.width, 4),
        "pixels": d.pixel_count,
    } for d in dets]
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    gt = sio.read_scenario(args.gt)
    pred = sio.read_scenario(args.pred)
    score = metrics.evaluate(gt, pred, spacing=args.interp,
                             threshold=args.threshold,
                             subgraph_radius=args.radius)
    _print_score(score)
    if args.json:
        Path(args.json).write_text(
            json.dumps(_score_dict(score), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_noise(args) -> int:
    fm = raster.read_raster(args.raster)
    ns = diffusion.make_schedule(args.steps)
    rng = np.random.default_rng(args.seed)
    eps = rng.standard_normal(fm.channels.shape)
    noisy = diffusion.forward_noise(fm.channels, args.t, eps, ns)
    raster.write_raster(raster.FeatureMap(noisy, fm.meters_per_pixel, fm.origin),
                        args.output)
    return 0


def cmd_sample(args) -> int:
    ns = diffusion.make_schedule(args.steps)
    if args.denoiser == "oracle":
        if not args.target:
            raise ScenekitError("the oracle denoiser needs --target <raster>")
        target = raster.read_raster(args.target)
        den = diffusion.oracle_denoiser(target.channels, ns)
        mpp = target.meters_per_pixel
        shape = target.channels.shape
    else:
        den = (diffusion.zero_denoiser if args.denoiser == "zero"
               else diffusion.blur_denoiser())
        mpp = args.range / args.shape
        shape = (args.shape, args.shape, 3)
    rng = np.random.default_rng(args.seed)
    out = diffusion.sample(den, ns, shape, rng)
    r = shape[1] * mpp
    origin = raster.Waypoint(-r / 2 + mpp / 2, -r / 2 + mpp / 2)
    raster.write_raster(raster.FeatureMap(out, mpp, origin), args.output)
    return 0


def cmd_simulate(args) -> int:
    s = sio.read_scenario(args.scenario)
    g = simulate.lane_graph_from_scenario(s)
    futures = simulate.rollout(s, g, k=args.k, horizon=args.horizon, dt=args.dt)
    stem = Path(args.output_prefix)
    for i, f in enumerate(futures):
        out = simulate.future_to_scenario(s, f)
        sio.write_scenario(out, f"{stem}_{i}.json",
                           metadata={"probability": round(f.probability, 6)})
    print(f"wrote {len(futures)} futures to {stem}_*.json")
    return 0


def cmd_roundtrip(args) -> int:
    s = normalize_scenario(sio.read_scenario(args.scenario))
    fm = raster.rasterize(s, args.size, args.size, args.stroke)
    pred = vectorize(fm, VectorizeConfig(stroke=args.stroke))
    score = metrics.evaluate(s, pred)
    _print_score(score)
    return 0


def cmd_gen_corpus(args) -> int:
    if args.config:
        with open(args.config) as f:
            raw = json.load(f)
        cfg = sio.CorpusConfig(
            counts=raw.get("counts", {t: 2 for t in sio.TEMPLATES}),
            range_m=raw.get("range", 80.0),
            v_max=raw.get("v_max", 30.0),
            max_agents=raw.get("max_agents", 5),
        )
    else:
        cfg = sio.CorpusConfig()
    scenarios = sio.generate_synthetic_corpus(cfg, args.seed)
    os.makedirs(args.output_dir, exist_ok=True)
    for i, s in enumerate(scenarios):
        sio.write_scenario(s, os.path.join(args.output_dir, f"scenario_{i:04d}.json"))
    print(f"wrote {len(scenarios)} scenarios to {args.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenekit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rasterize", help="scenario file -> raster feature map")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--stroke", type=int, default=3)
    p.add_argument("--png", help="also write an RGB preview")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("vectorize", help="raster -> recovered scenario map")
    p.add_argument("raster")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--stroke", type=int, default=3)
    p.add_argument("--k-thresh", type=float, default=0.2)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("extract-agents", help="raster -> agent detections (JSON)")
    p.add_argument("raster")
    p.add_argument("--v-max", type=float, default=30.0)
    p.set_defaults(func=cmd_extract_agents)

    p = sub.add_parser("eval", help="GEO/TOPO scores between two scenario files")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--threshold", type=float, default=1.5)
    p.add_argument("--interp", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=50.0)
    p.add_argument("--json", help="also write scores to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise", help="apply forward diffusion noise to a raster")
    p.add_argument("raster")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("sample", help="reverse-diffusion sample a raster")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--shape", type=int, default=256)
    p.add_argument("--range", type=float, default=80.0)
    p.add_argument("--denoiser", choices=["oracle", "zero", "blur"], default="zero")
    p.add_argument("--target", help="clean raster for the oracle denoiser")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="roll out K joint futures")
    p.add_argument("scenario")
    p.add_argument("-o", "--output-prefix", default="future")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--horizon", type=float, default=8.0)
    p.add_argument("--dt", type=float, default=0.1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("roundtrip", help="rasterize -> vectorize -> eval")
    p.add_argument("scenario")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--stroke", type=int, default=3)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("gen-corpus", help="write a synthetic scenario corpus")
    p.add_argument("--config", help="JSON corpus config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output-dir", default="corpus")
    p.set_defaults(func=cmd_gen_corpus)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SCENEKIT_LOG", "WARNING"))
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ScenekitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
