"""Command-line entry point wiring the pipeline end to end.

Exit codes: 1 for usage errors, 2 for data errors (missing or malformed
files, bad config values), 3 for numerical failures (non-finite losses,
failed gradient checks).
"""

from __future__ import annotations

import dataclasses
import hashlib
import importlib.metadata
import importlib.resources
import json
import sys
from pathlib import Path

import click
import numpy as np
import torch

from . import gradcheck as gradcheck_mod
from . import images
from . import metrics as metrics_mod
from . import ops
from . import rasterizer as ras
from . import reconstruct as rec
from . import scene as sc
from . import scenegen
from . import sos
from . import styleloss
from . import vgg
from . import vggw

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

click.UsageError.exit_code = EXIT_USAGE

_DATA_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    ValueError,  # covers format errors, config coercion, shape errors
)
_NUMERICAL_ERRORS = (RuntimeError,)  # SosError, ReconError, RasterizerError


def _run(fn):
    """Execute a command body, mapping exceptions to the exit-code contract."""
    try:
        fn()
    except _DATA_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except _NUMERICAL_ERRORS as exc:
        click.echo(f"numerical error: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


# ---------------------------------------------------------------------------
# Config files: flat KEY=VALUE documents mirroring the config dataclasses.
# ---------------------------------------------------------------------------


def load_config_file(path) -> dict[str, str]:
    values = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected KEY=VALUE, got {line!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def _coerce(current, raw: str, key: str):
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"config key {key}: expected a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        return tuple(float(p) for p in parts)
    return raw


def apply_config(cfg, values: dict[str, str]):
    """Set flat KEY=VALUE entries onto a config dataclass.

    Keys may name a field of the config itself or of one of its nested
    dataclass fields (loss weights, render settings); unknown keys fail.
    """
    nested = [getattr(cfg, f.name) for f in dataclasses.fields(cfg)
              if dataclasses.is_dataclass(getattr(cfg, f.name))]
    for key, raw in values.items():
        for target in [cfg, *nested]:
            if hasattr(target, key) and not dataclasses.is_dataclass(
                getattr(target, key)
            ):
                setattr(target, key, _coerce(getattr(target, key), raw, key))
                break
        else:
            raise ValueError(f"unknown config key {key!r} for "
                             f"{type(cfg).__name__}")
    return cfg


def config_hash(cfg) -> str:
    blob = repr(dataclasses.asdict(cfg)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_sidecar(ply_path, cfg, seed: int, iterations: int):
    sidecar = {
        "iterations": iterations,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "config": {k: v for k, v in dataclasses.asdict(cfg).items()
                   if isinstance(v, (int, float, str, bool, type(None)))},
    }
    Path(str(ply_path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


# ---------------------------------------------------------------------------


def default_weights_path() -> Path:
    return Path(importlib.resources.files("splatstyle") / "data" / "vgg19.vggw")


def _load_network(weights: str | None) -> vgg.VggNetwork:
    path = Path(weights) if weights else default_weights_path()
    if not path.exists():
        raise FileNotFoundError(f"VGG weights file not found: {path}")
    return vgg.load_weights(path)


def _load_style(path) -> torch.Tensor:
    return torch.from_numpy(images.load_png(path)).to(torch.float32)


def _version_string() -> str:
    try:
        version = importlib.metadata.version("splatstyle")
    except importlib.metadata.PackageNotFoundError:
        version = "unknown"
    wp = default_weights_path()
    if wp.exists():
        whash = hashlib.sha256(wp.read_bytes()).hexdigest()[:16]
    else:
        whash = "missing"
    return f"splatstyle {version} (weights {whash})"


def _print_version(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(_version_string())
    ctx.exit(0)


@click.group()
@click.option("--version", is_flag=True, callback=_print_version,
              expose_value=False, is_eager=True,
              help="Print version and weights-hash provenance.")
@click.option("--deterministic", is_flag=True,
              help="Single-threaded, bit-reproducible execution.")
@click.option("--threads", type=int, default=None,
              help="Cap worker threads (default: available cores).")
@click.pass_context
def main(ctx, deterministic, threads):
    """Differentiable Gaussian-splat stylization pipeline."""
    if deterministic:
        threads = 1
    if threads is not None:
        if threads < 1:
            raise click.UsageError("--threads must be >= 1")
        torch.set_num_threads(threads)
        try:
            import numba
            numba.set_num_threads(threads)
        except (ImportError, ValueError):
            pass
    ctx.obj = {"deterministic": deterministic}


@main.command()
@click.option("--preset", required=True,
              type=click.Choice(scenegen.PRESETS))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--views", type=int, default=24, show_default=True)
@click.option("--size", type=int, default=512, show_default=True)
@click.option("--density", type=int, default=80, show_default=True)
@click.option("--out", required=True, type=click.Path())
def gen(preset, seed, views, size, density, out):
    """Generate a synthetic multiview dataset."""
    def body():
        ds = scenegen.gen_scene(preset, seed, n_views=views, size=size,
                                density=density)
        scenegen.save_dataset(out, ds)
        click.echo(f"wrote {views} views to {out}")
    _run(body)


@main.command()
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_file", type=click.Path(exists=True))
@click.option("--iterations", type=int, default=None)
@click.option("--gaussians", type=int, default=2000, show_default=True,
              help="Target splat count when subsampling seed points.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def fit(data_dir, config_file, iterations, gaussians, seed, out):
    """Reconstruct a splat scene from a dataset."""
    def body():
        cfg = rec.ReconConfig()
        if config_file:
            apply_config(cfg, load_config_file(config_file))
        if iterations is not None:
            cfg.iterations = iterations
        if seed is not None:
            cfg.seed = seed
        cfg.render.background = scenegen.BACKGROUND
        views, cams, seeds = scenegen.load_dataset(data_dir)
        if len(seeds) > gaussians:
            idx = np.random.default_rng(cfg.seed).choice(
                len(seeds), gaussians, replace=False)
            seeds = seeds[np.sort(idx)]
        elif len(seeds) < gaussians:
            rng = np.random.default_rng(cfg.seed)
            extra = seeds[rng.integers(len(seeds), size=gaussians - len(seeds))]
            seeds = np.concatenate([seeds, extra + rng.normal(0, 0.01, extra.shape)])
        scene = rec.init_scene(rec.InitSpec(seed_points=seeds),
                               mean_color=rec.mean_view_color(views))
        fitted, curve = rec.fit(scene, views, cams, cfg)
        sc.save_ply(out, fitted)
        _write_sidecar(out, cfg, cfg.seed, cfg.iterations)
        rec.save_loss_curve(str(out) + ".curve.csv", curve)
        final = f"final loss {curve[-1][1]:.5f}; " if curve else ""
        click.echo(f"{final}wrote {out}")
    _run(body)


@main.command()
@click.option("--scene", "scene_ply", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--style", "style_png", required=True, type=click.Path(exists=True))
@click.option("--config", "config_file", type=click.Path(exists=True))
@click.option("--tau", type=int, default=None)
@click.option("--coarse-iters", type=int, default=None)
@click.option("--sos-iters", type=int, default=None)
@click.option("--tile", "tile_size", type=int, default=None,
              help="Tile side (px) for the tiled style gradient.")
@click.option("--optimize", type=click.Choice(sorted(sos.OPTIMIZE_GROUPS)),
              default=None)
@click.option("--schedule", type=click.Choice(["sos", "coarse-to-fine"]),
              default="sos", show_default=True)
@click.option("--skip-coarse", is_flag=True)
@click.option("--seed", type=int, default=None)
@click.option("--weights", type=click.Path(), default=None,
              help="VGGW weights file (default: packaged).")
@click.option("--out", required=True, type=click.Path())
def stylize(scene_ply, data_dir, style_png, config_file, tau, coarse_iters,
            sos_iters, tile_size, optimize, schedule, skip_coarse, seed,
            weights, out):
    """Stylize a splat scene's colors against a style image."""
    def body():
        cfg = sos.SOSConfig()
        if config_file:
            apply_config(cfg, load_config_file(config_file))
        for attr, val in (("tau", tau), ("coarse_iterations", coarse_iters),
                          ("sos_iterations", sos_iters),
                          ("tile_target_px", tile_size),
                          ("optimize", optimize), ("seed", seed)):
            if val is not None:
                setattr(cfg, attr, val)
        if skip_coarse:
            cfg.coarse_iterations = 0
        cfg.render.background = scenegen.BACKGROUND
        cfg.checkpoint_path = cfg.checkpoint_path or str(out) + ".checkpoint.ply"
        scene = sc.load_ply(scene_ply)
        views, cams, _ = scenegen.load_dataset(data_dir)
        style = _load_style(style_png)
        net = _load_network(weights)
        runner = (sos.stylize_coarse_to_fine if schedule == "coarse-to-fine"
                  else sos.stylize)
        styled, curves = runner(scene, views, cams, style, cfg, net)
        sc.save_ply(out, styled)
        _write_sidecar(out, cfg, cfg.seed,
                       cfg.coarse_iterations + cfg.sos_iterations)
        sos.save_curves(str(out) + ".curves.csv", curves)
        click.echo(f"wrote {out}")
    _run(body)


def _render_to_dir(scene, cams, out_dir, background):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ras.RenderConfig(background=background)
    for i, cam in enumerate(cams):
        name = cam.image_path or f"frame_{i:04d}.png"
        images.save_png(out / name, ras.render(scene, cam, cfg).image)
    return len(cams)


@main.command()
@click.option("--scene", "scene_ply", required=True, type=click.Path(exists=True))
@click.option("--cameras", "cameras_json", required=True,
              type=click.Path(exists=True))
@click.option("--background", default="0.5,0.5,0.5", show_default=True)
@click.option("--out", required=True, type=click.Path())
def render(scene_ply, cameras_json, background, out):
    """Render PNG frames at the given camera poses."""
    def body():
        scene = sc.load_ply(scene_ply)
        cams = sc.load_cameras(cameras_json)
        bg = _coerce((0.0,), background, "background")
        n = _render_to_dir(scene, cams, out, bg)
        click.echo(f"rendered {n} frames to {out}")
    _run(body)


@main.command()
@click.option("--scene", "scene_ply", required=True, type=click.Path(exists=True))
@click.option("--frames", type=int, default=60, show_default=True)
@click.option("--size", type=int, default=512, show_default=True)
@click.option("--radius", type=float, default=3.0, show_default=True)
@click.option("--height", type=float, default=1.6, show_default=True)
@click.option("--background", default="0.5,0.5,0.5", show_default=True)
@click.option("--out", required=True, type=click.Path())
def orbit(scene_ply, frames, size, radius, height, background, out):
    """Render an orbiting PNG frame sequence around the scene."""
    def body():
        scene = sc.load_ply(scene_ply)
        cams = scenegen.orbit_cameras(frames, size, radius=radius, height=height)
        bg = _coerce((0.0,), background, "background")
        n = _render_to_dir(scene, cams, out, bg)
        click.echo(f"rendered {n} frames to {out}")
    _run(body)


@main.command("metrics")
@click.option("--scene", "scene_ply", required=True, type=click.Path(exists=True))
@click.option("--style", "style_png", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--short-gap", type=int, default=1, show_default=True)
@click.option("--long-gap", type=int, default=7, show_default=True)
@click.option("--weights", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
def metrics_cmd(scene_ply, style_png, data_dir, short_gap, long_gap, weights,
                out):
    """Style fidelity and multi-view consistency report."""
    def body():
        scene = sc.load_ply(scene_ply)
        _, cams, _ = scenegen.load_dataset(data_dir)
        style = images.load_png(style_png)
        net = _load_network(weights)
        cfg = ras.RenderConfig(background=scenegen.BACKGROUND)
        rendered = [ras.render(scene, cam, cfg).image for cam in cams]
        gram = metrics_mod.gram_metric(net, rendered, style)
        report = metrics_mod.consistency(scene, cams, short_gap, long_gap, cfg)
        lines = [f"# gram_metric,{gram:.8g}",
                 f"# gram_normalization,{metrics_mod.GRAM_NORMALIZATION}",
                 metrics_mod.report_csv(report).rstrip()]
        Path(out).write_text("\n".join(lines) + "\n")
        click.echo(f"gram metric: {gram:.6g}")
        click.echo(f"  ({metrics_mod.GRAM_NORMALIZATION})")
        click.echo(metrics_mod.report_text(report).rstrip())
        click.echo(f"wrote {out}")
    _run(body)


@main.command("gradcheck")
@click.option("--suite", "suites", multiple=True,
              type=click.Choice(gradcheck_mod.SUITES))
@click.option("--f64", is_flag=True, help="Run the checks in float64.")
@click.option("--seed", type=int, default=0, show_default=True)
def gradcheck_cmd(suites, f64, seed):
    """Finite-difference checks for all hand-written backwards."""
    def body():
        results = gradcheck_mod.run(suites or None, f64=f64, seed=seed)
        click.echo(gradcheck_mod.format_results(results))
        if not all(r.passed for r in results):
            raise RuntimeError("gradient check failed")
    _run(body)


@main.command("stats-cache")
@click.option("--style", "style_png", required=True, type=click.Path(exists=True))
@click.option("--scales", type=int, required=True)
@click.option("--weights", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path())
def stats_cache(style_png, scales, weights, out):
    """Precompute per-scale style statistics into a cache file."""
    def body():
        if scales < 1:
            raise click.UsageError("--scales must be >= 1")
        net = _load_network(weights)
        style = _load_style(style_png)
        per_scale = []
        v = style
        for s in range(scales):
            if min(v.shape[1], v.shape[2]) < 32:
                raise ValueError(
                    f"style image too small for {scales} scales "
                    f"(stuck at scale {s})"
                )
            feats = vgg.extract(net, v, set(vgg.STYLE_TAPS))
            per_scale.append({t: styleloss.layer_stats(feats[t])
                              for t in vgg.STYLE_TAPS})
            if s + 1 < scales:
                v = ops.downscale2(v)
        styleloss.save_style_stats(out, styleloss.StyleStats(per_scale),
                                   styleloss.image_hash(style))
        click.echo(f"wrote {scales}-scale statistics to {out}")
    _run(body)


if __name__ == "__main__":
    main()
