"""Command-line surface for the rendering pipeline.

Subcommands: voxelise, render, train, noise-ablation, spectra, metrics.
Configuration is a flat key=value text file (every default matching the
reference constants) with command-line flags taking precedence. Exit codes
are stable for scripting: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import difflib
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import adversarial as adv
from . import autodiff as ad
from . import geometry as geo
from . import images
from . import metrics as mt
from . import networks as nw
from . import spectral as sp
from . import training as tr
from . import voxelisation as vx

DEFAULT_SIGMAS = (0.002, 0.005, 0.01, 0.02, 0.05)


class UsageError(ValueError):
    """Bad arguments or configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

CONFIG_DEFAULTS = {
    # scene
    "scene": "box_room",
    "scene_points": 50_000,
    "scene_seed": 7,
    "width": 64,
    "height": 64,
    "gt_density": 20,
    # frustum
    "near": 0.1,
    "far": 10.0,
    # voxelisation
    "num_planes": 32,
    "mu_f": 0.25,
    "mu_s": 0.75,
    "alpha": 1.0,
    "beta": 1.0,
    "epsilon_f": 1e-3,
    "plane_spacing": "depth",
    # training
    "epochs": 64,
    "steps_per_epoch": 1,
    "lr_initial": 0.002,
    "lr_after_decay": 0.001,
    "decay_epoch": 25,
    "crop_h": 64,
    "crop_w": 64,
    "beta1": 0.5,
    "beta2": 0.999,
    "adam_eps": 1e-8,
    "seed": 0,
    "domains": ("rgb", "fourier", "dwt"),
    "normalize_losses": False,
    "snapshot_every": 0,
    "base_channels": 8,
    # losses
    "percept_weights": (1.0, 1.0, 1.0),
    "percept_seed": 0,
    "real_label": 1.0,
    "fake_label": 0.0,
    "target_label": 1.0,
}


def _coerce(key: str, text: str):
    default = CONFIG_DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t for t in text.split(",") if t.strip()]
            elem = type(default[0]) if default else str
            return tuple(elem(t.strip()) for t in items)
        return text
    except ValueError as e:
        raise UsageError(f"config key {key!r}: {e}") from None


def load_run_config(path=None) -> dict:
    """Defaults, then the key=value file when given. Unknown keys are
    rejected with the nearest valid key suggested."""
    cfg = dict(CONFIG_DEFAULTS)
    if path is None:
        return cfg
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise UsageError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in CONFIG_DEFAULTS:
            near = difflib.get_close_matches(key, CONFIG_DEFAULTS, n=1)
            hint = f"; did you mean {near[0]!r}?" if near else ""
            raise UsageError(f"{path}:{ln}: unknown config key {key!r}{hint}")
        cfg[key] = _coerce(key, value)
    return cfg


def _apply_overrides(cfg: dict, args, keys) -> dict:
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = _coerce(key, val) if isinstance(val, str) and not isinstance(
                CONFIG_DEFAULTS[key], str) else val
    return cfg


def _voxel_config(cfg: dict) -> vx.VoxelConfig:
    return vx.VoxelConfig(num_planes=cfg["num_planes"], mu_f=cfg["mu_f"], mu_s=cfg["mu_s"],
                          alpha=cfg["alpha"], beta=cfg["beta"], epsilon_f=cfg["epsilon_f"],
                          plane_spacing=cfg["plane_spacing"])


def _frustum(cfg: dict) -> geo.Frustum:
    return geo.Frustum(near=cfg["near"], far=cfg["far"])


def _train_config(cfg: dict) -> tr.TrainConfig:
    return tr.TrainConfig(
        epochs=cfg["epochs"], steps_per_epoch=cfg["steps_per_epoch"],
        lr_initial=cfg["lr_initial"], lr_after_decay=cfg["lr_after_decay"],
        decay_epoch=cfg["decay_epoch"], crop_h=cfg["crop_h"], crop_w=cfg["crop_w"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], adam_eps=cfg["adam_eps"],
        seed=cfg["seed"], enabled_domains=tuple(cfg["domains"]),
        normalize_losses=cfg["normalize_losses"], snapshot_every=cfg["snapshot_every"])


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def load_views(args, cfg: dict):
    """Views from pose/intrinsics files, or the synthetic scene's cameras."""
    if getattr(args, "poses", None):
        if not getattr(args, "intrinsics", None):
            raise UsageError("--poses requires --intrinsics")
        k = geo.load_intrinsics(args.intrinsics)
        return [geo.CameraView(k, p) for p in geo.load_poses(args.poses)]
    _, views = geo.make_synthetic_scene(cfg["scene"], 1, cfg["scene_seed"],
                                        width=cfg["width"], height=cfg["height"])
    return views


def load_cloud(args, cfg: dict) -> geo.PointCloud:
    if getattr(args, "cloud", None):
        return geo.load_ply(args.cloud, synthetic_colors=getattr(args, "synthetic_colors", False))
    cloud, _ = geo.make_synthetic_scene(cfg["scene"], cfg["scene_points"], cfg["scene_seed"],
                                        width=cfg["width"], height=cfg["height"])
    return cloud


def scene_dataset(cfg: dict, vcfg: vx.VoxelConfig, frustum: geo.Frustum):
    """Per-view training triples for a synthetic scene: voxelised volume,
    dense-cloud ground-truth render, sparse z-buffer raster."""
    cloud, views = geo.make_synthetic_scene(cfg["scene"], cfg["scene_points"],
                                            cfg["scene_seed"], width=cfg["width"],
                                            height=cfg["height"])
    dense, _ = geo.make_synthetic_scene(cfg["scene"],
                                        cfg["scene_points"] * cfg["gt_density"],
                                        cfg["scene_seed"], width=cfg["width"],
                                        height=cfg["height"])
    samples = []
    for view in views:
        volume = vx.voxelise(cloud, view, frustum, vcfg)
        raster = vx.rasterize_zbuffer(cloud, view, frustum)
        gt = vx.rasterize_zbuffer(dense, view, frustum).pixels
        samples.append(tr.TrainSample(volume, gt, raster))
    return samples, views, cloud


def directory_dataset(data_dir, vcfg: vx.VoxelConfig, frustum: geo.Frustum):
    """Triples from an on-disk capture: cloud.ply, poses.txt,
    intrinsics.txt, and gt_<i>.png per pose line."""
    data_dir = Path(data_dir)
    cloud = geo.load_ply(data_dir / "cloud.ply")
    k = geo.load_intrinsics(data_dir / "intrinsics.txt")
    poses = geo.load_poses(data_dir / "poses.txt")
    samples = []
    for i, pose in enumerate(poses):
        view = geo.CameraView(k, pose)
        gt_path = data_dir / f"gt_{i:03d}.png"
        if not gt_path.exists():
            raise FileNotFoundError(f"missing ground-truth image {gt_path}")
        gt = images.load_png(gt_path)
        samples.append(tr.TrainSample(vx.voxelise(cloud, view, frustum, vcfg),
                                      gt, vx.rasterize_zbuffer(cloud, view, frustum)))
    return samples


# ---------------------------------------------------------------------------
# plot rendering (no plotting dependency)
# ---------------------------------------------------------------------------

def _draw_line(img, x0, y0, x1, y1, color):
    n = int(max(abs(x1 - x0), abs(y1 - y0)) * 2) + 1
    for t in np.linspace(0.0, 1.0, n):
        r = int(round(y0 + (y1 - y0) * t))
        c = int(round(x0 + (x1 - x0) * t))
        if 0 <= r < img.shape[0] and 0 <= c < img.shape[1]:
            img[r, c] = color
            if r + 1 < img.shape[0]:
                img[r + 1, c] = color


def render_line_plot(xs, series, height: int = 360, width: int = 480) -> np.ndarray:
    """Minimal multi-curve line plot in a pixel buffer: axes box, one
    polyline per series, legend swatches top-right (series order)."""
    img = np.ones((height, width, 3))
    m = 30
    img[m, m:width - m] = img[height - m, m:width - m] = 0.0
    img[m:height - m, m] = img[m:height - m, width - m] = 0.0
    xs = np.asarray(xs, dtype=np.float64)
    ymax = max(float(np.max(vals)) for _, vals in series) or 1.0
    span_x = (xs.max() - xs.min()) or 1.0
    colors = [(0.85, 0.15, 0.15), (0.1, 0.3, 0.85), (0.1, 0.6, 0.2)]
    for si, (_, vals) in enumerate(series):
        color = colors[si % len(colors)]
        pts = [(m + (width - 2 * m) * (x - xs.min()) / span_x,
                height - m - (height - 2 * m) * (v / (ymax * 1.05)))
               for x, v in zip(xs, vals)]
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            _draw_line(img, x0, y0, x1, y1, color)
        img[m + 8 + 14 * si: m + 18 + 14 * si, width - m - 24: width - m - 8] = color
    return img


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _out_dir(args, cfg: dict, prefix: str) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        stamp = time.strftime("%Y%m%d_%H%M%S")
        out = Path(f"{prefix}_{stamp}_seed{cfg['seed']}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_voxelise(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args,
                           ("scene", "scene_points", "scene_seed", "num_planes",
                            "mu_f", "mu_s", "alpha", "beta", "epsilon_f",
                            "plane_spacing", "near", "far", "seed"))
    vcfg = _voxel_config(cfg)
    frustum = _frustum(cfg)
    cloud = load_cloud(args, cfg)
    views = load_views(args, cfg)
    if not 0 <= args.view_index < len(views):
        raise UsageError(f"--view-index {args.view_index} out of range; {len(views)} views loaded")
    view = views[args.view_index]
    out = _out_dir(args, cfg, "voxelise")
    volume = vx.voxelise(cloud, view, frustum, vcfg)
    raster = vx.rasterize_zbuffer(cloud, view, frustum)
    vx.save_volume(volume, out / "volume.mpv")
    images.save_png(raster.pixels, out / "raster.png")
    print(f"voxelised {len(cloud)} points into {volume.occupancy.sum()} occupied voxels "
          f"({vcfg.num_planes} planes); wrote {out / 'volume.mpv'} and {out / 'raster.png'}")
    return 0


def cmd_noise_ablation(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args,
                           ("scene", "scene_points", "scene_seed", "num_planes",
                            "near", "far", "alpha", "beta", "epsilon_f", "seed"))
    if args.sigmas is None:
        sigmas = DEFAULT_SIGMAS
    else:
        sigmas = tuple(float(s) for s in args.sigmas.split(",") if s.strip())
        if not sigmas:
            raise UsageError("empty sigma list")
    vcfg = None
    if args.mu_f is not None or args.mu_s is not None:
        cfg["mu_f"] = args.mu_f if args.mu_f is not None else 0.5
        cfg["mu_s"] = args.mu_s if args.mu_s is not None else 0.5
        vcfg = _voxel_config(cfg)
    cloud = load_cloud(args, cfg)
    view = load_views(args, cfg)[args.view_index]
    out = _out_dir(args, cfg, "ablation")
    table = vx.noise_ablation(cloud, view, sorted(sigmas), cfg=vcfg,
                              frustum=_frustum(cfg), seed=cfg["seed"])
    vx.write_ablation_csv(table, out / "ablation.csv")
    if args.plot:
        plot = render_line_plot(table[:, 0], [("spatial_only", table[:, 1]),
                                              ("noise_resistant", table[:, 2])])
        images.save_png(plot, out / "ablation.png")
    for sigma, err_s, err_f in table:
        print(f"sigma={sigma:g}  spatial_only={err_s:.6f}  noise_resistant={err_f:.6f}")
    print(f"wrote {out / 'ablation.csv'}")
    return 0


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args,
                           ("scene", "scene_points", "scene_seed", "width", "height",
                            "num_planes", "mu_f", "mu_s", "near", "far", "epochs",
                            "steps_per_epoch", "decay_epoch", "crop_h", "crop_w",
                            "seed", "domains", "base_channels", "snapshot_every"))
    tcfg = _train_config(cfg)
    out = _out_dir(args, cfg, "run")
    (out / "checkpoints").mkdir(exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)

    if args.resume:
        state = tr.load_train_checkpoint(args.resume)
        stored = state.config.to_dict()
        explicit = {
            "epochs": "epochs", "steps_per_epoch": "steps_per_epoch",
            "decay_epoch": "decay_epoch", "crop_h": "crop_h", "crop_w": "crop_w",
            "seed": "seed", "snapshot_every": "snapshot_every",
        }
        diffs = [f"  {field}: checkpoint={stored[field]} requested={getattr(args, flag)}"
                 for flag, field in explicit.items()
                 if getattr(args, flag, None) is not None and stored[field] != getattr(args, flag)]
        if args.domains is not None:
            wanted = list(_coerce("domains", args.domains))
            if stored["enabled_domains"] != wanted:
                diffs.append(f"  enabled_domains: checkpoint={stored['enabled_domains']} "
                             f"requested={wanted}")
        if args.num_planes is not None and state.generator.spec.input_shape[1] != args.num_planes:
            diffs.append(f"  num_planes: checkpoint={state.generator.spec.input_shape[1]} "
                         f"requested={args.num_planes}")
        if diffs:
            raise UsageError("resume refused; these settings differ from the checkpoint:\n"
                             + "\n".join(diffs))
        # plane count is baked into the generator; follow the checkpoint
        # unless the flag restated it (checked above)
        cfg["num_planes"] = state.generator.spec.input_shape[1]
    else:
        state = tr.init_training(tcfg, num_planes=cfg["num_planes"],
                                 base_channels=cfg["base_channels"])

    vcfg = _voxel_config(cfg)
    frustum = _frustum(cfg)
    if args.data_dir:
        samples = directory_dataset(args.data_dir, vcfg, frustum)
    else:
        samples, _, _ = scene_dataset(cfg, vcfg, frustum)

    steps = args.steps if args.steps is not None else None
    tr.fit(state, samples, total_steps=steps, loss_csv=out / "losses.csv",
           snapshot_dir=out / "snapshots")
    tr.save_train_checkpoint(state, out / "checkpoints" / "final.ckpt")
    print(f"trained {state.iteration} steps; wrote {out / 'checkpoints' / 'final.ckpt'} "
          f"and {out / 'losses.csv'}")
    return 0


def cmd_render(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args,
                           ("scene", "scene_points", "scene_seed", "width", "height",
                            "num_planes", "mu_f", "mu_s", "near", "far", "seed"))
    state = tr.load_train_checkpoint(args.checkpoint)
    gen = state.generator
    in_c, in_p, in_h, in_w = gen.spec.input_shape
    cloud = load_cloud(args, cfg)
    views = load_views(args, cfg)
    vcfg = replace(_voxel_config(cfg), num_planes=in_p)
    frustum = _frustum(cfg)
    out = _out_dir(args, cfg, "render")
    for i, view in enumerate(views):
        k = view.intrinsics
        if (k.height, k.width) != (in_h, in_w):
            raise ValueError(
                f"view {i} resolution {k.height}x{k.width} does not match the "
                f"checkpoint's generator input {in_h}x{in_w}")
        volume = vx.voxelise(cloud, view, frustum, vcfg)
        path = out / f"render_{i:03d}.png"
        if not volume.occupancy.any():
            print(f"warning: view {i} sees no points; writing a black frame", file=sys.stderr)
            images.save_png(np.zeros((in_h, in_w, 3)), path)
            continue
        with ad.no_grad():
            img = gen(tr.volume_to_input(volume))
        images.save_png(img.data[0].transpose(1, 2, 0), path)
    print(f"rendered {len(views)} views into {out}")
    return 0


def cmd_spectra(args) -> int:
    gray = images.load_png(args.image)
    if gray.ndim == 3:
        gray = sp.to_grayscale(gray)
    out = _out_dir(args, {"seed": 0}, "spectra")
    save_image = images.save_ppm if args.ppm else images.save_png
    ext = "ppm" if args.ppm else "png"

    mag = sp.dft2_magnitude(gray)
    images.save_float_raw(mag, out / "fourier_magnitude.f32")
    disp = np.log(1.0 + mag)
    disp = (disp - disp.min()) / (disp.max() - disp.min() + 1e-12)
    save_image(disp, out / f"fourier_magnitude.{ext}")

    bands = sp.dwt2_haar(gray)
    for name, band in zip(("ll", "hl", "lh", "hh"), bands):
        images.save_float_raw(band, out / f"dwt_{name}.f32")
        lo, hi = band.min(), band.max()
        save_image((band - lo) / (hi - lo + 1e-12), out / f"dwt_{name}.{ext}")
    print(f"wrote spectrum and subband images to {out}")
    return 0


def cmd_metrics(args) -> int:
    gen = images.load_png(args.generated)
    ref = images.load_png(args.reference)
    rep = mt.report(gen, ref)
    line = f"{mt.METRICS_CSV_HEADER}\n{rep.csv_row()}\n"
    if args.out:
        Path(args.out).write_text(line)
    print(line, end="")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, *, scene=True, cloud=True, config=True, out=True):
    if config:
        p.add_argument("--config", help="key=value run configuration file")
    if scene:
        p.add_argument("--scene", help="synthetic scene name (default box_room)")
        p.add_argument("--scene-points", dest="scene_points", type=int,
                       help="synthetic cloud size (default 50000)")
        p.add_argument("--scene-seed", dest="scene_seed", type=int,
                       help="synthetic scene seed (default 7)")
    if cloud:
        p.add_argument("--cloud", help="PLY point cloud path (overrides --scene)")
        p.add_argument("--poses", help="pose file: 12 floats per line, row-major 3x4")
        p.add_argument("--intrinsics", help="intrinsics file: fx fy cx cy width height")
        p.add_argument("--synthetic-colors", action="store_true",
                       help="tolerate colorless PLY input with neutral gray")
    p.add_argument("--near", type=float, help="frustum near plane, meters (default 0.1)")
    p.add_argument("--far", type=float, help="frustum far plane, meters (default 10)")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    if out:
        p.add_argument("--out", help="output directory (default: name from timestamp+seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcrender",
        description="Point-cloud neural rendering toolkit: noise-resistant multi-plane "
                    "voxelisation with multi-frequency adversarial training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelise", help="voxelise a cloud and write the volume + raster")
    _add_common(p)
    p.add_argument("--view-index", type=int, default=0, help="which camera to use (default 0)")
    p.add_argument("--num-planes", dest="num_planes", type=int,
                   help="depth planes (default 32)")
    p.add_argument("--mu-f", dest="mu_f", type=float, help="feature weight (default 0.25)")
    p.add_argument("--mu-s", dest="mu_s", type=float, help="spatial weight (default 0.75)")
    p.add_argument("--alpha", type=float, help="center-distance exponent (default 1)")
    p.add_argument("--beta", type=float, help="slab-depth exponent (default 1)")
    p.add_argument("--epsilon-f", dest="epsilon_f", type=float,
                   help="feature-distance clamp (default 1e-3)")
    p.add_argument("--plane-spacing", dest="plane_spacing", choices=("depth", "disparity"),
                   help="slab spacing rule (default depth)")
    p.set_defaults(func=cmd_voxelise)

    p = sub.add_parser("noise-ablation",
                       help="paired spatial-only vs noise-resistant error sweep")
    _add_common(p)
    p.add_argument("--view-index", type=int, default=0, help="camera index (default 0)")
    p.add_argument("--sigmas", help=f"comma list of position noise stds "
                                    f"(default {','.join(str(s) for s in DEFAULT_SIGMAS)})")
    p.add_argument("--num-planes", dest="num_planes", type=int, help="depth planes (default 32)")
    p.add_argument("--mu-f", dest="mu_f", type=float,
                   help="feature weight for the full aggregator (default 0.5, the 1:1 mix)")
    p.add_argument("--mu-s", dest="mu_s", type=float,
                   help="spatial weight for the full aggregator (default 0.5)")
    p.add_argument("--plot", action="store_true", help="also write a line-plot PNG")
    p.set_defaults(func=cmd_noise_ablation)

    p = sub.add_parser("train", help="alternating adversarial training on a scene or capture")
    _add_common(p)
    p.add_argument("--data-dir", dest="data_dir",
                   help="capture directory (cloud.ply, poses.txt, intrinsics.txt, gt_<i>.png)")
    p.add_argument("--width", type=int, help="camera width for synthetic scenes (default 64)")
    p.add_argument("--height", type=int, help="camera height (default 64)")
    p.add_argument("--num-planes", dest="num_planes", type=int, help="depth planes (default 32)")
    p.add_argument("--mu-f", dest="mu_f", type=float, help="feature weight (default 0.25)")
    p.add_argument("--mu-s", dest="mu_s", type=float, help="spatial weight (default 0.75)")
    p.add_argument("--epochs", type=int, help="training epochs (default 64)")
    p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int,
                   help="steps per epoch (default 1)")
    p.add_argument("--decay-epoch", dest="decay_epoch", type=int,
                   help="epoch of the 0.002 -> 0.001 decay (default 25)")
    p.add_argument("--steps", type=int, help="exact total step count (overrides epochs)")
    p.add_argument("--crop-h", dest="crop_h", type=int, help="crop height (default 64)")
    p.add_argument("--crop-w", dest="crop_w", type=int, help="crop width (default 64)")
    p.add_argument("--domains", help="comma subset of rgb,fourier,dwt (default all three)")
    p.add_argument("--base-channels", dest="base_channels", type=int,
                   help="generator width (default 8)")
    p.add_argument("--snapshot-every", dest="snapshot_every", type=int,
                   help="snapshot cadence in steps, 0 = off (default 0)")
    p.add_argument("--resume", help="training checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render poses through a trained generator")
    _add_common(p)
    p.add_argument("checkpoint", help="training checkpoint path")
    p.add_argument("--num-planes", dest="num_planes", type=int,
                   help="depth planes (default: from checkpoint)")
    p.add_argument("--width", type=int, help="camera width (default 64)")
    p.add_argument("--height", type=int, help="camera height (default 64)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("spectra", help="write Fourier magnitude and wavelet subbands")
    p.add_argument("--image", required=True, help="input image (PNG)")
    p.add_argument("--ppm", action="store_true", help="write PPM/PGM instead of PNG")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("metrics", help="psnr/ssim/sharpness row for an image pair")
    p.add_argument("generated", help="generated image path")
    p.add_argument("reference", help="reference image path")
    p.add_argument("--out", help="also write the CSV to this path")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
