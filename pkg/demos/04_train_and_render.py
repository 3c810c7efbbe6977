#!/usr/bin/env python3
"""Tiny end-to-end run: voxelise, train the U-Net adversarially, render.

One synthetic view, 64x64, a narrow generator, 200 alternating steps with
all three discriminators (color, Fourier, wavelet). The sparse z-buffer
raster is the input conditioning; a 10x denser cloud rendered from the
same pose is the ground truth. A couple of minutes on one core.
"""

import time
from pathlib import Path

import numpy as np

from pcrender import geometry as geo
from pcrender import images
from pcrender import metrics as mt
from pcrender import training as tr
from pcrender import voxelisation as vx
from pcrender import autodiff as ad

OUT = Path("demo_out/train")
STEPS = 200


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    # === 1. data: sparse conditioning vs dense ground truth ===
    frustum = geo.Frustum()
    cloud, views = geo.make_synthetic_scene("box_room", 12_000, seed=7,
                                            width=64, height=64)
    view = views[0]
    volume = vx.voxelise(cloud, view, frustum, vx.VoxelConfig(num_planes=8))
    raster = vx.rasterize_zbuffer(cloud, view, frustum)
    dense, _ = geo.make_synthetic_scene("box_room", 120_000, seed=7,
                                        width=64, height=64)
    gt = vx.rasterize_zbuffer(dense, view, frustum).pixels
    sample = tr.TrainSample(volume, gt, raster)
    print(f"sparse raster fills {100.0 * raster.mask.mean():.0f}% of pixels, "
          f"dense ground truth {len(dense)} points")

    # === 2. model + optimizers ===
    cfg = tr.TrainConfig(epochs=STEPS, steps_per_epoch=1, decay_epoch=25,
                         crop_h=64, crop_w=64, seed=0)
    state = tr.init_training(cfg, num_planes=8, base_channels=8)
    print(f"generator: {state.generator.num_parameters()} parameters; "
          f"discriminators: " +
          ", ".join(f"{d} {n.num_parameters()}" for d, n in state.discriminators.items()))

    net_input = tr.volume_to_input(volume)
    with ad.no_grad():
        before = state.generator(net_input).data[0].transpose(1, 2, 0)

    # === 3. the alternating loop ===
    t0 = time.time()
    tr.fit(state, [sample], total_steps=STEPS, loss_csv=OUT / "losses.csv",
           snapshot_dir=None)
    rows = np.asarray(state.loss_rows)
    print(f"\n{STEPS} steps in {time.time() - t0:.0f}s")
    for i in (0, STEPS // 4, STEPS // 2, STEPS - 1):
        print(f"  step {int(rows[i, 0]):3d}: g_total {rows[i, 1]:9.1f}  "
              f"g_percept {rows[i, 2]:9.1f}  d_rgb {rows[i, 6]:.3f}")

    # === 4. render and score ===
    with ad.no_grad():
        after = state.generator(net_input).data[0].transpose(1, 2, 0)
    print(f"\nPSNR vs ground truth: raster {mt.psnr(raster.pixels, gt):.2f} dB, "
          f"untrained {mt.psnr(before, gt):.2f} dB, trained {mt.psnr(after, gt):.2f} dB")
    rep = mt.report(after, gt)
    print(f"trained vs ground truth: SSIM {rep.ssim:.3f}, "
          f"sharpness {rep.sharpness_gen:.3f} (gt {rep.sharpness_ref:.3f})")

    images.save_png(np.concatenate([raster.pixels, before, after, gt], axis=1),
                    OUT / "raster_untrained_trained_gt.png")
    tr.save_train_checkpoint(state, OUT / "final.ckpt")
    print(f"wrote {OUT / 'raster_untrained_trained_gt.png'}, {OUT / 'losses.csv'}, "
          f"{OUT / 'final.ckpt'}")


if __name__ == "__main__":
    main()
