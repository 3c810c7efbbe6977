"""Alternating adversarial training: one discriminator update across the
enabled frequency domains, then one generator update, with Adam, a single
learning-rate decay step, and shared random crop windows.

Everything is driven by one seeded generator stream, so a full run is a
pure function of (config, data): two runs with the same seed produce
bitwise-identical parameters, and a checkpointed run resumes onto the
exact trajectory it would have followed uninterrupted.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import adversarial as adv
from . import autodiff as ad
from . import images
from . import networks as nw
from .voxelisation import MultiPlaneVolume, RasterImage

_CKPT_MAGIC = b"PCCK"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 64
    steps_per_epoch: int = 1
    lr_initial: float = 0.002
    lr_after_decay: float = 0.001
    decay_epoch: int = 25
    crop_h: int = 64
    crop_w: int = 64
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    enabled_domains: tuple = adv.DOMAINS
    normalize_losses: bool = False
    snapshot_every: int = 0

    def __post_init__(self):
        if not 0 < self.lr_after_decay <= self.lr_initial:
            raise ValueError(f"need 0 < lr_after_decay <= lr_initial, got "
                             f"{self.lr_after_decay}, {self.lr_initial}")
        if self.decay_epoch > self.epochs:
            raise ValueError(f"decay_epoch {self.decay_epoch} exceeds epochs {self.epochs}")
        if self.crop_h % 2 or self.crop_w % 2:
            raise ValueError(f"crop dims must be even for the wavelet halving, got "
                             f"{self.crop_h}x{self.crop_w}")
        object.__setattr__(self, "enabled_domains", tuple(self.enabled_domains))
        bad = [d for d in self.enabled_domains if d not in adv.DOMAINS]
        if bad:
            raise ValueError(f"unknown domains {bad}; valid: {', '.join(adv.DOMAINS)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["enabled_domains"] = list(self.enabled_domains)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["enabled_domains"] = tuple(d["enabled_domains"])
        return cls(**d)


def lr_schedule(epoch: int, lr_initial: float = 0.002, lr_after_decay: float = 0.001,
                decay_epoch: int = 25) -> float:
    """Single-step decay: the initial rate before ``decay_epoch``, the
    decayed rate from then on."""
    if epoch < 0:
        raise ValueError(f"epoch must be nonnegative, got {epoch}")
    return lr_initial if epoch < decay_epoch else lr_after_decay


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def adam_step(params, grads, moments, lr: float, beta1: float = 0.5,
              beta2: float = 0.999, eps: float = 1e-8):
    """In-place Adam update with bias correction.

    ``params`` are Tensors, ``grads`` same-shaped arrays, ``moments`` a
    (m_list, v_list, t) triple; returns the advanced moments. Non-finite
    gradients abort with the offending tensor's name.
    """
    m_list, v_list, t = moments
    t += 1
    for p, g, m, v in zip(params, grads, m_list, v_list):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter "
                             f"{p.name or 'tensor'} shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient on {p.name or 'unnamed tensor'}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return m_list, v_list, t


class AdamOptimizer:
    """Owns the moment buffers for one network's parameters."""

    def __init__(self, params, beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros(p.shape) for p in self.params]
        self.v = [np.zeros(p.shape) for p in self.params]
        self.t = 0

    def step(self, lr: float) -> None:
        grads = []
        for p in self.params:
            if p.grad is None:
                raise RuntimeError(f"parameter {p.name or 'tensor'} has no gradient; "
                                   "run backward before stepping")
            grads.append(p.grad)
        _, _, self.t = adam_step(self.params, grads, (self.m, self.v, self.t),
                                 lr, self.beta1, self.beta2, self.eps)

    def state_arrays(self) -> list[np.ndarray]:
        return self.m + self.v

    def load_state_arrays(self, arrays, t: int) -> None:
        n = len(self.params)
        if len(arrays) != 2 * n:
            raise ValueError(f"expected {2 * n} moment arrays, got {len(arrays)}")
        self.m = [a.reshape(p.shape).copy() for a, p in zip(arrays[:n], self.params)]
        self.v = [a.reshape(p.shape).copy() for a, p in zip(arrays[n:], self.params)]
        self.t = t


# ---------------------------------------------------------------------------
# data plumbing
# ---------------------------------------------------------------------------

class TrainSample(NamedTuple):
    """One view's full-size training triple."""

    volume: MultiPlaneVolume
    image: np.ndarray           # (H, W, 3) ground truth
    raster: RasterImage


def volume_to_input(vol: MultiPlaneVolume) -> np.ndarray:
    """(P, H, W, C) volume to the (1, C, P, H, W) generator input layout."""
    return np.ascontiguousarray(vol.features.transpose(3, 0, 1, 2))[None]


def random_crop(image: np.ndarray, raster: RasterImage, volume: np.ndarray,
                crop_h: int, crop_w: int, rng: np.random.Generator):
    """One uniformly random window applied to the image, the raster, and
    the volume's H/W axes. ``volume`` is in generator layout
    (1, C, P, H, W). Sources must be at least the crop size."""
    h, w = image.shape[:2]
    if raster.pixels.shape[:2] != (h, w) or volume.shape[-2:] != (h, w):
        raise ValueError(f"crop sources disagree: image {(h, w)}, raster "
                         f"{raster.pixels.shape[:2]}, volume {volume.shape[-2:]}")
    if crop_h > h or crop_w > w:
        raise ValueError(f"crop {crop_h}x{crop_w} exceeds source {h}x{w}")
    top = int(rng.integers(0, h - crop_h + 1))
    left = int(rng.integers(0, w - crop_w + 1))
    rows = slice(top, top + crop_h)
    cols = slice(left, left + crop_w)
    return (image[rows, cols].copy(),
            RasterImage(raster.pixels[rows, cols].copy(), raster.depth[rows, cols].copy()),
            volume[:, :, :, rows, cols].copy())


_ASSEMBLERS = {
    "rgb": adv.assemble_rgb_input,
    "fourier": adv.assemble_fourier_input,
    "dwt": adv.assemble_dwt_input,
}

DISC_INPUT_CHANNELS = {"rgb": 6, "fourier": 2, "dwt": 6}


def disc_input_size(domain: str, crop_h: int, crop_w: int) -> tuple:
    if domain == "dwt":
        return (crop_h // 2, crop_w // 2)
    return (crop_h, crop_w)


# ---------------------------------------------------------------------------
# training state and steps
# ---------------------------------------------------------------------------

@dataclass
class TrainState:
    config: TrainConfig
    generator: nw.Network
    discriminators: dict
    g_opt: AdamOptimizer
    d_opts: dict
    rng: np.random.Generator
    iteration: int = 0
    epoch: int = 0
    labels: adv.GanLabels = field(default_factory=adv.GanLabels)
    percept: adv.PerceptualConfig = field(default_factory=adv.PerceptualConfig)
    loss_rows: list = field(default_factory=list)


def init_training(cfg: TrainConfig, num_planes: int, volume_channels: int = 3,
                  base_channels: int = 8) -> TrainState:
    """Fresh nets sized for the crop window, optimizers, and the seeded
    stream driving all later randomness."""
    gen = nw.build_generator(num_planes=num_planes, height=cfg.crop_h, width=cfg.crop_w,
                             in_channels=volume_channels, base_channels=base_channels,
                             seed=cfg.seed)
    discs = {}
    d_opts = {}
    for i, dom in enumerate(cfg.enabled_domains):
        discs[dom] = nw.build_discriminator(
            dom, DISC_INPUT_CHANNELS[dom], disc_input_size(dom, cfg.crop_h, cfg.crop_w),
            seed=cfg.seed + 1 + i)
        d_opts[dom] = AdamOptimizer(discs[dom].params, cfg.beta1, cfg.beta2, cfg.adam_eps)
    return TrainState(
        config=cfg, generator=gen, discriminators=discs,
        g_opt=AdamOptimizer(gen.params, cfg.beta1, cfg.beta2, cfg.adam_eps),
        d_opts=d_opts, rng=np.random.default_rng(cfg.seed),
        percept=adv.PerceptualConfig(extractor_seed=cfg.seed))


def _check_alignment(volume, image, raster):
    hw = image.shape[:2]
    if raster.pixels.shape[:2] != hw or volume.shape[-2:] != hw:
        raise ValueError(f"misaligned crops: image {hw}, raster {raster.pixels.shape[:2]}, "
                         f"volume {volume.shape[-2:]}")


def train_step(state: TrainState, volume: np.ndarray, image: np.ndarray,
               raster: RasterImage, lr: float | None = None) -> dict:
    """One discriminator update followed by one generator update.

    ``volume`` is the (1, C, P, h, w) crop, ``image`` the aligned ground
    truth, ``raster`` the aligned conditioning render. The discriminator
    trains on a detached fake; the generator trains against frozen
    discriminators (asserted). Returns the loss record for the CSV log.
    """
    cfg = state.config
    _check_alignment(volume, image, raster)
    if lr is None:
        lr = lr_schedule(state.epoch, cfg.lr_initial, cfg.lr_after_decay, cfg.decay_epoch)
    record = {"iter": state.iteration, "d_rgb": 0.0, "d_fourier": 0.0, "d_dwt": 0.0,
              "g_adv_rgb": 0.0, "g_adv_fourier": 0.0, "g_adv_dwt": 0.0}

    with ad.no_grad():
        fake = state.generator(volume)
    fake_img = fake.data[0].transpose(1, 2, 0)

    for dom in cfg.enabled_domains:
        net = state.discriminators[dom]
        assemble = _ASSEMBLERS[dom]
        real_scores = net(adv.as_disc_batch(assemble(image, raster)))
        fake_scores = net(adv.as_disc_batch(assemble(fake_img, raster)))
        loss = adv.lsgan_d_loss(real_scores, fake_scores, state.labels, cfg.normalize_losses)
        net.zero_grad()
        loss.backward()
        if lr > 0:
            state.d_opts[dom].step(lr)
        net.zero_grad()
        record[f"d_{dom}"] = loss.item()

    for dom in cfg.enabled_domains:
        state.discriminators[dom].set_requires_grad(False)
    gen_out = state.generator(volume)
    gen_img = ad.transpose(ad.reshape(gen_out, gen_out.shape[1:]), (1, 2, 0))
    scores = {}
    for dom in cfg.enabled_domains:
        scores[dom] = state.discriminators[dom](
            adv.as_disc_batch(_ASSEMBLERS[dom](gen_img, raster)))
    total, parts = adv.g_loss_terms(scores, gen_img, image, state.labels, state.percept,
                                    domains=cfg.enabled_domains,
                                    normalize=cfg.normalize_losses)
    state.generator.zero_grad()
    total.backward()
    if lr > 0:
        state.g_opt.step(lr)
    state.generator.zero_grad()
    for dom in cfg.enabled_domains:
        net = state.discriminators[dom]
        assert all(p.grad is None for p in net.params), \
            f"{dom} discriminator received gradient during the generator step"
        net.set_requires_grad(True)

    record["g_total"] = total.item()
    record["g_percept"] = parts["percept"].item()
    for dom in cfg.enabled_domains:
        record[f"g_adv_{dom}"] = parts[f"adv_{dom}"].item()
    state.iteration += 1
    return record


def _record_row(record: dict) -> tuple:
    return (record["iter"], record["g_total"], record["g_percept"],
            record["g_adv_rgb"], record["g_adv_fourier"], record["g_adv_dwt"],
            record["d_rgb"], record["d_fourier"], record["d_dwt"])


def snapshot_triptych(state: TrainState, sample, path) -> None:
    """Side-by-side (raster, generated, ground truth) PNG for eyeballing."""
    image, raster, volume = sample
    with ad.no_grad():
        gen = state.generator(volume)
    panel = np.concatenate([raster.pixels, gen.data[0].transpose(1, 2, 0), image], axis=1)
    images.save_png(panel, path)


def fit(state: TrainState, samples, total_steps: int | None = None,
        loss_csv=None, snapshot_dir=None) -> TrainState:
    """Run the alternating loop over epochs x steps_per_epoch (or exactly
    ``total_steps``), drawing a sample and a crop window per step from the
    state's stream. Writes the loss CSV and periodic snapshots when asked."""
    cfg = state.config
    if not samples:
        raise ValueError("no training samples")
    prepared = [(s.image, s.raster, volume_to_input(s.volume)) for s in samples]
    budget = total_steps if total_steps is not None else cfg.epochs * cfg.steps_per_epoch
    done = 0
    while done < budget:
        state.epoch = state.iteration // max(cfg.steps_per_epoch, 1)
        image, raster, volume = prepared[int(state.rng.integers(len(prepared)))]
        img_c, rast_c, vol_c = random_crop(image, raster, volume,
                                           cfg.crop_h, cfg.crop_w, state.rng)
        record = train_step(state, vol_c, img_c, rast_c)
        state.loss_rows.append(_record_row(record))
        done += 1
        if snapshot_dir and cfg.snapshot_every and state.iteration % cfg.snapshot_every == 0:
            snapshot_triptych(state, prepared[0],
                              Path(snapshot_dir) / f"snapshot_{state.iteration:06d}.png")
    if loss_csv is not None:
        adv.write_loss_csv(state.loss_rows, loss_csv)
    return state


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _flat_params(net: nw.Network) -> np.ndarray:
    return np.concatenate([p.data.ravel() for p in net.params])


def save_train_checkpoint(state: TrainState, path) -> None:
    """Full training snapshot: config, step counters, RNG state, every
    network's spec and parameters, and the Adam moments. Written atomically
    and bitwise-deterministic for a given trajectory."""
    path = Path(path)
    nets = [("generator", state.generator, state.g_opt)]
    nets += [(f"disc_{d}", state.discriminators[d], state.d_opts[d])
             for d in state.config.enabled_domains]
    header = {
        "config": state.config.to_dict(),
        "iteration": state.iteration,
        "epoch": state.epoch,
        "rng_state": state.rng.bit_generator.state,
        "loss_rows": [list(r) for r in state.loss_rows],
        "nets": [{"name": name, "spec": net.spec.to_json(), "adam_t": opt.t}
                 for name, net, opt in nets],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(np.asarray([len(head)], dtype="<u8").tobytes())
        fh.write(head)
        for _, net, opt in nets:
            for arr in [_flat_params(net)] + opt.state_arrays():
                fh.write(arr.astype("<f8").tobytes())
    os.replace(tmp, path)


def load_train_checkpoint(path) -> TrainState:
    """Rebuild the exact training state; resuming continues the identical
    trajectory the uninterrupted run would have taken."""
    raw = Path(path).read_bytes()
    if raw[:4] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a training checkpoint")
    n = int(np.frombuffer(raw, dtype="<u8", count=1, offset=4)[0])
    header = json.loads(raw[12:12 + n].decode("utf-8"))
    cfg = TrainConfig.from_dict(header["config"])

    specs = {entry["name"]: nw.NetworkSpec.from_json(entry["spec"]) for entry in header["nets"]}
    gen = nw.Network(specs["generator"])
    discs = {d: nw.Network(specs[f"disc_{d}"]) for d in cfg.enabled_domains}

    off = 12 + n
    state = TrainState(
        config=cfg, generator=gen, discriminators=discs,
        g_opt=AdamOptimizer(gen.params, cfg.beta1, cfg.beta2, cfg.adam_eps),
        d_opts={d: AdamOptimizer(discs[d].params, cfg.beta1, cfg.beta2, cfg.adam_eps)
                for d in cfg.enabled_domains},
        rng=np.random.default_rng(), iteration=header["iteration"], epoch=header["epoch"],
        percept=adv.PerceptualConfig(extractor_seed=cfg.seed),
        loss_rows=[tuple(r) for r in header["loss_rows"]])
    state.rng.bit_generator.state = header["rng_state"]

    def take(count):
        nonlocal off
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        return arr

    for entry in header["nets"]:
        name = entry["name"]
        net = gen if name == "generator" else discs[name.removeprefix("disc_")]
        opt = state.g_opt if name == "generator" else state.d_opts[name.removeprefix("disc_")]
        flat = take(sum(p.size for p in net.params))
        pos = 0
        for p in net.params:
            p.data = flat[pos:pos + p.size].reshape(p.shape).copy()
            pos += p.size
        moments = [take(p.size).reshape(p.shape) for p in net.params * 2]
        opt.load_state_arrays(moments, entry["adam_t"])
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes in checkpoint")
    return state
