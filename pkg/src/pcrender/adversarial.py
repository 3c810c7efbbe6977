"""Discriminator input assembly across the three frequency domains, the
patch least-squares GAN losses, and the perceptual generator objective.

Assembled inputs are channel-last tensors in the shapes the discriminators
are sized for (H x W x 6 RGB pairs, H x W x 2 log-magnitude spectra,
H/2 x W/2 x 6 wavelet details). The candidate image path stays inside the
autodiff graph, including its Fourier and wavelet transforms, so generator
gradients flow through every domain; the rasterized conditioning image is
a constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import spectral
from .voxelisation import RasterImage

LOSS_CSV_HEADER = "iter,g_total,g_percept,g_adv_rgb,g_adv_fourier,g_adv_dwt,d_rgb,d_fourier,d_dwt"

DOMAINS = ("rgb", "fourier", "dwt")


@dataclass(frozen=True)
class GanLabels:
    real_label: float = 1.0
    fake_label: float = 0.0
    target: float = 1.0

    def __post_init__(self):
        if self.real_label == self.fake_label:
            raise ValueError("real and fake labels must differ")


@dataclass(frozen=True)
class PerceptualConfig:
    layer_weights: tuple = (1.0, 1.0, 1.0)
    extractor_seed: int = 0

    def __post_init__(self):
        if any(w < 0 for w in self.layer_weights):
            raise ValueError(f"layer weights must be nonnegative, got {self.layer_weights}")


# ---------------------------------------------------------------------------
# differentiable transforms (image side of the assembled pairs)
# ---------------------------------------------------------------------------

_DFT_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _dft_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cos/sin DFT matrices with rows in zero-frequency-centered order."""
    if n not in _DFT_CACHE:
        freqs = np.fft.fftshift(np.fft.fftfreq(n) * n)
        ang = 2.0 * np.pi * np.outer(freqs, np.arange(n)) / n
        _DFT_CACHE[n] = (np.cos(ang), np.sin(ang))
    return _DFT_CACHE[n]


def gray_t(image) -> ad.Tensor:
    """BT.601 luma of an (H, W, 3) image inside the graph."""
    t = ad.as_tensor(image)
    if len(t.shape) != 3 or t.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {t.shape}")
    return t[:, :, 0] * 0.299 + t[:, :, 1] * 0.587 + t[:, :, 2] * 0.114


def dft2_magnitude_t(gray) -> ad.Tensor:
    """Centered DFT magnitude as matrix products, differentiable throughout.

    With C/S the cos/sin matrices in shifted row order, the real and
    imaginary parts of the shifted spectrum are C_h X C_w' - S_h X S_w' and
    -(C_h X S_w' + S_h X C_w'); magnitude via hypot. Matches
    spectral.dft2_magnitude to round-off.
    """
    x = ad.as_tensor(gray)
    h, w = x.shape
    ch, sh = (ad.Tensor(m) for m in _dft_matrices(h))
    cw, sw = (ad.Tensor(m) for m in _dft_matrices(w))
    cwt, swt = ad.transpose(cw, (1, 0)), ad.transpose(sw, (1, 0))
    re = ad.matmul(ad.matmul(ch, x), cwt) - ad.matmul(ad.matmul(sh, x), swt)
    im = -(ad.matmul(ad.matmul(ch, x), swt) + ad.matmul(ad.matmul(sh, x), cwt))
    return ad.hypot(re, im)


_DWT_KERNEL = 0.5 * np.array([
    [[1.0, 1.0], [1.0, 1.0]],     # ll
    [[1.0, -1.0], [1.0, -1.0]],   # hl: vertical detail
    [[1.0, 1.0], [-1.0, -1.0]],   # lh: horizontal detail
    [[1.0, -1.0], [-1.0, 1.0]],   # hh
])[:, None, :, :]


def _pad_even_t(x: ad.Tensor) -> ad.Tensor:
    h, w = x.shape
    if h % 2:
        x = ad.concat([x, x[h - 1:h, :]], axis=0)
    if w % 2:
        x = ad.concat([x, x[:, w - 1:w]], axis=1)
    return x


def dwt2_haar_t(gray) -> ad.Tensor:
    """One-level Haar analysis as a fixed stride-2 convolution.

    Returns (4, H/2, W/2) stacked as (ll, hl, lh, hh); equal to
    spectral.dwt2_haar and differentiable in the input.
    """
    x = _pad_even_t(ad.as_tensor(gray))
    h, w = x.shape
    batched = ad.reshape(x, (1, 1, h, w))
    out = ad.conv2d(batched, ad.Tensor(_DWT_KERNEL), stride=(2, 2))
    return ad.reshape(out, (4, h // 2, w // 2))


def minmax_normalize_t(x) -> ad.Tensor:
    """Map to [0, 1] by the (differentiable) min and max, guarded for
    constant inputs."""
    x = ad.as_tensor(x)
    lo = ad.reduce_min(x)
    hi = ad.reduce_max(x)
    return (x - lo) / (hi - lo + 1e-12)


def _fourier_channel_t(gray) -> ad.Tensor:
    return minmax_normalize_t(ad.log(dft2_magnitude_t(gray) + 1.0))


def fourier_channel(gray: np.ndarray) -> np.ndarray:
    """Numpy twin of the graph-side Fourier channel, for constant inputs."""
    mag = spectral.dft2_magnitude(gray)
    comp = np.log(1.0 + mag)
    lo, hi = comp.min(), comp.max()
    return (comp - lo) / (hi - lo + 1e-12)


# ---------------------------------------------------------------------------
# discriminator input assembly
# ---------------------------------------------------------------------------

def _check_pair(image, raster: RasterImage):
    shape = image.shape if isinstance(image, ad.Tensor) else np.asarray(image).shape
    if len(shape) != 3 or shape[2] != 3:
        raise ValueError(f"candidate image must be H x W x 3, got {shape}")
    if shape[:2] != raster.pixels.shape[:2]:
        raise ValueError(f"image {shape[:2]} and raster {raster.pixels.shape[:2]} sizes differ")


def assemble_rgb_input(image, raster: RasterImage) -> ad.Tensor:
    """[candidate | raster] channel concatenation, H x W x 6."""
    _check_pair(image, raster)
    return ad.concat([ad.as_tensor(image), ad.Tensor(raster.pixels)], axis=2)


def assemble_fourier_input(image, raster: RasterImage) -> ad.Tensor:
    """Two log-magnitude spectra (candidate, raster), H x W x 2, each
    min-max normalized to [0, 1]."""
    _check_pair(image, raster)
    ch0 = _fourier_channel_t(gray_t(image))
    ch1 = fourier_channel(spectral.to_grayscale(raster.pixels))
    h, w = ch1.shape
    return ad.concat([ad.reshape(ch0, (h, w, 1)), ad.Tensor(ch1.reshape(h, w, 1))], axis=2)


def assemble_dwt_input(image, raster: RasterImage) -> ad.Tensor:
    """Wavelet detail stack [HL, LH, HH of candidate | HL, LH, HH of
    raster], (H/2) x (W/2) x 6."""
    _check_pair(image, raster)
    img_bands = dwt2_haar_t(gray_t(image))           # (4, h2, w2)
    details = ad.transpose(img_bands[1:4], (1, 2, 0))
    rb = spectral.dwt2_haar(spectral.to_grayscale(raster.pixels))
    raster_details = np.stack([rb.hl, rb.lh, rb.hh], axis=2)
    return ad.concat([details, ad.Tensor(raster_details)], axis=2)


def as_disc_batch(assembled: ad.Tensor) -> ad.Tensor:
    """Channel-last assembly to a batched channel-first discriminator input."""
    chw = ad.transpose(assembled, (2, 0, 1))
    return ad.reshape(chw, (1,) + chw.shape)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _score_tensor(scores) -> ad.Tensor:
    t = ad.as_tensor(scores)
    if not np.all(np.isfinite(t.data)):
        raise ValueError("score map contains non-finite values")
    return t


def lsgan_d_loss(real_scores, fake_scores, labels: GanLabels = GanLabels(),
                 normalize: bool = False) -> ad.Tensor:
    """Least-squares patch loss: sum of (real - a*)^2 + (fake - b*)^2 over
    the patch maps. ``normalize`` divides by the patch count instead of
    keeping the raw sum form.

    Worked example with the default labels a* = 1, b* = 0: two constant 2x2
    score maps at 0.5 give 4 * (0.5 - 1)^2 + 4 * (0.5 - 0)^2 = 2.0.
    """
    r, f = _score_tensor(real_scores), _score_tensor(fake_scores)
    if r.shape != f.shape:
        raise ValueError(f"real map shape {r.shape} != fake map shape {f.shape}")
    loss = ((r - labels.real_label) ** 2).sum() + ((f - labels.fake_label) ** 2).sum()
    if normalize:
        loss = loss / float(r.size)
    return loss


def total_d_loss(per_domain) -> ad.Tensor:
    """Unweighted sum of the per-domain discriminator losses (any non-empty
    subset of the three domains, for ablations)."""
    terms = list(per_domain)
    if not terms:
        raise ValueError("need at least one domain loss")
    total = ad.as_tensor(terms[0])
    for t in terms[1:]:
        total = total + ad.as_tensor(t)
    return total


_EXTRACTOR_CACHE: dict[tuple, list] = {}


def _extractor_params(seed: int, in_channels: int) -> list:
    """Frozen random conv stack standing in for a pretrained feature
    extractor: three stride-2 stages, channels growing 8, 16, 32."""
    key = (seed, in_channels)
    if key not in _EXTRACTOR_CACHE:
        rng = np.random.default_rng(seed)
        params = []
        c_in = in_channels
        for c_out in (8, 16, 32):
            fan = c_in * 9
            w = rng.normal(0.0, np.sqrt(2.0 / fan), size=(c_out, c_in, 3, 3))
            params.append(ad.Tensor(w, requires_grad=False))
            c_in = c_out
        _EXTRACTOR_CACHE[key] = params
    return _EXTRACTOR_CACHE[key]


def perceptual_features(image, cfg: PerceptualConfig = PerceptualConfig()) -> list:
    """Stage outputs of the frozen extractor for an (H, W, C) image."""
    t = ad.as_tensor(image)
    if len(t.shape) != 3:
        raise ValueError(f"expected an H x W x C image, got shape {t.shape}")
    x = ad.reshape(ad.transpose(t, (2, 0, 1)), (1, t.shape[2]) + t.shape[:2])
    feats = []
    for w in _extractor_params(cfg.extractor_seed, t.shape[2]):
        x = ad.leaky_relu(ad.conv2d(x, w, stride=(2, 2), padding=(1, 1)))
        feats.append(x)
    return feats


def perceptual_loss(gen, real, cfg: PerceptualConfig = PerceptualConfig()) -> ad.Tensor:
    """Pixel L1 plus weighted L1 gaps between frozen extractor features.

    Differentiable with respect to ``gen`` only; ``real`` enters as a
    constant. Zero exactly when the images match.
    """
    g = ad.as_tensor(gen)
    r = np.asarray(real.data if isinstance(real, ad.Tensor) else real, dtype=np.float64)
    if g.shape != r.shape:
        raise ValueError(f"generated {g.shape} and real {r.shape} shapes differ")
    loss = ad.absolute(g - ad.Tensor(r)).sum()
    if any(w != 0 for w in cfg.layer_weights):
        gen_feats = perceptual_features(g, cfg)
        with ad.no_grad():
            real_feats = perceptual_features(ad.Tensor(r), cfg)
        for lam, gf, rf in zip(cfg.layer_weights, gen_feats, real_feats):
            if lam != 0:
                loss = loss + ad.absolute(gf - ad.Tensor(rf.data)).sum() * lam
    return loss


def g_adversarial_term(scores, target: float, normalize: bool = False) -> ad.Tensor:
    """Squared pull of a generated-patch score map toward the real label.

    Worked example with target c = 1: a constant 2x2 map at 0.5 gives
    4 * (0.5 - 1)^2 = 1.0.
    """
    t = _score_tensor(scores)
    term = ((t - target) ** 2).sum()
    if normalize:
        term = term / float(t.size)
    return term


def g_loss_terms(gen_scores: dict, gen, real, labels: GanLabels = GanLabels(),
                 cfg: PerceptualConfig = PerceptualConfig(),
                 domains: tuple = DOMAINS, normalize: bool = False):
    """Generator objective split into named terms.

    Returns (total, parts) where parts maps "percept" and "adv_<domain>" to
    scalar Tensors. Every requested domain must have a score map.
    """
    for d in domains:
        if d not in gen_scores:
            raise ValueError(f"no score map supplied for the {d!r} domain")
    parts = {"percept": perceptual_loss(gen, real, cfg)}
    total = parts["percept"]
    for d in domains:
        term = g_adversarial_term(gen_scores[d], labels.target, normalize)
        parts[f"adv_{d}"] = term
        total = total + term
    return total, parts


def g_loss(gen_scores: dict, gen, real, labels: GanLabels = GanLabels(),
           cfg: PerceptualConfig = PerceptualConfig(),
           domains: tuple = DOMAINS, normalize: bool = False) -> ad.Tensor:
    """Perceptual loss plus the patch least-squares pull toward the target
    label, summed over the active domains."""
    total, _ = g_loss_terms(gen_scores, gen, real, labels, cfg, domains, normalize)
    return total


# ---------------------------------------------------------------------------
# loss-curve log
# ---------------------------------------------------------------------------

def write_loss_csv(rows, path) -> None:
    """Rows of 9 values per LOSS_CSV_HEADER; iteration first."""
    lines = [LOSS_CSV_HEADER]
    for row in rows:
        if len(row) != 9:
            raise ValueError(f"loss rows carry 9 fields, got {len(row)}")
        lines.append(",".join([str(int(row[0]))] + [repr(float(v)) for v in row[1:]]))
    Path(path).write_text("\n".join(lines) + "\n")
