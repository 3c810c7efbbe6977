"""Network specs, the layer interpreter, and the stock architectures:
a 3-D U-Net generator that collapses the plane dimension into an image,
and the three five-layer patch discriminators.

A NetworkSpec is a flat layer list plus an init seed and the accepted
input shape; skip connections are expressed with save/concat layers so the
whole graph round-trips through JSON. Parameters are float64 and seeded,
so two builds from one spec are bitwise identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad

_KINDS = ("conv2d", "conv3d", "instance_norm", "leaky_relu", "maxpool2d",
          "avgpool2d", "upsample_nearest", "save", "concat", "squeeze_depth",
          "clamp01")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int | None = None
    kernel: tuple | None = None
    stride: tuple | None = None
    padding: tuple | None = None
    activation: str = "linear"
    bias_init: float = 0.0
    factor: int | None = None
    tag: str | None = None
    slope: float = 0.2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; valid kinds: {', '.join(_KINDS)}")
        if self.activation not in ("linear", "leaky_relu"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("out_channels", "kernel", "stride", "padding", "factor", "tag"):
            val = getattr(self, key)
            if val is not None:
                d[key] = list(val) if isinstance(val, tuple) else val
        if self.kind.startswith("conv"):
            d["activation"] = self.activation
            d["bias_init"] = self.bias_init
        if self.kind == "leaky_relu" or self.activation == "leaky_relu":
            d["slope"] = self.slope
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        kw = dict(d)
        for key in ("kernel", "stride", "padding"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape (without the batch axis), ordered layers, and init seed."""

    input_shape: tuple
    layers: tuple
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "input_shape": list(self.input_shape),
            "layers": [l.to_dict() for l in self.layers],
            "seed": self.seed,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        d = json.loads(text)
        return cls(input_shape=tuple(d["input_shape"]),
                   layers=tuple(LayerSpec.from_dict(l) for l in d["layers"]),
                   seed=d["seed"])

    def __eq__(self, other):
        return isinstance(other, NetworkSpec) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(self.to_json())


def _conv_out(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


class Network:
    """Executable network: seeded parameters plus a layer interpreter.

    ``forward`` takes and returns batched channel-first Tensors. The
    output shape for the declared input is precomputed at build time and
    exposed as ``output_shape`` (``map_size`` gives its trailing spatial
    dims, the patch-map size for discriminators).
    """

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.params: list[ad.Tensor] = []
        self.param_names: list[str] = []
        self._layer_params: list[tuple] = []
        rng = np.random.default_rng(spec.seed)
        shape = (1,) + tuple(spec.input_shape)
        saved: dict[str, tuple] = {}
        for i, layer in enumerate(spec.layers):
            shape = self._build_layer(i, layer, shape, saved, rng)
        self.output_shape = shape

    def _add_param(self, name: str, arr: np.ndarray) -> int:
        t = ad.Tensor(arr, requires_grad=True, name=name)
        self.params.append(t)
        self.param_names.append(name)
        return len(self.params) - 1

    def _build_layer(self, i, layer, shape, saved, rng):
        kind = layer.kind
        if kind in ("conv2d", "conv3d"):
            nd = 2 if kind == "conv2d" else 3
            if len(shape) != nd + 2:
                raise ValueError(f"layer {i} ({kind}): expected a {nd + 2}-D input, got shape {shape}")
            c_in = shape[1]
            k = layer.kernel if len(layer.kernel) == nd else layer.kernel * nd
            s = layer.stride or (1,) * nd
            p = layer.padding or (0,) * nd
            spatial = [_conv_out(n, kk, ss, pp) for n, kk, ss, pp in zip(shape[2:], k, s, p)]
            if any(n < 1 for n in spatial):
                raise ValueError(
                    f"layer {i} ({kind}): input spatial size {shape[2:]} too small for "
                    f"kernel {k} stride {s} padding {p}")
            fan_in = c_in * int(np.prod(k))
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(layer.out_channels, c_in) + tuple(k))
            b = np.full(layer.out_channels, layer.bias_init)
            wi = self._add_param(f"layer{i}.weight", w)
            bi = self._add_param(f"layer{i}.bias", b)
            self._layer_params.append((wi, bi))
            return (shape[0], layer.out_channels) + tuple(spatial)
        self._layer_params.append(None)
        if kind == "save":
            saved[layer.tag] = shape
            return shape
        if kind == "concat":
            if layer.tag not in saved:
                raise ValueError(f"layer {i}: concat references unsaved tag {layer.tag!r}")
            other = saved[layer.tag]
            if other[2:] != shape[2:] or other[0] != shape[0]:
                raise ValueError(
                    f"layer {i}: concat shapes {shape} and {other} differ outside the channel axis")
            return shape[:1] + (shape[1] + other[1],) + shape[2:]
        if kind == "upsample_nearest":
            return shape[:2] + tuple(n * layer.factor for n in shape[2:])
        if kind in ("maxpool2d", "avgpool2d"):
            kk = layer.kernel[0]
            if shape[-2] % kk or shape[-1] % kk:
                raise ValueError(f"layer {i} ({kind}): spatial dims {shape[-2:]} not divisible by {kk}")
            return shape[:-2] + (shape[-2] // kk, shape[-1] // kk)
        if kind == "squeeze_depth":
            if len(shape) != 5 or shape[2] != 1:
                raise ValueError(f"layer {i}: squeeze_depth needs a depth-1 volume, got {shape}")
            return shape[:2] + shape[3:]
        return shape  # instance_norm, leaky_relu, clamp01 preserve shape

    @property
    def map_size(self) -> tuple:
        return tuple(self.output_shape[2:])

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.params:
            p.requires_grad = flag

    def forward(self, x) -> ad.Tensor:
        h = ad.as_tensor(x)
        expected = (1,) + tuple(self.spec.input_shape)
        if h.shape[1:] != expected[1:] or len(h.shape) != len(expected):
            raise ValueError(f"forward input shape {h.shape} does not match spec {expected}")
        saved: dict[str, ad.Tensor] = {}
        for layer, lp in zip(self.spec.layers, self._layer_params):
            kind = layer.kind
            if kind in ("conv2d", "conv3d"):
                w, b = self.params[lp[0]], self.params[lp[1]]
                nd = 2 if kind == "conv2d" else 3
                s = layer.stride or (1,) * nd
                p = layer.padding or (0,) * nd
                op = ad.conv2d if kind == "conv2d" else ad.conv3d
                h = op(h, w, b, stride=s, padding=p)
                if layer.activation == "leaky_relu":
                    h = ad.leaky_relu(h, layer.slope)
            elif kind == "instance_norm":
                h = ad.instance_norm(h)
            elif kind == "leaky_relu":
                h = ad.leaky_relu(h, layer.slope)
            elif kind == "maxpool2d":
                h = ad.maxpool2d(h, layer.kernel[0])
            elif kind == "avgpool2d":
                h = ad.avgpool2d(h, layer.kernel[0])
            elif kind == "upsample_nearest":
                h = ad.upsample_nearest(h, layer.factor)
            elif kind == "save":
                saved[layer.tag] = h
            elif kind == "concat":
                h = ad.concat([h, saved[layer.tag]], axis=1)
            elif kind == "squeeze_depth":
                h = ad.reshape(h, (h.shape[0], h.shape[1]) + h.shape[3:])
            elif kind == "clamp01":
                h = ad.clip(h, 0.0, 1.0)
        return h

    def __call__(self, x) -> ad.Tensor:
        return self.forward(x)


def build_network(spec: NetworkSpec) -> Network:
    return Network(spec)


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def generator_spec(num_planes: int, height: int, width: int, in_channels: int = 3,
                   base_channels: int = 8, seed: int = 0) -> NetworkSpec:
    """Three-level 3-D U-Net over a (C, P, H, W) volume.

    Encoder channels c, 2c, 4c with stride-2 downsampling convs; mirrored
    decoder with nearest-neighbor upsampling and skip concatenations; a
    final plane-spanning conv collapses depth to one slab, and a clamp maps
    the image into [0, 1]. P, H, W must be divisible by 4 so the skips align.
    """
    for name, n in (("num_planes", num_planes), ("height", height), ("width", width)):
        if n % 4:
            raise ValueError(f"{name} must be divisible by 4 for two halvings, got {n}")
    c = base_channels
    conv = lambda cout, stride=(1, 1, 1), **kw: LayerSpec(
        "conv3d", out_channels=cout, kernel=(3, 3, 3), stride=stride,
        padding=(1, 1, 1), activation="leaky_relu", **kw)
    layers = (
        conv(c),
        LayerSpec("save", tag="skip0"),
        conv(2 * c, stride=(2, 2, 2)),
        LayerSpec("save", tag="skip1"),
        conv(4 * c, stride=(2, 2, 2)),
        conv(4 * c),
        LayerSpec("upsample_nearest", factor=2),
        LayerSpec("concat", tag="skip1"),
        conv(2 * c),
        LayerSpec("upsample_nearest", factor=2),
        LayerSpec("concat", tag="skip0"),
        conv(c),
        LayerSpec("conv3d", out_channels=3, kernel=(num_planes, 1, 1),
                  stride=(1, 1, 1), padding=(0, 0, 0), activation="linear",
                  bias_init=0.5),
        LayerSpec("squeeze_depth"),
        LayerSpec("clamp01"),
    )
    return NetworkSpec(input_shape=(in_channels, num_planes, height, width),
                       layers=layers, seed=seed)


def build_generator(spec: NetworkSpec | None = None, *, num_planes: int = 32,
                    height: int = 64, width: int = 64, in_channels: int = 3,
                    base_channels: int = 8, seed: int = 0) -> Network:
    """Generator handle; with no spec, builds the desk-scale default."""
    if spec is None:
        spec = generator_spec(num_planes, height, width, in_channels,
                              base_channels, seed)
    net = Network(spec)
    if len(net.output_shape) != 4 or net.output_shape[1] != 3:
        raise ValueError(f"generator spec must end in a 3-channel image, got {net.output_shape}")
    return net


# ---------------------------------------------------------------------------
# discriminators
# ---------------------------------------------------------------------------

# Five-layer plans: two aggressive anisotropic downsampling stages sized for
# 3:4 aspect inputs, then three stride-1 layers. Kernels are stride + 2 with
# padding 2, so out = floor((n - s + 2) / s) + 1 per axis. At full working
# resolution: rgb/fourier 240x320 -> 80x80 -> 16x16; dwt 120x160 -> 40x40 -> 10x10.
_DISC_STRIDES = {
    "rgb": ((3, 4), (5, 5), (1, 1), (1, 1), (1, 1)),
    "fourier": ((3, 4), (5, 5), (1, 1), (1, 1), (1, 1)),
    "dwt": ((3, 4), (4, 4), (1, 1), (1, 1), (1, 1)),
}
_DISC_CHANNELS = (16, 32, 64, 64, 1)

DISCRIMINATOR_KINDS = tuple(_DISC_STRIDES)


def discriminator_spec(kind: str, input_channels: int, input_size: tuple,
                       seed: int = 0) -> NetworkSpec:
    kind = kind.lower()
    if kind not in _DISC_STRIDES:
        raise ValueError(f"unknown discriminator kind {kind!r}; valid: {', '.join(_DISC_STRIDES)}")
    h, w = input_size
    layers = []
    for li, (stride, cout) in enumerate(zip(_DISC_STRIDES[kind], _DISC_CHANNELS)):
        kernel = tuple(s + 2 for s in stride)
        padding = tuple(2 if s > 1 else 1 for s in stride)
        last = li == len(_DISC_CHANNELS) - 1
        layers.append(LayerSpec("conv2d", out_channels=cout, kernel=kernel,
                                stride=stride, padding=padding,
                                activation="linear" if last else "leaky_relu"))
    return NetworkSpec(input_shape=(input_channels, h, w), layers=tuple(layers), seed=seed)


def _min_disc_size(kind: str) -> tuple:
    """Smallest (h, w) that survives all five layers, by direct scan."""
    out = []
    for axis in range(2):
        n = 1
        while True:
            m = n
            ok = True
            for stride in _DISC_STRIDES[kind]:
                s = stride[axis]
                m = _conv_out(m, s + 2, s, 2 if s > 1 else 1)
                if m < 1:
                    ok = False
                    break
            if ok:
                out.append(n)
                break
            n += 1
    return tuple(out)


def build_discriminator(kind: str, input_channels: int, input_size: tuple,
                        seed: int = 0) -> Network:
    """Five-conv patch discriminator; ``map_size`` on the handle reports the
    patch-map shape (16x16 at 240x320 for rgb/fourier, 10x10 at 120x160 for
    dwt). Too-small inputs fail at build time with the minimal legal size."""
    spec = discriminator_spec(kind, input_channels, input_size, seed)
    try:
        return Network(spec)
    except ValueError as e:
        if "too small" in str(e):
            raise ValueError(
                f"{kind} discriminator input {tuple(input_size)} too small; "
                f"minimal legal size is {_min_disc_size(kind.lower())}") from e
        raise


# ---------------------------------------------------------------------------
# parameter checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(net: Network, path) -> None:
    """Spec JSON (length-prefixed) followed by flat little-endian float64
    parameters; written atomically via a temp file."""
    path = Path(path)
    spec_bytes = net.spec.to_json().encode("utf-8")
    blob = np.concatenate([p.data.ravel() for p in net.params]) if net.params else np.empty(0)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(np.asarray([len(spec_bytes)], dtype="<u4").tobytes())
        fh.write(spec_bytes)
        fh.write(blob.astype("<f8").tobytes())
    os.replace(tmp, path)


def read_checkpoint(path) -> tuple[NetworkSpec, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise ValueError(f"{path}: not a parameter checkpoint")
    n = int(np.frombuffer(raw, dtype="<u4", count=1)[0])
    if len(raw) < 4 + n:
        raise ValueError(f"{path}: truncated checkpoint header")
    spec = NetworkSpec.from_json(raw[4:4 + n].decode("utf-8"))
    flat = np.frombuffer(raw, dtype="<f8", offset=4 + n).astype(np.float64)
    return spec, flat


def load_checkpoint(net: Network, path) -> None:
    """Restore parameters in place; the stored spec must equal the net's."""
    spec, flat = read_checkpoint(path)
    if spec != net.spec:
        raise ValueError(f"{path}: checkpoint spec does not match this network's spec")
    total = sum(p.size for p in net.params)
    if flat.size != total:
        raise ValueError(f"{path}: checkpoint holds {flat.size} values, network needs {total}")
    off = 0
    for p in net.params:
        p.data = flat[off:off + p.size].reshape(p.shape).copy()
        off += p.size
