"""Independent reference implementations used to cross-check pcrender.

Everything in this file is written the slow, obvious way: scalar python
loops, complex exponentials, per-pixel scans, per-voxel point lists. None of
it shares code with the vectorised implementations under test, so agreement
actually means something.
"""

import math

import numpy as np
import scipy.ndimage

from pcrender import autodiff as ad


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def numeric_gradient(fn, arrays, index, eps=1e-5, sample=None, rng=None):
    """Central-difference gradient of scalar ``fn(*arrays)`` w.r.t.
    ``arrays[index]``.

    Returns (flat_positions, fd_values). With ``sample`` set, only that many
    randomly chosen entries are probed (enough to catch a wrong gradient,
    cheap enough to run hundreds of instances).
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[index]
    flat = target.reshape(-1)
    positions = np.arange(flat.size)
    if sample is not None and sample < flat.size:
        rng = rng or np.random.default_rng(0)
        positions = rng.choice(flat.size, size=sample, replace=False)
    fd = np.empty(len(positions))
    for slot, pos in enumerate(positions):
        orig = flat[pos]
        flat[pos] = orig + eps
        hi = fn(*arrays)
        flat[pos] = orig - eps
        lo = fn(*arrays)
        flat[pos] = orig
        fd[slot] = (hi - lo) / (2.0 * eps)
    return positions, fd


def check_gradients(build, shapes, seed, eps=1e-5, sample=48, rel_tol=1e-4,
                    scale=1.0, shift=0.0):
    """FD-check a Tensor-valued graph builder against autodiff.

    ``build`` maps input Tensors to an output Tensor (any shape); the output
    is reduced to a scalar with a fixed random projection so every output
    entry influences the loss. Returns the worst relative error across all
    inputs, measured in max-norm against the analytic gradient's scale.
    """
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal(s) * scale + shift for s in shapes]
    probe = None

    def scalar_fn(*arrs):
        nonlocal probe
        with ad.no_grad():
            out = build(*[ad.Tensor(a) for a in arrs])
        if probe is None:
            probe = np.random.default_rng(seed + 1).standard_normal(out.shape)
        return float((out.data * probe).sum())

    scalar_fn(*arrays)  # fix the projection
    tensors = [ad.Tensor(a, requires_grad=True) for a in arrays]
    out = build(*tensors)
    loss = (out * ad.Tensor(probe)).sum()
    loss.backward()

    worst = 0.0
    for i, t in enumerate(tensors):
        analytic = t.grad.reshape(-1)
        positions, fd = numeric_gradient(scalar_fn, arrays, i, eps=eps,
                                         sample=sample, rng=rng)
        denom = max(np.abs(analytic).max(), np.abs(fd).max(), 1e-8)
        worst = max(worst, float(np.abs(analytic[positions] - fd).max() / denom))
    assert worst < rel_tol, f"finite-difference mismatch: rel error {worst:.3e}"
    return worst


# ---------------------------------------------------------------------------
# spectral references
# ---------------------------------------------------------------------------

def naive_dft2_magnitude(gray):
    """Centered magnitude spectrum via the textbook double sum with complex
    exponentials, then numpy's own fftshift for the centering."""
    x = np.asarray(gray, dtype=np.float64)
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for k in range(h):
        for l in range(w):
            acc = 0.0 + 0.0j
            for m in range(h):
                for n in range(w):
                    acc += x[m, n] * np.exp(-2j * np.pi * (k * m / h + l * n / w))
            out[k, l] = acc
    return np.abs(np.fft.fftshift(out))


def haar_subbands_reference(gray):
    """One-level Haar analysis by direct 2x2 block arithmetic.

    Odd sizes are edge-padded to even first (same convention as the library).
    Returns (ll, hl, lh, hh) with hl = vertical detail (horizontal
    differencing) and lh = horizontal detail.
    """
    x = np.asarray(gray, dtype=np.float64)
    h, w = x.shape
    x = np.pad(x, ((0, h % 2), (0, w % 2)), mode="edge")
    h, w = x.shape
    ll = np.zeros((h // 2, w // 2))
    hl = np.zeros_like(ll)
    lh = np.zeros_like(ll)
    hh = np.zeros_like(ll)
    for i in range(h // 2):
        for j in range(w // 2):
            a = x[2 * i, 2 * j]
            b = x[2 * i, 2 * j + 1]
            c = x[2 * i + 1, 2 * j]
            d = x[2 * i + 1, 2 * j + 1]
            ll[i, j] = (a + b + c + d) / 2.0
            hl[i, j] = (a - b + c - d) / 2.0
            lh[i, j] = (a + b - c - d) / 2.0
            hh[i, j] = (a - b - c + d) / 2.0
    return ll, hl, lh, hh


def gaussian_blur(gray, sigma):
    if sigma == 0:
        return np.asarray(gray, dtype=np.float64)
    return scipy.ndimage.gaussian_filter(np.asarray(gray, dtype=np.float64), sigma)


# ---------------------------------------------------------------------------
# projection / voxelisation references
# ---------------------------------------------------------------------------

def project_scalar(point, view):
    """One point through the pinhole, written out in scalar algebra."""
    r = view.pose.rotation
    t = view.pose.translation
    cam = [sum(r[i][j] * point[j] for j in range(3)) + t[i] for i in range(3)]
    x, y, z = cam
    if z <= 0:
        return None
    k = view.intrinsics
    return (k.fx * x / z + k.cx, k.fy * y / z + k.cy, z)


def plane_edges_scalar(near, far, num_planes, spacing):
    edges = []
    for i in range(num_planes + 1):
        f = i / num_planes
        if spacing == "depth":
            edges.append(near + (far - near) * f)
        else:
            edges.append(1.0 / (1.0 / near - (1.0 / near - 1.0 / far) * f))
    return edges


def naive_voxelise(cloud, view, frustum, cfg):
    """Scalar two-pass voxelisation: cull and bin point by point, then
    aggregate each voxel from an explicit per-voxel point list.

    Returns (features, weight_sums, occupancy) with the same shapes as the
    library's volume.
    """
    k = view.intrinsics
    p, h, w = cfg.num_planes, k.height, k.width
    near, far = frustum.near, frustum.far
    spacing = cfg.plane_spacing
    edges = plane_edges_scalar(near, far, p, spacing)
    half_diag = math.sqrt(3.0) / 2.0

    buckets = {}
    for pos, feat in zip(np.asarray(cloud.positions), np.asarray(cloud.features)):
        hit = project_scalar(pos, view)
        if hit is None:
            continue
        u, v, z = hit
        if not (near <= z <= far and 0 <= u < k.width and 0 <= v < k.height):
            continue
        if spacing == "depth":
            pc = p * (z - near) / (far - near)
        else:
            pc = p * (1.0 / near - 1.0 / z) / (1.0 / near - 1.0 / far)
        plane = min(int(math.floor(pc)), p - 1)
        row, col = int(math.floor(v)), int(math.floor(u))
        buckets.setdefault((plane, row, col), []).append((u, v, z, pc, feat))

    c = cloud.num_channels
    feats_out = np.zeros((p, h, w, c))
    wsum_out = np.zeros((p, h, w))
    occ_out = np.zeros((p, h, w), dtype=bool)
    for (plane, row, col), pts in buckets.items():
        f_bar = np.mean([f for (_, _, _, _, f) in pts], axis=0)
        min_z = min(z for (_, _, z, _, _) in pts)
        slab = edges[plane + 1] - edges[plane]
        weights, feats = [], []
        for (u, v, z, pc, f) in pts:
            du = u - (col + 0.5)
            dv = v - (row + 0.5)
            dp = pc - (plane + 0.5)
            d1 = math.sqrt(du * du + dv * dv + dp * dp) / half_diag
            d2 = min(max((z - min_z) / slab, 0.0), 1.0)
            ds = (1.0 - d1) ** cfg.alpha * (1.0 + d2) ** cfg.beta
            l1 = float(np.abs(np.asarray(f) - f_bar).sum())
            df = 1.0 / max(l1, cfg.epsilon_f)
            weights.append(cfg.mu_f * df + cfg.mu_s * ds)
            feats.append(np.asarray(f, dtype=np.float64))
        weights = np.asarray(weights)
        feats_out[plane, row, col] = (weights[:, None] * np.stack(feats)).sum(0) / weights.sum()
        wsum_out[plane, row, col] = weights.sum()
        occ_out[plane, row, col] = True
    return feats_out, wsum_out, occ_out


def naive_zbuffer(cloud, view, frustum):
    """Per-pixel nearest-depth scan with explicit tie-breaking on the lowest
    point index. Returns (image, depth)."""
    k = view.intrinsics
    h, w = k.height, k.width
    c = cloud.num_channels
    image = np.zeros((h, w, c))
    depth = np.full((h, w), np.inf)
    winner = np.full((h, w), -1, dtype=np.int64)
    for i, (pos, feat) in enumerate(zip(np.asarray(cloud.positions),
                                        np.asarray(cloud.features))):
        hit = project_scalar(pos, view)
        if hit is None:
            continue
        u, v, z = hit
        if not (frustum.near <= z <= frustum.far and 0 <= u < w and 0 <= v < h):
            continue
        row, col = int(math.floor(v)), int(math.floor(u))
        if z < depth[row, col] or (z == depth[row, col] and i < winner[row, col]):
            depth[row, col] = z
            winner[row, col] = i
            image[row, col] = feat
    return image, depth


# ---------------------------------------------------------------------------
# optimiser / loss references
# ---------------------------------------------------------------------------

def scalar_adam(param, grad, m, v, t, lr, beta1=0.5, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam on flat python floats; returns updated copies."""
    param = [float(x) for x in np.asarray(param).reshape(-1)]
    grad = [float(x) for x in np.asarray(grad).reshape(-1)]
    m = [float(x) for x in np.asarray(m).reshape(-1)]
    v = [float(x) for x in np.asarray(v).reshape(-1)]
    out_p, out_m, out_v = [], [], []
    for p_i, g_i, m_i, v_i in zip(param, grad, m, v):
        m_i = beta1 * m_i + (1.0 - beta1) * g_i
        v_i = beta2 * v_i + (1.0 - beta2) * g_i * g_i
        m_hat = m_i / (1.0 - beta1 ** t)
        v_hat = v_i / (1.0 - beta2 ** t)
        out_p.append(p_i - lr * m_hat / (math.sqrt(v_hat) + eps))
        out_m.append(m_i)
        out_v.append(v_i)
    return np.array(out_p), np.array(out_m), np.array(out_v)


def scalar_lsgan_d(real_scores, fake_scores, a=1.0, b=0.0):
    total = 0.0
    for r in np.asarray(real_scores).reshape(-1):
        total += (float(r) - a) ** 2
    for f in np.asarray(fake_scores).reshape(-1):
        total += (float(f) - b) ** 2
    return total


def scalar_lsgan_g(fake_scores, c=1.0):
    total = 0.0
    for f in np.asarray(fake_scores).reshape(-1):
        total += (float(f) - c) ** 2
    return total


def scalar_l1(a, b):
    total = 0.0
    for x, y in zip(np.asarray(a).reshape(-1), np.asarray(b).reshape(-1)):
        total += abs(float(x) - float(y))
    return total
