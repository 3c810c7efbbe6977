"""Discriminator input assembly, patch least-squares losses, the perceptual
loss, and the generator objective."""

import numpy as np
import pytest

from pcrender import autodiff as ad
from pcrender import spectral
from pcrender.adversarial import (DOMAINS, LOSS_CSV_HEADER, GanLabels,
                                  PerceptualConfig, as_disc_batch,
                                  assemble_dwt_input, assemble_fourier_input,
                                  assemble_rgb_input, fourier_channel,
                                  g_adversarial_term, g_loss, g_loss_terms,
                                  lsgan_d_loss, perceptual_features,
                                  perceptual_loss, total_d_loss,
                                  write_loss_csv)
from pcrender.networks import build_discriminator
from pcrender.voxelisation import RasterImage

import oracles


def _raster(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return RasterImage(rng.random((h, w, 3)), rng.uniform(1.0, 5.0, (h, w)))


def _image(h, w, seed=1):
    return np.random.default_rng(seed).random((h, w, 3))


# ---------------------------------------------------------------------------
# input assembly
# ---------------------------------------------------------------------------

def test_rgb_assembly_full_scale_shape():
    out = assemble_rgb_input(_image(240, 320), _raster(240, 320))
    assert out.shape == (240, 320, 6)


def test_rgb_assembly_channel_order_is_bitwise():
    img, ras = _image(16, 16), _raster(16, 16)
    out = assemble_rgb_input(img, ras)
    assert np.array_equal(out.data[..., :3], img)
    assert np.array_equal(out.data[..., 3:], ras.pixels)


def test_rgb_assembly_identical_pair():
    img = _image(8, 8)
    out = assemble_rgb_input(img, RasterImage(img, np.ones((8, 8))))
    assert np.array_equal(out.data[..., :3], out.data[..., 3:])


def test_assembly_rejects_mismatched_sizes():
    with pytest.raises(ValueError, match="differ"):
        assemble_rgb_input(_image(8, 8), _raster(8, 10))
    with pytest.raises(ValueError, match="differ"):
        assemble_fourier_input(_image(8, 8), _raster(10, 8))
    with pytest.raises(ValueError, match="differ"):
        assemble_dwt_input(_image(8, 8), _raster(10, 10))


def test_fourier_assembly_full_scale_shape():
    out = assemble_fourier_input(_image(240, 320), _raster(240, 320))
    assert out.shape == (240, 320, 2)
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_fourier_assembly_constant_inputs_are_dc_only():
    img = np.full((8, 8, 3), 0.5)
    ras = RasterImage(np.full((8, 8, 3), 0.25), np.ones((8, 8)))
    out = assemble_fourier_input(img, ras).data
    for ch in range(2):
        assert (out[..., ch] > 1e-9).sum() == 1


def test_fourier_assembly_matches_spectral_module():
    img, ras = _image(12, 16, seed=3), _raster(12, 16, seed=4)
    out = assemble_fourier_input(img, ras).data

    def reference(rgb):
        comp = np.log1p(spectral.dft2_magnitude(spectral.to_grayscale(rgb)))
        return (comp - comp.min()) / (comp.max() - comp.min() + 1e-12)

    np.testing.assert_allclose(out[..., 0], reference(img), atol=1e-9)
    np.testing.assert_allclose(out[..., 1], reference(ras.pixels), atol=1e-9)


def test_dwt_assembly_full_scale_shape():
    out = assemble_dwt_input(_image(240, 320), _raster(240, 320))
    assert out.shape == (120, 160, 6)


def test_dwt_assembly_constant_candidate_has_zero_details():
    img = np.full((16, 16, 3), 0.7)
    out = assemble_dwt_input(img, _raster(16, 16)).data
    np.testing.assert_allclose(out[..., :3], 0.0, atol=1e-12)


def test_dwt_assembly_matches_spectral_module():
    img, ras = _image(16, 20, seed=5), _raster(16, 20, seed=6)
    out = assemble_dwt_input(img, ras).data
    gb = spectral.dwt2_haar(spectral.to_grayscale(img))
    rb = spectral.dwt2_haar(spectral.to_grayscale(ras.pixels))
    np.testing.assert_allclose(out[..., 0], gb.hl, atol=1e-12)
    np.testing.assert_allclose(out[..., 1], gb.lh, atol=1e-12)
    np.testing.assert_allclose(out[..., 2], gb.hh, atol=1e-12)
    np.testing.assert_allclose(out[..., 3], rb.hl, atol=1e-12)
    np.testing.assert_allclose(out[..., 4], rb.lh, atol=1e-12)
    np.testing.assert_allclose(out[..., 5], rb.hh, atol=1e-12)


def test_as_disc_batch_layout():
    assembled = assemble_rgb_input(_image(8, 8), _raster(8, 8))
    batch = as_disc_batch(assembled)
    assert batch.shape == (1, 6, 8, 8)
    assert np.array_equal(batch.data[0, 2], assembled.data[..., 2])


def test_fourier_channel_twin_matches_graph_side():
    gray = np.random.default_rng(7).random((10, 14))
    from pcrender.adversarial import _fourier_channel_t
    graph = _fourier_channel_t(ad.Tensor(gray)).data
    np.testing.assert_allclose(graph, fourier_channel(gray), atol=1e-9)


# ---------------------------------------------------------------------------
# LSGAN arithmetic
# ---------------------------------------------------------------------------

def test_d_loss_perfect_discriminator_is_zero():
    real = np.ones((3, 3))
    fake = np.zeros((3, 3))
    assert lsgan_d_loss(real, fake).item() == 0.0


def test_d_loss_hand_example():
    score = np.full((2, 2), 0.5)
    assert lsgan_d_loss(score, score).item() == pytest.approx(2.0, abs=1e-10)


def test_d_loss_label_swap_symmetry():
    rng = np.random.default_rng(0)
    real, fake = rng.random((4, 4)), rng.random((4, 4))
    a = lsgan_d_loss(real, fake, GanLabels(real_label=1.0, fake_label=0.0))
    b = lsgan_d_loss(fake, real, GanLabels(real_label=0.0, fake_label=1.0))
    assert a.item() == pytest.approx(b.item(), abs=1e-12)


def test_d_loss_matches_scalar_loop():
    rng = np.random.default_rng(2)
    real, fake = rng.random((5, 7)), rng.random((5, 7))
    assert lsgan_d_loss(real, fake).item() == pytest.approx(
        oracles.scalar_lsgan_d(real, fake), abs=1e-10)


def test_d_loss_normalized_form():
    score = np.full((2, 2), 0.5)
    assert lsgan_d_loss(score, score, normalize=True).item() == pytest.approx(0.5)


def test_d_loss_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        lsgan_d_loss(np.zeros((2, 2)), np.zeros((3, 3)))


def test_d_loss_rejects_nonfinite_scores():
    bad = np.array([[np.nan, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="finite"):
        lsgan_d_loss(bad, np.zeros((2, 2)))


def test_d_loss_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(20):
        val = lsgan_d_loss(rng.standard_normal((3, 3)),
                           rng.standard_normal((3, 3))).item()
        assert val >= 0.0


def test_labels_must_differ():
    with pytest.raises(ValueError):
        GanLabels(real_label=0.5, fake_label=0.5)


def test_total_d_loss_sums_domains():
    vals = [ad.Tensor(np.array(v)) for v in (1.0, 2.0, 3.0)]
    assert total_d_loss(vals).item() == pytest.approx(6.0, abs=1e-12)
    assert total_d_loss(vals[:2]).item() == pytest.approx(3.0, abs=1e-12)
    assert total_d_loss([ad.Tensor(np.array(0.0))]).item() == 0.0
    with pytest.raises(ValueError):
        total_d_loss([])


def test_g_adversarial_hand_example():
    score = np.full((2, 2), 0.5)
    assert g_adversarial_term(score, 1.0).item() == pytest.approx(1.0, abs=1e-10)
    assert g_adversarial_term(score, 1.0, normalize=True).item() == pytest.approx(0.25)


def test_g_adversarial_matches_scalar_loop():
    scores = np.random.default_rng(4).random((4, 6))
    assert g_adversarial_term(scores, 1.0).item() == pytest.approx(
        oracles.scalar_lsgan_g(scores), abs=1e-10)


# ---------------------------------------------------------------------------
# perceptual loss
# ---------------------------------------------------------------------------

def test_perceptual_identity_is_exact_zero():
    img = _image(16, 16)
    assert perceptual_loss(img, img).item() == 0.0


def test_perceptual_zero_weights_is_plain_l1():
    gen, real = _image(12, 12, seed=8), _image(12, 12, seed=9)
    cfg = PerceptualConfig(layer_weights=(0.0, 0.0, 0.0))
    got = perceptual_loss(gen, real, cfg).item()
    assert got == pytest.approx(oracles.scalar_l1(gen, real), abs=1e-10)


def test_perceptual_matches_scalar_loop_reference():
    gen, real = _image(16, 16, seed=10), _image(16, 16, seed=11)
    cfg = PerceptualConfig(layer_weights=(1.0, 0.5, 2.0), extractor_seed=3)
    got = perceptual_loss(gen, real, cfg).item()
    expected = oracles.scalar_l1(gen, real)
    gen_feats = perceptual_features(ad.Tensor(np.asarray(gen)), cfg)
    real_feats = perceptual_features(ad.Tensor(np.asarray(real)), cfg)
    for lam, gf, rf in zip(cfg.layer_weights, gen_feats, real_feats):
        expected += lam * oracles.scalar_l1(gf.data, rf.data)
    assert got == pytest.approx(expected, abs=1e-8)


def test_perceptual_extractor_is_seed_stable():
    img = _image(16, 16, seed=12)
    a = perceptual_features(ad.Tensor(img), PerceptualConfig(extractor_seed=5))
    b = perceptual_features(ad.Tensor(img), PerceptualConfig(extractor_seed=5))
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.data, fb.data)
    c = perceptual_features(ad.Tensor(img), PerceptualConfig(extractor_seed=6))
    assert not np.array_equal(a[0].data, c[0].data)


def test_perceptual_differentiable_in_gen_only():
    gen = ad.Tensor(_image(8, 8, seed=13), requires_grad=True)
    real = ad.Tensor(_image(8, 8, seed=14), requires_grad=True)
    perceptual_loss(gen, real).backward()
    assert gen.grad is not None and np.any(gen.grad)
    assert real.grad is None


def test_perceptual_shape_mismatch():
    with pytest.raises(ValueError, match="shapes differ"):
        perceptual_loss(_image(8, 8), _image(8, 10))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_perceptual_gradient_finite_difference(seed):
    real = _image(8, 8, seed=100 + seed)
    oracles.check_gradients(
        lambda g: perceptual_loss(g, real), [(8, 8, 3)], seed,
        scale=0.25, shift=0.5, sample=24)


# ---------------------------------------------------------------------------
# generator objective
# ---------------------------------------------------------------------------

def test_g_loss_joint_identity_is_zero():
    img = _image(8, 8)
    scores = {d: np.ones((2, 2)) for d in DOMAINS}
    assert g_loss(scores, img, img).item() == 0.0


def test_g_loss_missing_domain_names_it():
    img = _image(8, 8)
    scores = {"rgb": np.ones((2, 2)), "fourier": np.ones((2, 2))}
    with pytest.raises(ValueError, match="dwt"):
        g_loss(scores, img, img)


def test_g_loss_terms_split():
    gen, real = _image(8, 8, seed=20), _image(8, 8, seed=21)
    scores = {d: np.full((2, 2), 0.5) for d in DOMAINS}
    total, parts = g_loss_terms(scores, gen, real)
    assert set(parts) == {"percept", "adv_rgb", "adv_fourier", "adv_dwt"}
    for d in DOMAINS:
        assert parts[f"adv_{d}"].item() == pytest.approx(1.0, abs=1e-10)
    assert total.item() == pytest.approx(
        parts["percept"].item() + 3.0, abs=1e-9)


def test_g_loss_domain_subsets_compose():
    gen, real = _image(8, 8, seed=22), _image(8, 8, seed=23)
    scores = {d: np.full((2, 2), 0.5) for d in DOMAINS}
    base = perceptual_loss(gen, real).item()
    for subset in ((), ("rgb",), ("fourier",), ("dwt",), ("rgb", "fourier"),
                   ("rgb", "dwt"), DOMAINS):
        val = g_loss(scores, gen, real, domains=subset).item()
        assert val == pytest.approx(base + len(subset) * 1.0, abs=1e-9)


def test_g_loss_no_domains_equals_perceptual():
    gen, real = _image(8, 8, seed=24), _image(8, 8, seed=25)
    assert g_loss({}, gen, real, domains=()).item() == pytest.approx(
        perceptual_loss(gen, real).item(), abs=1e-12)


def test_adversarial_pull_toward_target_on_scalar_toy():
    """One-parameter toy: the generator's 'image' is its parameter and the
    frozen discriminator is the identity, so the adversarial term is
    (w - c)^2; descent must move w monotonically toward c."""
    w = 0.2
    gaps = []
    for _ in range(10):
        t = ad.Tensor(np.array(w), requires_grad=True)
        g_adversarial_term(t, 1.0).backward()
        w = w - 0.1 * float(t.grad)
        gaps.append(abs(w - 1.0))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.1


# ---------------------------------------------------------------------------
# end-to-end differentiability
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("domain", DOMAINS)
def test_assemble_to_loss_finite_difference(domain):
    h, w = 24, 32
    ras = _raster(h, w, seed=30)
    size = (h // 2, w // 2) if domain == "dwt" else (h, w)
    channels = {"rgb": 6, "fourier": 2, "dwt": 6}[domain]
    disc = build_discriminator(domain, channels, size, seed=1)
    assemble = {"rgb": assemble_rgb_input, "fourier": assemble_fourier_input,
                "dwt": assemble_dwt_input}[domain]

    def build(img):
        scores = disc(as_disc_batch(assemble(img, ras)))
        return g_adversarial_term(scores, 1.0)

    worst = oracles.check_gradients(build, [(h, w, 3)], seed=31,
                                    scale=0.2, shift=0.5, sample=10,
                                    rel_tol=1e-3)
    assert worst < 1e-3


@pytest.mark.parametrize("seed", [0, 1])
def test_lsgan_gradient_finite_difference(seed):
    oracles.check_gradients(
        lambda r, f: lsgan_d_loss(r, f), [(4, 4), (4, 4)], seed, sample=16)


# ---------------------------------------------------------------------------
# loss log
# ---------------------------------------------------------------------------

def test_loss_csv_header_and_rows(tmp_path):
    rows = [(1, 2.0, 1.0, 0.25, 0.25, 0.5, 1.5, 1.25, 1.75),
            (2, 1.5, 0.75, 0.25, 0.2, 0.3, 1.4, 1.2, 1.6)]
    path = tmp_path / "losses.csv"
    write_loss_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == LOSS_CSV_HEADER
    assert lines[0] == ("iter,g_total,g_percept,g_adv_rgb,g_adv_fourier,"
                        "g_adv_dwt,d_rgb,d_fourier,d_dwt")
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "1" and float(first[1]) == 2.0
