import numpy as np
import pytest

from mambamir.acquisition import (
    CTGeometry,
    KSpaceMask,
    dft2,
    derive_rng,
    fbp,
    generate_dataset,
    idft2,
    load_pair,
    load_split,
    make_cartesian_mask,
    make_pair,
    mri_forward,
    pet_lowdose,
    radon,
    random_ellipse_phantom,
    read_manifest,
    save_pair,
    shepp_logan,
    zero_filled,
)
from mambamir.errors import ConfigurationError, ContractError, DataError
from mambamir.metrics import psnr


class TestDFT:
    def test_roundtrip(self):
        x = np.random.default_rng(0).normal(size=(32, 32))
        assert np.abs(idft2(dft2(x)) - x).max() < 1e-10

    def test_constant_image_is_single_dc_bin(self):
        x = np.full((16, 16), 2.0)
        k = dft2(x)
        assert abs(k[8, 8] - 2.0 * 16) < 1e-10  # ortho norm: c * sqrt(H*W)
        k[8, 8] = 0.0
        assert np.abs(k).max() < 1e-10

    def test_parseval(self):
        x = np.random.default_rng(1).normal(size=(64, 64))
        e1 = (x ** 2).sum()
        e2 = (np.abs(dft2(x)) ** 2).sum()
        assert abs(e1 - e2) < 1e-10 * e1


class TestCartesianMask:
    def test_af_one_keeps_everything(self):
        m = make_cartesian_mask(64, 1.0, 0.08, np.random.default_rng(2))
        assert np.array_equal(m.mask, np.ones(64))

    def test_width_320_af4(self):
        for seed in range(10):
            m = make_cartesian_mask(320, 4.0, 0.08, np.random.default_rng(seed))
            assert 72 <= m.columns_kept <= 88  # ~80 within 10%

    def test_center_band_always_present(self):
        for seed in range(10):
            m = make_cartesian_mask(100, 4.0, 0.08, np.random.default_rng(seed))
            n_low = 8
            lo = (100 - n_low) // 2
            assert m.mask[lo : lo + n_low].all()

    def test_infeasible_center_band(self):
        with pytest.raises(ConfigurationError):
            make_cartesian_mask(64, 16.0, 0.5, np.random.default_rng(3))

    def test_af_below_one_rejected(self):
        with pytest.raises(ConfigurationError):
            make_cartesian_mask(64, 0.5, 0.08, np.random.default_rng(4))


class TestMRIPipeline:
    def test_full_mask_is_lossless(self):
        x = random_ellipse_phantom(32, np.random.default_rng(5)).astype(complex)
        m = make_cartesian_mask(32, 1.0, 0.08, np.random.default_rng(6))
        xu = zero_filled(mri_forward(x, m), m)
        assert np.abs(xu - x).max() < 1e-10

    def test_zero_mask_gives_zero(self):
        x = np.ones((16, 16), dtype=complex)
        m = KSpaceMask(np.zeros(16), af=np.inf, center_fraction=0.0)
        assert np.abs(zero_filled(mri_forward(x, m), m)).max() == 0.0

    def test_af4_zero_filled_baseline_degrades(self):
        rng = np.random.default_rng(7)
        x = random_ellipse_phantom(64, rng)
        m = make_cartesian_mask(64, 4.0, 0.08, rng)
        xu = zero_filled(mri_forward(x.astype(complex), m), m)
        p = psnr(np.abs(xu), x, 1.0)
        assert 10.0 < p < 40.0  # degraded but recognisable

    def test_mask_width_mismatch(self):
        m = make_cartesian_mask(32, 2.0, 0.08, np.random.default_rng(8))
        with pytest.raises(ContractError):
            mri_forward(np.zeros((16, 16), dtype=complex), m)


class TestRadonFBP:
    def test_zero_image_zero_sinogram(self):
        g = CTGeometry(10, 48, 32)
        assert np.abs(radon(np.zeros((32, 32)), g)).max() == 0.0

    def test_smooth_disc_rotational_symmetry(self):
        # soft-edged disc kept clear of the frame so no tail mass is clipped
        yy, xx = np.mgrid[0:64, 0:64]
        r = np.sqrt((xx - 31.5) ** 2 + (yy - 31.5) ** 2)
        disc = 1.0 / (1.0 + np.exp((r - 16.0) / 2.0))
        sino = radon(disc, CTGeometry(16, 97, 64))
        spread = np.abs(sino - sino.mean(axis=1, keepdims=True)).max()
        assert spread / np.abs(sino).max() < 1e-3

    def test_linearity(self):
        rng = np.random.default_rng(9)
        a = random_ellipse_phantom(48, rng)
        b = random_ellipse_phantom(48, rng)
        g = CTGeometry(20, 72, 48)
        combined = radon(2.0 * a - 0.5 * b, g)
        split = 2.0 * radon(a, g) - 0.5 * radon(b, g)
        assert np.abs(combined - split).max() < 1e-8 * max(np.abs(combined).max(), 1.0)

    def test_more_views_reconstruct_better(self):
        x = shepp_logan(128)
        scores = {}
        for nv in (60, 180):
            g = CTGeometry(nv, 192, 128)
            scores[nv] = psnr(fbp(radon(x, g), g), x, 1.0)
        assert scores[180] > scores[60]

    def test_zero_views_rejected(self):
        with pytest.raises(ConfigurationError):
            CTGeometry(0, 48, 32)

    def test_sinogram_geometry_mismatch(self):
        g = CTGeometry(10, 48, 32)
        with pytest.raises(ContractError):
            fbp(np.zeros((48, 12)), g)


class TestPET:
    def test_high_scale_limit_approaches_identity(self):
        x = random_ellipse_phantom(32, np.random.default_rng(10))
        out = pet_lowdose(x, 1.0, np.random.default_rng(11), scale=1e9)
        assert np.abs(out - x).max() < 1e-3

    def test_mean_preserving(self):
        x = random_ellipse_phantom(32, np.random.default_rng(12)) + 0.05
        acc = np.zeros_like(x)
        n = 10_000
        rng = np.random.default_rng(13)
        for _ in range(n):
            acc += pet_lowdose(x, 3.0, rng, scale=200.0)
        rel = np.abs(acc / n - x) / x
        assert rel.mean() < 0.01

    def test_variance_scales_with_drf(self):
        x = np.full((24, 24), 0.5)
        draws3 = np.stack([pet_lowdose(x, 3.0, np.random.default_rng(s), scale=500.0)
                           for s in range(400)])
        draws6 = np.stack([pet_lowdose(x, 6.0, np.random.default_rng(1000 + s), scale=500.0)
                           for s in range(400)])
        ratio = draws6.var(axis=0).mean() / draws3.var(axis=0).mean()
        assert abs(ratio - 2.0) < 0.2

    def test_negative_activity_rejected(self):
        with pytest.raises(ContractError):
            pet_lowdose(np.array([-1.0]), 2.0, np.random.default_rng(14))

    def test_drf_below_one_rejected(self):
        with pytest.raises(ContractError):
            pet_lowdose(np.ones(4), 0.5, np.random.default_rng(15))


class TestPhantoms:
    def test_values_in_unit_interval(self):
        assert shepp_logan(64).min() >= 0.0 and shepp_logan(64).max() <= 1.0
        p = random_ellipse_phantom(64, np.random.default_rng(16))
        assert p.min() >= 0.0 and p.max() <= 1.0

    def test_deterministic_per_seed(self):
        a = random_ellipse_phantom(32, np.random.default_rng(17))
        b = random_ellipse_phantom(32, np.random.default_rng(17))
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = random_ellipse_phantom(32, np.random.default_rng(18))
        b = random_ellipse_phantom(32, np.random.default_rng(19))
        assert np.linalg.norm(a - b) > 0.0

    def test_too_small_rejected(self):
        with pytest.raises(ContractError):
            shepp_logan(8)


class TestDatasets:
    def test_pair_roundtrip(self, tmp_path):
        pair = make_pair("mri", 32, np.random.default_rng(20), af=4.0)
        save_pair(tmp_path / "s.mmtc", pair)
        back = load_pair(tmp_path / "s.mmtc")
        assert back.task == "mri"
        assert np.array_equal(back.x, pair.x)
        assert np.array_equal(back.x_u, pair.x_u)
        assert back.params["af"] == 4.0
        assert np.array_equal(back.params["mask"], pair.params["mask"])

    def test_generate_and_load(self, tmp_path):
        root = generate_dataset(tmp_path / "ds", "mri", {"train": 3, "val": 1, "test": 2},
                                size=32, master_seed=99, af=4.0)
        manifest = read_manifest(root)
        assert manifest["task"] == "mri"
        assert manifest["count.train"] == "3"
        assert len(load_split(root, "train")) == 3
        assert len(load_split(root, "test")) == 2

    def test_generation_is_deterministic(self, tmp_path):
        a = generate_dataset(tmp_path / "a", "ct", {"train": 2}, size=32,
                             master_seed=5, n_views=20)
        b = generate_dataset(tmp_path / "b", "ct", {"train": 2}, size=32,
                            master_seed=5, n_views=20)
        fa = sorted((a / "train").glob("*.mmtc"))
        fb = sorted((b / "train").glob("*.mmtc"))
        for pa, pb in zip(fa, fb):
            assert pa.read_bytes() == pb.read_bytes()

    def test_derived_rng_independent_of_order(self):
        p1 = make_pair("pet", 32, derive_rng(7, 0, 3), drf=3.0)
        p2 = make_pair("pet", 32, derive_rng(7, 0, 3), drf=3.0)
        assert np.array_equal(p1.x_u, p2.x_u)

    def test_unknown_task_rejected(self):
        with pytest.raises(ConfigurationError):
            make_pair("spect", 32, np.random.default_rng(21))

    def test_missing_split_raises_data_error(self, tmp_path):
        with pytest.raises(DataError):
            load_split(tmp_path, "train")
