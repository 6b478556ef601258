"""Forward acquisition simulators and synthetic phantoms.

Fast MRI: unitary centered 2-D DFT subsampled by a Cartesian column mask
with an always-kept low-frequency band; the zero-filled inverse transform
is the classical baseline. Sparse-view CT: parallel-beam line integrals by
bilinear sampling and filtered backprojection with a Ram-Lak ramp.
Low-dose PET: Poisson thinning of activity images, rescaled to stay
unbiased. All degradations are deterministic functions of (input, params,
seed); per-sample seeds derive from (master seed, index).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ContractError, DataError
from .serialization import load_tensors, save_tensors

# ---------------------------------------------------------------------------
# unitary centered DFT


def dft2(x: np.ndarray) -> np.ndarray:
    """Centered, orthonormal 2-D DFT (Parseval holds to float eps)."""
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(x, axes=(-2, -1)), axes=(-2, -1), norm="ortho"),
        axes=(-2, -1),
    )


def idft2(k: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(k, axes=(-2, -1)), axes=(-2, -1), norm="ortho"),
        axes=(-2, -1),
    )


# ---------------------------------------------------------------------------
# fast MRI


@dataclass
class KSpaceMask:
    """Binary column mask; the center band is always sampled."""

    mask: np.ndarray  # (W,) of {0., 1.}
    af: float
    center_fraction: float

    @property
    def columns_kept(self) -> int:
        return int(self.mask.sum())


def make_cartesian_mask(width: int, af: float, center_frac: float,
                        rng: np.random.Generator) -> KSpaceMask:
    """Keep a fully-sampled center band plus i.i.d. columns, ~width/af total."""
    if af < 1:
        raise ConfigurationError(f"acceleration factor must be >= 1, got {af}")
    n_low = int(np.ceil(center_frac * width))
    budget = width / af
    if n_low > budget:
        raise ConfigurationError(
            f"center band of {n_low} columns exceeds the sampling budget {budget:.1f}"
        )
    mask = np.zeros(width)
    lo = (width - n_low) // 2
    mask[lo : lo + n_low] = 1.0
    if af == 1:
        mask[:] = 1.0
    else:
        # draw the exact complement count so mean(mask) ~ 1/af holds per mask,
        # not just in expectation
        extra = int(round(budget)) - n_low
        outside = np.concatenate([np.arange(lo), np.arange(lo + n_low, width)])
        if extra > 0 and outside.size:
            picked = rng.choice(outside, size=min(extra, outside.size), replace=False)
            mask[picked] = 1.0
    return KSpaceMask(mask, af, center_frac)


def mri_forward(x: np.ndarray, mask: KSpaceMask) -> np.ndarray:
    """Masked k-space measurements y = mask * F x."""
    if x.shape[-1] != mask.mask.shape[0]:
        raise ContractError(
            f"mask width {mask.mask.shape[0]} does not match image width {x.shape[-1]}"
        )
    return dft2(x) * mask.mask


def zero_filled(y: np.ndarray, mask: KSpaceMask) -> np.ndarray:
    """Classical baseline: inverse transform of the masked spectrum."""
    return idft2(y * mask.mask)


# ---------------------------------------------------------------------------
# sparse-view CT (parallel beam)


@dataclass
class CTGeometry:
    """Parallel-beam geometry with uniform angles over [0, pi)."""

    n_views: int
    n_detectors: int
    image_size: int

    def __post_init__(self):
        if self.n_views < 1:
            raise ConfigurationError(f"need at least one view, got {self.n_views}")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n_views) * np.pi / self.n_views


def _bilinear_gather(img: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Sample img at float coords (row=py, col=px); zero outside."""
    H, W = img.shape
    x0 = np.floor(px).astype(int)
    y0 = np.floor(py).astype(int)
    fx = px - x0
    fy = py - y0
    out = np.zeros(px.shape)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            valid = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
            vals = np.zeros(px.shape)
            vals[valid] = img[yi[valid], xi[valid]]
            out += wgt * vals
    return out


def radon(x: np.ndarray, geom: CTGeometry) -> np.ndarray:
    """Line-integral projections, shape (n_detectors, n_views)."""
    if x.shape[0] != x.shape[1]:
        raise ContractError(f"radon expects a square image, got {x.shape}")
    size = x.shape[0]
    cx = (size - 1) / 2.0
    t = np.arange(geom.n_detectors) - (geom.n_detectors - 1) / 2.0
    s = np.arange(size) - (size - 1) / 2.0
    sino = np.empty((geom.n_detectors, geom.n_views))
    for v, theta in enumerate(geom.angles):
        ct, st = np.cos(theta), np.sin(theta)
        px = cx + t[:, None] * ct - s[None, :] * st
        py = cx + t[:, None] * st + s[None, :] * ct
        sino[:, v] = _bilinear_gather(x, px, py).sum(axis=1)
    return sino


def _ramp_filter(n: int) -> np.ndarray:
    """Frequency response of the discrete Ram-Lak kernel (unit detector
    spacing): h[0] = 1/4, h[odd n] = -1/(pi^2 n^2), h[even n] = 0."""
    idx = np.fft.fftfreq(n, d=1.0 / n)
    h = np.zeros(n)
    h[0] = 0.25
    odd = np.abs(idx).astype(int) % 2 == 1
    h[odd] = -1.0 / (np.pi ** 2 * idx[odd] ** 2)
    return np.real(np.fft.fft(h))


def fbp(sinogram: np.ndarray, geom: CTGeometry) -> np.ndarray:
    """Ram-Lak filtered backprojection onto geom.image_size pixels."""
    nd, nv = sinogram.shape
    if nv != geom.n_views or nd != geom.n_detectors:
        raise ContractError(
            f"sinogram shape {sinogram.shape} does not match geometry "
            f"({geom.n_detectors} detectors, {geom.n_views} views)"
        )
    npad = max(64, int(2 ** np.ceil(np.log2(2 * nd))))
    ramp = _ramp_filter(npad)
    spec = np.fft.fft(sinogram, n=npad, axis=0) * ramp[:, None]
    filtered = np.fft.ifft(spec, axis=0).real[:nd]
    size = geom.image_size
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    xr = xx - c
    yr = yy - c
    det_c = (nd - 1) / 2.0
    recon = np.zeros((size, size))
    for v, theta in enumerate(geom.angles):
        tpos = xr * np.cos(theta) + yr * np.sin(theta) + det_c
        i0 = np.floor(tpos).astype(int)
        frac = tpos - i0
        i0c = np.clip(i0, 0, nd - 1)
        i1c = np.clip(i0 + 1, 0, nd - 1)
        inside = (tpos >= 0) & (tpos <= nd - 1)
        prof = filtered[:, v]
        recon += np.where(inside, prof[i0c] * (1 - frac) + prof[i1c] * frac, 0.0)
    return recon * (np.pi / nv)


# ---------------------------------------------------------------------------
# low-dose PET


def pet_lowdose(x_activity: np.ndarray, drf: float, rng: np.random.Generator,
                scale: float = 1e4) -> np.ndarray:
    """Poisson-thinned dose reduction, unbiased: E[out] = x_activity."""
    x_activity = np.asarray(x_activity, dtype=float)
    if (x_activity < 0).any():
        raise ContractError("activity must be non-negative")
    if drf < 1:
        raise ContractError(f"dose reduction factor must be >= 1, got {drf}")
    counts = rng.poisson(x_activity * (scale / drf))
    return counts * (drf / scale)


# ---------------------------------------------------------------------------
# phantoms

# (value, a, b, x0, y0, phi_deg) of the standard 10-ellipse head phantom
_SHEPP_LOGAN = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]


def _render_ellipses(size: int, ellipses) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size]
    xn = (x - (size - 1) / 2.0) / (size / 2.0)
    yn = ((size - 1) / 2.0 - y) / (size / 2.0)
    img = np.zeros((size, size))
    for val, a, b, x0, y0, phi in ellipses:
        rad = np.deg2rad(phi)
        xs = (xn - x0) * np.cos(rad) + (yn - y0) * np.sin(rad)
        ys = -(xn - x0) * np.sin(rad) + (yn - y0) * np.cos(rad)
        img[(xs / a) ** 2 + (ys / b) ** 2 <= 1.0] += val
    return img


def shepp_logan(size: int) -> np.ndarray:
    """Standard 10-ellipse head phantom with values in [0, 1]."""
    if size < 16:
        raise ContractError(f"phantom size must be >= 16, got {size}")
    return np.clip(_render_ellipses(size, _SHEPP_LOGAN), 0.0, 1.0)


def random_ellipse_phantom(size: int, rng: np.random.Generator) -> np.ndarray:
    """Randomised overlapping ellipses in [0, 1], deterministic per seed."""
    if size < 16:
        raise ContractError(f"phantom size must be >= 16, got {size}")
    n = int(rng.integers(5, 11))
    ellipses = [(float(rng.uniform(0.25, 0.55)), float(rng.uniform(0.7, 0.92)),
                 float(rng.uniform(0.7, 0.92)), 0.0, 0.0, float(rng.uniform(0, 180)))]
    for _ in range(n):
        ellipses.append((
            float(rng.uniform(-0.4, 0.6)),
            float(rng.uniform(0.08, 0.45)),
            float(rng.uniform(0.08, 0.45)),
            float(rng.uniform(-0.55, 0.55)),
            float(rng.uniform(-0.55, 0.55)),
            float(rng.uniform(0.0, 180.0)),
        ))
    return np.clip(_render_ellipses(size, ellipses), 0.0, 1.0)


# ---------------------------------------------------------------------------
# paired samples and datasets


@dataclass
class PhantomPair:
    """Ground truth, raw measurements, and the degraded network input."""

    x: np.ndarray
    y: np.ndarray
    x_u: np.ndarray
    task: str
    params: dict = field(default_factory=dict)


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Deterministic child generator for (master seed, index...) tuples."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def make_pair(task: str, size: int, rng: np.random.Generator, *,
              af: float = 4.0, center_frac: float = 0.08,
              n_views: int = 60, n_detectors: int | None = None,
              drf: float = 3.0, pet_scale: float = 1e4,
              phantom: np.ndarray | None = None) -> PhantomPair:
    """One synthetic sample for the given task."""
    x = random_ellipse_phantom(size, rng) if phantom is None else phantom
    if task == "mri":
        mask = make_cartesian_mask(size, af, center_frac, rng)
        y = mri_forward(x.astype(complex), mask)
        xu = zero_filled(y, mask)
        params = {"af": af, "center_frac": center_frac, "mask": mask.mask}
    elif task == "ct":
        nd = n_detectors or int(np.ceil(size * 1.5))
        geom = CTGeometry(n_views, nd, size)
        y = radon(x, geom)
        xu = fbp(y, geom)
        params = {"n_views": n_views, "n_detectors": nd}
    elif task == "pet":
        y = pet_lowdose(x, drf, rng, scale=pet_scale)
        xu = y
        params = {"drf": drf, "scale": pet_scale}
    else:
        raise ConfigurationError(f"unknown task {task!r}")
    return PhantomPair(x, y, xu, task, params)


SPLITS = ("train", "val", "test")


def generate_dataset(root: str | Path, task: str, split_sizes: dict[str, int],
                     size: int, master_seed: int, **task_params) -> Path:
    """Write one directory per split plus a key=value manifest.

    Sample i of a split gets the generator derived from
    (master_seed, split index, i), so any sample is reproducible alone.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = [f"task={task}", f"size={size}", f"seed={master_seed}"]
    for k, v in task_params.items():
        lines.append(f"{k}={v}")
    for si, split in enumerate(SPLITS):
        n = split_sizes.get(split, 0)
        sdir = root / split
        sdir.mkdir(exist_ok=True)
        for i in range(n):
            rng = derive_rng(master_seed, si, i)
            pair = make_pair(task, size, rng, **task_params)
            save_pair(sdir / f"sample_{i:05d}.mmtc", pair)
        lines.append(f"count.{split}={n}")
    (root / "manifest.txt").write_text("".join(line + "\n" for line in lines))
    return root


def read_manifest(root: str | Path) -> dict[str, str]:
    path = Path(root) / "manifest.txt"
    if not path.exists():
        raise DataError(f"no manifest at {path}")
    out = {}
    for line in path.read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def load_split(root: str | Path, split: str) -> list[PhantomPair]:
    sdir = Path(root) / split
    if not sdir.is_dir():
        raise DataError(f"dataset split directory missing: {sdir}")
    return [load_pair(p) for p in sorted(sdir.glob("sample_*.mmtc"))]


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def save_pair(path: str | Path, pair: PhantomPair) -> None:
    arrays = {"x": pair.x, "y": pair.y, "x_u": pair.x_u}
    meta = {"task": pair.task}
    for k, v in pair.params.items():
        if isinstance(v, np.ndarray):
            arrays[f"param.{k}"] = v
        else:
            meta[f"param.{k}"] = str(v)
    save_tensors(path, arrays, meta)


def load_pair(path: str | Path) -> PhantomPair:
    arrays, meta = load_tensors(path)
    if "task" not in meta or "x" not in arrays:
        raise DataError(f"{path} is not a sample container")
    params = {}
    for k, v in meta.items():
        if k.startswith("param."):
            params[k[6:]] = _parse_scalar(v)
    for k, v in arrays.items():
        if k.startswith("param."):
            params[k[6:]] = v
    return PhantomPair(arrays["x"], arrays["y"], arrays["x_u"], meta["task"], params)
