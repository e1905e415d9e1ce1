"""Acquisition simulation and crude analytic inversion.

Frequency-domain sampling masks with zero-filled inversion model the
MRI-style path; a parallel-beam radon transform with filtered back
projection models the CT-style path.  An orthonormal sparsifying
transform (Haar wavelet or DCT) supports the compressed-sensing solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .core import SeededRng, atomic_write_bytes, ensure_image, read_tensor, write_tensor

MASK_KINDS = ("random", "variable-density", "radial", "periodic")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# ---------------------------------------------------------------------------
# Fourier transform and sampling masks
# ---------------------------------------------------------------------------


def fft2(grid, direction: str = "forward") -> np.ndarray:
    """Unitary 2-d FFT (1/sqrt(HW) normalization each way).

    Grids are laid out numpy-style with the DC coefficient at index (0, 0).
    Dimensions must be powers of two.
    """
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d grid")
    if not (_is_pow2(arr.shape[0]) and _is_pow2(arr.shape[1])):
        raise ValueError(f"grid dims must be powers of two, got {arr.shape}")
    if direction == "forward":
        return np.fft.fft2(arr, norm="ortho")
    if direction == "inverse":
        return np.fft.ifft2(arr, norm="ortho")
    raise ValueError(f"unknown direction: {direction!r}")


@dataclass(frozen=True)
class SamplingMask:
    """Boolean frequency-domain sampling pattern (FFT layout, DC at [0,0])."""

    kind: str
    selected: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool)
        if sel.ndim != 2:
            raise ValueError("mask must be 2-d")
        if not sel[0, 0]:
            raise ValueError("DC location must always be selected")
        object.__setattr__(self, "selected", sel)

    @property
    def height(self) -> int:
        return self.selected.shape[0]

    @property
    def width(self) -> int:
        return self.selected.shape[1]

    @property
    def fraction(self) -> float:
        """Achieved sampling fraction, selected count over total, exact."""
        return int(self.selected.sum()) / self.selected.size


def _centered_distance(height, width):
    # wrap-around distance from DC in FFT layout
    fy = np.fft.fftfreq(height) * height
    fx = np.fft.fftfreq(width) * width
    return np.hypot(fy[:, None], fx[None, :])


def make_mask(kind, height, width, params, rng: SeededRng | None = None) -> SamplingMask:
    """Build a sampling mask.

    params by kind: random -> {"fraction": p in (0, 1]};
    variable-density -> {"decay": exponent > 0} with selection probability
    (1 + distance-from-DC)**(-decay); radial -> {"lines": L >= 1} straight
    lines through DC at uniformly spaced angles; periodic -> {"stride": k}
    selecting every k-th row.  The DC location is always selected.
    """
    if height <= 0 or width <= 0:
        raise ValueError("mask dims must be positive")
    if kind not in MASK_KINDS:
        raise ValueError(f"unknown mask kind: {kind!r}")

    selected = np.zeros((height, width), dtype=bool)
    if kind == "random":
        p = _param(params, "fraction", float)
        if not 0.0 < p <= 1.0:
            raise ValueError("fraction must be in (0, 1]")
        if rng is None:
            raise ValueError("random mask requires an rng")
        draws = rng.uniform(height * width).reshape(height, width)
        selected = draws < p
    elif kind == "variable-density":
        decay = _param(params, "decay", float)
        if decay <= 0:
            raise ValueError("decay must be positive")
        if rng is None:
            raise ValueError("variable-density mask requires an rng")
        prob = (1.0 + _centered_distance(height, width)) ** (-decay)
        draws = rng.uniform(height * width).reshape(height, width)
        selected = draws < prob
    elif kind == "radial":
        lines = _param(params, "lines", int)
        if lines < 1:
            raise ValueError("lines must be at least 1")
        centered = np.zeros((height, width), dtype=bool)
        cy, cx = height // 2, width // 2
        reach = math.hypot(height, width)
        ts = np.arange(-reach, reach + 0.25, 0.5)
        for j in range(lines):
            theta = math.pi * j / lines
            ys = np.rint(cy + ts * math.sin(theta)).astype(int)
            xs = np.rint(cx + ts * math.cos(theta)).astype(int)
            keep = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width)
            centered[ys[keep], xs[keep]] = True
        selected = np.fft.ifftshift(centered)
    elif kind == "periodic":
        stride = _param(params, "stride", int)
        if stride < 1:
            raise ValueError("stride must be at least 1")
        selected[::stride, :] = True

    selected[0, 0] = True
    return SamplingMask(kind=kind, selected=selected, params=dict(params))


def _param(params, key, cast):
    extra = set(params) - {key}
    if extra:
        raise ValueError(f"unexpected mask params: {sorted(extra)}")
    if key not in params:
        raise ValueError(f"missing mask param {key!r}")
    return cast(params[key])


def zero_fill_invert(kspace, mask: SamplingMask) -> np.ndarray:
    """Crude inversion: zero the unselected coefficients, inverse FFT.

    Returns the magnitude image, which keeps outputs nonnegative and is
    the identity for nonnegative fully-sampled inputs.
    """
    arr = np.asarray(kspace, dtype=np.complex128)
    if arr.shape != mask.selected.shape:
        raise ValueError(
            f"k-space shape {arr.shape} does not match mask {mask.selected.shape}"
        )
    filled = np.where(mask.selected, arr, 0.0)
    return np.abs(fft2(filled, "inverse"))


def save_mask(path, mask: SamplingMask) -> None:
    """Persist the selection grid as an RDT1 tensor of {0, 1}."""
    write_tensor(path, mask.selected.astype(np.float64))


def load_mask(path) -> SamplingMask:
    grid = read_tensor(path)
    return SamplingMask(kind="custom", selected=grid > 0.5)


# ---------------------------------------------------------------------------
# parallel-beam tomography
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionSet:
    """Parallel-beam sinogram: one row of detector readings per angle."""

    angles_deg: np.ndarray
    sinogram: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=np.float64)
        sino = np.asarray(self.sinogram, dtype=np.float64)
        if angles.ndim != 1 or angles.size == 0:
            raise ValueError("angles must be a nonempty 1-d array")
        if np.any(angles < 0) or np.any(angles >= 180):
            raise ValueError("angles must lie in [0, 180)")
        if angles.size > 1 and np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if sino.ndim != 2 or sino.shape[0] != angles.size:
            raise ValueError("sinogram must be (n_angles, detector_bins)")
        if not np.all(np.isfinite(sino)):
            raise ValueError("sinogram must be finite")
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "sinogram", sino)

    @property
    def detector_bins(self) -> int:
        return self.sinogram.shape[1]


def detector_bin_count(size: int) -> int:
    """Detector bins covering the image diagonal, rounded up to odd."""
    bins = math.ceil(math.sqrt(2.0) * size)
    return bins if bins % 2 == 1 else bins + 1


def _projection_geometry(size, bins):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    x = np.broadcast_to(coords[None, :], (size, size)).ravel()
    y = np.broadcast_to(coords[:, None], (size, size)).ravel()
    offset = (bins - 1) / 2.0
    return x, y, offset


def radon_forward(image, angles_deg) -> ProjectionSet:
    """Line integrals of a square image at the given angles (degrees).

    Each pixel is splatted onto the two nearest detector bins with linear
    weights, so projections conserve total image mass exactly and the
    operator has an exact transpose (see :func:`backproject`).
    """
    img = ensure_image(image)
    if img.shape[0] != img.shape[1]:
        raise ValueError("radon transform requires a square image")
    angles = np.asarray(angles_deg, dtype=np.float64)
    size = img.shape[0]
    bins = detector_bin_count(size)
    x, y, offset = _projection_geometry(size, bins)
    flat = img.ravel()
    sino = np.zeros((angles.size, bins))
    for k, theta in enumerate(np.radians(angles)):
        u = x * math.cos(theta) + y * math.sin(theta) + offset
        i0 = np.floor(u).astype(int)
        w = u - i0
        sino[k] = np.bincount(i0, weights=flat * (1.0 - w), minlength=bins)
        sino[k] += np.bincount(i0 + 1, weights=flat * w, minlength=bins)
    return ProjectionSet(angles_deg=angles, sinogram=sino)


def backproject(projections: ProjectionSet, size: int) -> np.ndarray:
    """Unfiltered backprojection, the exact transpose of radon_forward."""
    bins = projections.detector_bins
    if bins != detector_bin_count(size):
        raise ValueError(
            f"detector geometry {bins} does not match image size {size}"
        )
    x, y, offset = _projection_geometry(size, bins)
    out = np.zeros(size * size)
    for k, theta in enumerate(np.radians(projections.angles_deg)):
        u = x * math.cos(theta) + y * math.sin(theta) + offset
        i0 = np.floor(u).astype(int)
        w = u - i0
        row = projections.sinogram[k]
        out += row[i0] * (1.0 - w) + row[i0 + 1] * w
    return out.reshape(size, size)


def _ramp_filter(sinogram, window):
    """Ramp-filter each projection row (frequency domain, zero-padded)."""
    bins = sinogram.shape[1]
    length = 1 << max(3, (2 * bins - 1).bit_length())
    # discrete-space ramp kernel: 1/4 at zero lag, -1/(pi n)^2 at odd lags
    kernel = np.zeros(length)
    kernel[0] = 0.25
    odd = np.arange(1, bins, 2)
    kernel[odd] = -1.0 / (math.pi * odd) ** 2
    kernel[-odd] = -1.0 / (math.pi * odd) ** 2
    response = np.fft.rfft(kernel)
    if window == "hann":
        k = np.arange(response.size)
        response = response * (0.5 + 0.5 * np.cos(math.pi * k / (response.size - 1)))
    elif window is not None:
        raise ValueError(f"unknown apodization window: {window!r}")
    spec = np.fft.rfft(sinogram, n=length, axis=1)
    filtered = np.fft.irfft(spec * response[None, :], n=length, axis=1)
    return filtered[:, :bins]


def fbp_reconstruct(projections: ProjectionSet, size: int, window=None) -> np.ndarray:
    """Filtered back projection onto a size x size grid.

    Ram-Lak ramp by default; ``window="hann"`` apodizes the ramp.  The
    backprojection sum is scaled by pi / n_angles (uniform angular
    coverage of [0, 180) assumed).
    """
    if projections.detector_bins != detector_bin_count(size):
        raise ValueError(
            f"projections have {projections.detector_bins} bins, image size "
            f"{size} needs {detector_bin_count(size)}"
        )
    filtered = ProjectionSet(
        angles_deg=projections.angles_deg,
        sinogram=_ramp_filter(projections.sinogram, window),
    )
    scale = math.pi / projections.angles_deg.size
    return scale * backproject(filtered, size)


def save_projections(path, projections: ProjectionSet) -> None:
    """Sinogram as RDT1 plus a sidecar text file of angles, one per line."""
    write_tensor(path, projections.sinogram)
    lines = "".join(f"{float(a)!r}\n" for a in projections.angles_deg)
    atomic_write_bytes(str(path) + ".angles.txt", lines.encode("ascii"))


def load_projections(path) -> ProjectionSet:
    sino = read_tensor(path)
    with open(str(path) + ".angles.txt", "r", encoding="ascii") as fh:
        angles = [float(line) for line in fh if line.strip()]
    return ProjectionSet(angles_deg=np.asarray(angles), sinogram=sino)


# ---------------------------------------------------------------------------
# orthonormal sparsifying transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparsifyingTransform:
    """Orthonormal analysis transform: multi-level Haar wavelet or DCT."""

    kind: str = "haar-wavelet"
    levels: int = 3

    def __post_init__(self):
        if self.kind not in ("haar-wavelet", "dct"):
            raise ValueError(f"unknown transform kind: {self.kind!r}")
        if self.levels < 1:
            raise ValueError("levels must be positive")


def _haar_split(block):
    rows = (block[0::2, :] + block[1::2, :]) / math.sqrt(2.0)
    diff = (block[0::2, :] - block[1::2, :]) / math.sqrt(2.0)
    stacked = np.vstack([rows, diff])
    cols = (stacked[:, 0::2] + stacked[:, 1::2]) / math.sqrt(2.0)
    diff = (stacked[:, 0::2] - stacked[:, 1::2]) / math.sqrt(2.0)
    return np.hstack([cols, diff])


def _haar_merge(block):
    h, w = block.shape
    left, right = block[:, : w // 2], block[:, w // 2 :]
    cols = np.empty_like(block)
    cols[:, 0::2] = (left + right) / math.sqrt(2.0)
    cols[:, 1::2] = (left - right) / math.sqrt(2.0)
    top, bottom = cols[: h // 2, :], cols[h // 2 :, :]
    out = np.empty_like(block)
    out[0::2, :] = (top + bottom) / math.sqrt(2.0)
    out[1::2, :] = (top - bottom) / math.sqrt(2.0)
    return out


def sparsify(values, transform: SparsifyingTransform, direction: str = "forward"):
    """Apply the orthonormal analysis (forward) or synthesis (inverse) map."""
    arr = ensure_image(values)
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction: {direction!r}")
    if transform.kind == "dct":
        if direction == "forward":
            return scipy.fft.dctn(arr, norm="ortho")
        return scipy.fft.idctn(arr, norm="ortho")

    h, w = arr.shape
    step = 1 << transform.levels
    if h % step or w % step:
        raise ValueError(
            f"dims {arr.shape} not divisible by 2**levels = {step}"
        )
    out = arr.copy()
    if direction == "forward":
        for level in range(transform.levels):
            hh, ww = h >> level, w >> level
            out[:hh, :ww] = _haar_split(out[:hh, :ww])
    else:
        for level in reversed(range(transform.levels)):
            hh, ww = h >> level, w >> level
            out[:hh, :ww] = _haar_merge(out[:hh, :ww])
    return out
