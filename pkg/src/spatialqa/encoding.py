"""Auxiliary 3D input branch numerics: encoding, patch aggregation, fusion.

Pure, testable math with no training loop.  A point map's three
coordinate channels each receive a 64-dimensional sinusoidal encoding
(32 sin/cos pairs at geometrically spaced frequencies), the validity
mask is appended as channel 193, 14x14 patches are flattened through a
linear map, and the patch features fuse with RGB features through a
block linear projector whose point-map half can start at zero without
disturbing the RGB path.

Frequency constants: the longest period is 1000 m so the [-250, 250]
working range never wraps; the shortest is about 0.03 m.  The base is a
documented choice, not an externally specified value.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .pmap import PointMap

COORD_CHANNELS = 3
PAIRS_PER_COORD = 32
ENCODING_PER_COORD = 2 * PAIRS_PER_COORD          # 64
ENCODED_CHANNELS = COORD_CHANNELS * ENCODING_PER_COORD + 1  # 193
PATCH = 14

LONGEST_PERIOD_M = 1000.0
SHORTEST_PERIOD_M = 0.03

_FREQS = (2.0 * np.pi / LONGEST_PERIOD_M) * np.power(
    LONGEST_PERIOD_M / SHORTEST_PERIOD_M,
    np.arange(PAIRS_PER_COORD) / (PAIRS_PER_COORD - 1),
)


def frequencies() -> np.ndarray:
    """Angular frequencies (rad/m) of the 32 sin/cos pairs."""
    return _FREQS.copy()


def sinusoidal_encode(pm: PointMap) -> np.ndarray:
    """(H, W, 193) feature grid: per-coordinate sin/cos stacks + validity.

    Channel layout per coordinate c: [sin(w0 c), cos(w0 c), sin(w1 c), ...]
    for the 32 frequencies; coordinates ordered x, y, z; validity last.
    """
    pts = pm.points.astype(np.float64)
    h, w, _ = pts.shape
    out = np.empty((h, w, ENCODED_CHANNELS), dtype=np.float64)
    for c in range(COORD_CHANNELS):
        phase = pts[:, :, c, None] * _FREQS[None, None, :]
        block = out[:, :, c * ENCODING_PER_COORD:(c + 1) * ENCODING_PER_COORD]
        block[:, :, 0::2] = np.sin(phase)
        block[:, :, 1::2] = np.cos(phase)
    out[:, :, -1] = pm.valid.astype(np.float64)
    return out


def encode_axis_values(values: np.ndarray) -> np.ndarray:
    """64-channel encoding of scalar coordinates (collision-scan helper)."""
    phase = np.asarray(values, dtype=np.float64)[:, None] * _FREQS[None, :]
    out = np.empty((len(values), ENCODING_PER_COORD))
    out[:, 0::2] = np.sin(phase)
    out[:, 1::2] = np.cos(phase)
    return out


def pad_to_patch_multiple(grid: np.ndarray, patch: int = PATCH) -> np.ndarray:
    """Zero-pad bottom/right to a multiple of the patch size.

    Padded pixels read as zero coordinates with validity 0 (the last
    channel is already the zero fill).
    """
    h, w, c = grid.shape
    ph = (-h) % patch
    pw = (-w) % patch
    if ph == 0 and pw == 0:
        return grid
    return np.pad(grid, ((0, ph), (0, pw), (0, 0)))


def patchify(encoded: np.ndarray, weights: np.ndarray,
             patch: int = PATCH) -> np.ndarray:
    """Non-overlapping patch flattening followed by a linear map.

    encoded: (H, W, C); weights: (C * patch * patch, D).  Output
    (H/patch, W/patch, D).  Flattening order is row-major over (patch
    row, patch column, channel).
    """
    grid = pad_to_patch_multiple(encoded, patch)
    h, w, c = grid.shape
    gh, gw = h // patch, w // patch
    if weights.shape[0] != c * patch * patch:
        raise ValueError(
            f"weights expect {weights.shape[0]} inputs, patches have "
            f"{c * patch * patch}"
        )
    tiles = grid.reshape(gh, patch, gw, patch, c).transpose(0, 2, 1, 3, 4)
    flat = tiles.reshape(gh, gw, patch * patch * c)
    return flat @ weights


def patchify_reference(encoded: np.ndarray, weights: np.ndarray,
                       patch: int = PATCH) -> np.ndarray:
    """Explicit sliding-window implementation used as the test oracle."""
    grid = pad_to_patch_multiple(encoded, patch)
    h, w, c = grid.shape
    gh, gw = h // patch, w // patch
    out = np.zeros((gh, gw, weights.shape[1]))
    for i in range(gh):
        for j in range(gw):
            tile = grid[i * patch:(i + 1) * patch, j * patch:(j + 1) * patch, :]
            out[i, j] = tile.reshape(-1) @ weights
    return out


def fuse(rgb_features: np.ndarray, pm_features: np.ndarray,
         w_rgb: np.ndarray, w_pm: np.ndarray) -> np.ndarray:
    """Block linear projector over concatenated patch features.

    Output per patch is rgb @ w_rgb + pm @ w_pm, identical to
    concatenating the two feature blocks and applying [w_rgb; w_pm].
    With w_pm all zero the output equals the RGB-only path exactly.
    """
    if rgb_features.shape[:2] != pm_features.shape[:2]:
        raise ValueError(
            f"patch grids differ: {rgb_features.shape[:2]} vs "
            f"{pm_features.shape[:2]}"
        )
    return rgb_features @ w_rgb + pm_features @ w_pm


# ---------------------------------------------------------------------------
# Tensor dump format: "TNSR" magic, u32 rank, u32 dims, f32 row-major
# ---------------------------------------------------------------------------

TENSOR_MAGIC = b"TNSR"


def write_tensor(array: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != TENSOR_MAGIC:
        raise ValueError(f"bad tensor magic {data[:4]!r}")
    rank = struct.unpack_from("<I", data, 4)[0]
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    payload = np.frombuffer(data, dtype="<f4", offset=8 + 4 * rank)
    return payload.reshape(dims)
