"""Uniform grids on the unit box, zero padding and the DFT conventions.

A grid with ``n`` points per side has nodes ``x_j = j h`` with ``h = 1/n``
and ``j in {-n/2+1, ..., n/2}``. Arrays of samples have shape ``(n,)*dim``
in C order, array index ``i`` holding node ``j = i - n/2 + 1``.

Padding places node ``j`` at index ``j mod P`` of a ``P = pad_factor * n``
periodic array. With that placement the DFT needs no phase ramps: padded
index ``m`` corresponds to frequency ``s_m = (2 pi / pad_factor) m`` in the
usual DFT order (nonnegative frequencies first).

This module also reads and writes the binary field format used for all
array I/O (see :func:`write_field`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft as sfft


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the unit box with ``n`` (even) points per side."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if int(self.n) != self.n or self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be an even positive integer, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    def indices(self) -> np.ndarray:
        """Node indices ``j`` along one axis."""
        return np.arange(-self.n // 2 + 1, self.n // 2 + 1)

    def coords(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return self.indices() * self.h

    def mesh(self) -> list:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        return np.meshgrid(*([self.coords()] * self.dim), indexing="ij", sparse=False)

    def radius(self) -> np.ndarray:
        """Distance of every node from the origin."""
        c2 = self.coords() ** 2
        r2 = np.zeros(self.shape)
        for a in range(self.dim):
            r2 = r2 + c2.reshape([-1 if b == a else 1 for b in range(self.dim)])
        return np.sqrt(r2)

    def origin_index(self) -> tuple:
        """Array index of the node at ``x = 0``."""
        return (self.n // 2 - 1,) * self.dim

    def lattice(self, pad_factor: int = 4) -> "FreqLattice":
        return FreqLattice(self, pad_factor)


@dataclass(frozen=True)
class FreqLattice:
    """Frequency nodes of the zero-padded transform of a grid."""

    parent: GridSpec
    pad_factor: int = 4

    def __post_init__(self):
        if self.pad_factor not in (2, 4):
            raise ValueError(f"pad_factor must be 2 or 4, got {self.pad_factor}")

    @property
    def size(self) -> int:
        """Padded side length ``pad_factor * n``."""
        return self.pad_factor * self.parent.n

    @property
    def spacing(self) -> float:
        """Node spacing ``2 pi / pad_factor``."""
        return 2 * np.pi / self.pad_factor

    @property
    def shape(self) -> tuple:
        return (self.size,) * self.parent.dim

    def modes(self) -> np.ndarray:
        """Integer mode numbers ``m`` along one axis, in DFT order."""
        P = self.size
        return np.concatenate([np.arange(P // 2), np.arange(-P // 2, 0)])

    def frequencies(self) -> np.ndarray:
        """Frequencies ``s_m`` along one axis, in DFT order."""
        return self.spacing * self.modes()


def _check_square(arr, side, what):
    if any(d != side for d in arr.shape):
        raise ValueError(f"{what}: expected side length {side}, got shape {arr.shape}")


def forward_dft(arr, lattice: FreqLattice | None = None, axes=None):
    """Unnormalized DFT ``sum_j u_j e^{-2 pi i j m / P}``.

    If ``lattice`` is given the array side length is checked against it.
    """
    arr = np.asarray(arr)
    if lattice is not None:
        _check_square(arr, lattice.size, "forward_dft")
    return sfft.fftn(arr, axes=axes)


def inverse_dft(arr, lattice: FreqLattice | None = None, axes=None):
    """Inverse of :func:`forward_dft`, carrying the ``1/P^dim`` factor."""
    arr = np.asarray(arr)
    if lattice is not None:
        _check_square(arr, lattice.size, "inverse_dft")
    return sfft.ifftn(arr, axes=axes)


def padded_positions(grid: GridSpec, pad_factor: int) -> np.ndarray:
    """Padded index ``j mod P`` of every node along one axis."""
    return np.mod(grid.indices(), pad_factor * grid.n)


def embed_zero_padded(values, grid: GridSpec, pad_factor: int = 4) -> np.ndarray:
    """Place grid samples in a zero ``(pad_factor n)^dim`` complex array."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"expected samples of shape {grid.shape}, got {values.shape}")
    if pad_factor not in (2, 4):
        raise ValueError(f"pad_factor must be 2 or 4, got {pad_factor}")
    out = np.zeros((pad_factor * grid.n,) * grid.dim, dtype=complex)
    pos = padded_positions(grid, pad_factor)
    out[np.ix_(*([pos] * grid.dim))] = values
    return out


def extract_block(padded, grid: GridSpec) -> np.ndarray:
    """Unit-box samples of a padded array (inverse of the embedding)."""
    padded = np.asarray(padded)
    P = padded.shape[0]
    if padded.ndim != grid.dim or P % grid.n or P // grid.n not in (1, 2, 4):
        raise ValueError(f"cannot extract a {grid.shape} block from shape {padded.shape}")
    _check_square(padded, P, "extract_block")
    pos = np.mod(grid.indices(), P)
    return padded[np.ix_(*([pos] * grid.dim))]


def spectral_derivative_multiplier(lattice: FreqLattice, axis: int) -> np.ndarray:
    """``i s_axis`` in DFT order, broadcastable over the lattice.

    The returned array has length ``P`` along ``axis`` and 1 elsewhere. The
    Nyquist node is set to zero so real fields have real derivatives.
    """
    dim = lattice.parent.dim
    if not 0 <= axis < dim:
        raise ValueError(f"axis must be in [0, {dim}), got {axis}")
    d = 1j * lattice.frequencies()
    d[lattice.size // 2] = 0
    return d.reshape([-1 if b == axis else 1 for b in range(dim)])


# ------------------------------------------------------------------- I/O

MAGIC = b"VOLPOTF\x00"
FORMAT_VERSION = 1
AXIS_ORDER_C = 0  # first axis slowest
_HEADER = struct.Struct("<8sIIII")  # magic, version, ndim, complex flag, axis order


def write_field(path, values, meta: dict | None = None) -> None:
    """Write an array in the binary field format.

    Layout: ``magic(8) version ndim complex_flag axis_order`` as little-endian
    uint32, then ``ndim`` uint32 side lengths, then little-endian float64 data
    in C order (real and imaginary parts interleaved for complex data).
    ``meta`` goes to a ``<path>.meta`` sidecar of ``key = value`` lines.
    """
    path = Path(path)
    values = np.asarray(values)
    is_complex = np.iscomplexobj(values)
    data = values.astype("<c16" if is_complex else "<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, values.ndim, int(is_complex), AXIS_ORDER_C))
        fh.write(struct.pack(f"<{values.ndim}I", *values.shape))
        fh.write(np.ascontiguousarray(data).tobytes())
    if meta is not None:
        write_meta(path.with_name(path.name + ".meta"), meta)


def read_field(path):
    """Read an array written by :func:`write_field`.

    Returns ``(values, meta)``; ``meta`` is an empty dict when there is no
    sidecar.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, ndim, is_complex, order = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field file")
        if version != FORMAT_VERSION or order != AXIS_ORDER_C:
            raise ValueError(f"{path}: unsupported version {version} / axis order {order}")
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        dtype = "<c16" if is_complex else "<f8"
        count = int(np.prod(shape))
        data = np.frombuffer(fh.read(), dtype=dtype)
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    meta_path = path.with_name(path.name + ".meta")
    meta = read_meta(meta_path) if meta_path.exists() else {}
    return data.reshape(shape).astype(complex if is_complex else float), meta


def write_meta(path, meta: dict) -> None:
    with open(path, "w") as fh:
        for key, val in meta.items():
            fh.write(f"{key} = {val}\n")


def read_meta(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out
