"""Volume potentials by FFT convolution with a truncated kernel.

Direct path
    ``phi = ifft(M * fft(pad_4(f)))`` restricted to the box, where ``M`` is
    the truncated kernel transform sampled at ``s_m = (pi/2) m`` on the
    ``4n`` lattice. The trapezoidal factors cancel exactly:
    ``h^d (pi/2)^d (4n)^d / (2 pi)^d = 1``.

Precomputed path
    Applying the direct path to a discrete delta gives the translation table
    ``T`` at offsets ``{-n, ..., n-1}^d``. After that, each convolution is an
    ordinary aperiodic convolution on the ``2n`` lattice.

Both paths share one pruned transform (:func:`_pruned_apply`). The source
occupies ``n`` of the ``P`` padded points per axis, and only ``n`` outputs
are kept per axis. So the transform is applied axis by axis, padding each
axis just before its FFT and cropping it just after its inverse. The
multiplier is only ever gathered one slab of the last axis at a time.
This keeps the memory at about ``n^{d-1} P`` values instead of ``P^d``.

Multipliers of radial kernels are stored as a 1D table indexed by the
integer ``q = |m|^2``, and even tables are stored as one octant.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from .grid import FreqLattice, GridSpec, read_field, spectral_derivative_multiplier, write_field
from .kernels import KernelSpec, eval_spectral, eval_spectral_radial

_SLAB_BYTES = 96 * 2**20


# ------------------------------------------------------------ multipliers


class SpectralMultiplier:
    """Truncated kernel transform sampled on the pad-4 lattice of a grid.

    Radial kernels keep a table of values over ``q = m . m``. The convected
    kernel, which is not radial, is stored densely in DFT order.
    """

    def __init__(self, kspec: KernelSpec, grid: GridSpec):
        if kspec.dim != grid.dim:
            raise ValueError(f"kernel dim {kspec.dim} does not match grid dim {grid.dim}")
        self.kspec = kspec
        self.grid = grid
        self.lattice = FreqLattice(grid, 4)
        P = self.lattice.size
        ds = self.lattice.spacing
        if kspec.radial:
            qmax = grid.dim * (P // 2) ** 2
            self._table = eval_spectral_radial(kspec, ds * np.sqrt(np.arange(qmax + 1)))
            self._dense = None
        else:
            s = self.lattice.frequencies()
            mesh = np.stack(np.meshgrid(*([s] * grid.dim), indexing="ij"), axis=-1)
            self._dense = eval_spectral(kspec, mesh)
            self._table = None

    @property
    def size(self) -> int:
        return self.lattice.size

    @property
    def even(self) -> bool:
        """True if the multiplier is even in every axis separately."""
        return self._table is not None

    def radial_values(self) -> np.ndarray:
        """Values indexed by ``q = m . m`` (radial kernels only)."""
        if self._table is None:
            raise ValueError("convected multiplier has no radial table")
        return self._table

    def block(self, last: slice) -> np.ndarray:
        """Multiplier on the full lattice restricted to ``last`` modes of the last axis."""
        if self._dense is not None:
            return self._dense[..., last]
        m2 = self.lattice.modes() ** 2
        d = self.grid.dim
        q = m2[last].reshape((1,) * (d - 1) + (-1,))
        for a in range(d - 1):
            q = q + m2.reshape([-1 if b == a else 1 for b in range(d)])
        return self._table[q]

    def values(self) -> np.ndarray:
        """Full multiplier array in DFT order (``P^d`` values)."""
        return self.block(slice(None))

    def at(self, m_vec) -> complex:
        """Value at integer mode vector ``m_vec`` (any representative mod P)."""
        m = np.mod(np.asarray(m_vec, dtype=int), self.size)
        if self._dense is not None:
            return self._dense[tuple(m)]
        m = np.minimum(m, self.size - m)
        return self._table[int(np.sum(m**2))]


def build_multiplier(kspec: KernelSpec, grid: GridSpec) -> SpectralMultiplier:
    return SpectralMultiplier(kspec, grid)


class _OctantBlocks:
    """Block access to an array that is even in every axis, stored as one octant."""

    def __init__(self, octant: np.ndarray, size: int):
        self.octant = octant
        self.size = size
        m = np.arange(size)
        self._fold = np.minimum(m, size - m)

    def block(self, last: slice) -> np.ndarray:
        f = self._fold
        d = self.octant.ndim
        return self.octant[np.ix_(*([f] * (d - 1) + [f[last]]))]


class _DenseBlocks:
    def __init__(self, values: np.ndarray):
        self.values = values
        self.size = values.shape[0]

    def block(self, last: slice) -> np.ndarray:
        return self.values[..., last]


# -------------------------------------------------------- pruned transform


def _place(a, axis, P, pos):
    shape = list(a.shape)
    shape[axis] = P
    out = np.zeros(shape, dtype=complex)
    idx = [slice(None)] * a.ndim
    idx[axis] = pos
    out[tuple(idx)] = a
    return out


def _take(a, axis, pos):
    return np.take(a, pos, axis=axis)


def _slab_width(P, dim):
    return int(max(1, min(P, _SLAB_BYTES // (16 * P ** (dim - 1)))))


def _pruned_apply(src, grid: GridSpec, blocks, factors=(None,), targets=None):
    """``ifft(B * F_k * fft(pad(src)))`` cropped to the box, for each factor.

    Parameters
    ----------
    src : ndarray, shape ``grid.shape``
    blocks : object with ``size`` (padded side ``P``) and ``block(slice)``
    factors : sequence
        Extra per-output multipliers, each ``None`` or an array broadcastable
        to the lattice whose last axis has length 1 or ``P``.
    targets : list of ndarray, optional
        Per-axis matrices ``E[t, m]`` replacing the final inverse transform
        and crop, for evaluation at arbitrary tensor-product points.
    """
    d = grid.dim
    P = blocks.size
    pos = np.mod(grid.indices(), P)
    last = d - 1

    if targets is None:
        def finish(v, axis):
            return _take(sfft.ifft(v, axis=axis), axis, pos)
        out_len = [grid.n] * d
    else:
        def finish(v, axis):
            return np.moveaxis(np.tensordot(targets[axis], v, axes=([1], [axis])), 0, axis)
        out_len = [t.shape[0] for t in targets]

    stage = sfft.fft(_place(np.asarray(src, dtype=complex), last, P, pos), axis=last)
    accum = [np.empty(tuple(out_len[:last]) + (P,), dtype=complex) for _ in factors]
    width = _slab_width(P, d)
    for c0 in range(0, P, width):
        sl = slice(c0, min(P, c0 + width))
        w = stage[..., sl]
        for axis in range(last):
            w = sfft.fft(_place(w, axis, P, pos), axis=axis, overwrite_x=True)
        w = w * blocks.block(sl)
        for out, fac in zip(accum, factors):
            v = w
            if fac is not None:
                v = v * (fac[..., sl] if fac.shape[-1] == P else fac)
            for axis in reversed(range(last)):
                v = finish(v, axis)
            out[..., sl] = v
        del w
    del stage
    return [finish(a, last) for a in accum]


def _check_source(source, grid):
    source = np.asarray(source)
    if source.shape != grid.shape:
        raise ValueError(f"source shape {source.shape} does not match grid {grid.shape}")
    return source


# ------------------------------------------------------------ direct path


def convolve_direct(mult: SpectralMultiplier, source) -> np.ndarray:
    """Potential ``g_L * f`` at the grid nodes via the ``4n`` lattice."""
    source = _check_source(source, mult.grid)
    return _pruned_apply(source, mult.grid, mult)[0]


def convolve_gradient(mult: SpectralMultiplier, source) -> list:
    """Gradient components of the potential, one array per axis.

    The forward transform is shared and each component costs one extra
    inverse transform.
    """
    source = _check_source(source, mult.grid)
    factors = [spectral_derivative_multiplier(mult.lattice, a) for a in range(mult.grid.dim)]
    return _pruned_apply(source, mult.grid, mult, factors=factors)


def target_matrix(lattice: FreqLattice, x) -> np.ndarray:
    """Inverse-DFT rows ``e^{i s_m x_t} / P`` for arbitrary coordinates ``x_t``.

    The Nyquist column uses ``cos(s x)`` so real band-limited data stays real.
    """
    x = np.asarray(x, dtype=float)
    s = lattice.frequencies()
    E = np.exp(1j * np.outer(x, s))
    E[:, lattice.size // 2] = np.cos(x * s[lattice.size // 2])
    return E / lattice.size


def evaluate_at(mult: SpectralMultiplier, source, coords) -> np.ndarray:
    """Potential at the tensor-product points ``coords[0] x coords[1] x ...``.

    Uses the same trapezoidal rule as :func:`convolve_direct`, so at grid
    nodes the two agree to rounding; elsewhere this is the spectrally
    accurate value of the same discretization.
    """
    source = _check_source(source, mult.grid)
    if len(coords) != mult.grid.dim:
        raise ValueError("need one coordinate vector per axis")
    targets = [target_matrix(mult.lattice, c) for c in coords]
    return _pruned_apply(source, mult.grid, mult, targets=targets)[0]


# ------------------------------------------------------- translation table


class ConvolutionTable:
    """Translation table ``T`` of a kernel on a grid, with its ``2n`` transform.

    Even tables (radial kernels and their derivatives along no axis) store
    ``T`` and its transform for nonnegative offsets only.
    """

    def __init__(self, grid: GridSpec, t_values: np.ndarray, t_hat: np.ndarray, even: bool,
                 kspec: KernelSpec | None = None, label: str = ""):
        self.grid = grid
        self.parent = grid
        self.even = even
        self.kspec = kspec
        self.label = label
        n, d = grid.n, grid.dim
        want = (n + 1,) * d if even else (2 * n,) * d
        if t_values.shape != want or t_hat.shape != want:
            raise ValueError(f"table arrays must have shape {want}")
        self._t = t_values
        self._t_hat = t_hat
        self._blocks = _OctantBlocks(t_hat, 2 * n) if even else _DenseBlocks(t_hat)

    @property
    def size(self) -> int:
        return 2 * self.grid.n

    def block(self, last: slice) -> np.ndarray:
        return self._blocks.block(last)

    def t_dense(self) -> np.ndarray:
        """``T`` on the ``2n`` lattice, offset ``j`` at index ``j mod 2n``."""
        if not self.even:
            return self._t
        f = np.minimum(np.arange(self.size), self.size - np.arange(self.size))
        return self._t[np.ix_(*([f] * self.grid.dim))]

    def t_hat_dense(self) -> np.ndarray:
        return self._blocks.block(slice(None))

    def entry(self, offset) -> complex:
        off = np.asarray(offset, dtype=int)
        n = self.grid.n
        if off.shape != (self.grid.dim,) or np.any(off < -n) or np.any(off > n - 1):
            raise IndexError(f"offset {tuple(off)} outside {{-{n}, ..., {n - 1}}}^{self.grid.dim}")
        if self.even:
            return complex(self._t[tuple(np.abs(off))])
        return complex(self._t[tuple(np.mod(off, 2 * n))])

    def save(self, path) -> None:
        """Write ``T`` and its transform (``path`` and ``path.hat``)."""
        meta = {"kind": "translation_table", "dim": self.grid.dim, "n": self.grid.n,
                "even": int(self.even), "label": self.label}
        if self.kspec is not None:
            ks = self.kspec
            meta.update(family=ks.family, k=repr(ks.k), L=repr(ks.L),
                        h_vec=",".join(repr(c) for c in ks.h_vec) if ks.h_vec else "")
        write_field(path, self._t, meta)
        write_field(str(path) + ".hat", self._t_hat)

    @classmethod
    def load(cls, path) -> "ConvolutionTable":
        t, meta = read_field(path)
        t_hat, _ = read_field(str(path) + ".hat")
        if meta.get("kind") != "translation_table":
            raise ValueError(f"{path} is not a translation table")
        grid = GridSpec(int(meta["dim"]), int(meta["n"]))
        kspec = None
        if meta.get("family"):
            h = meta.get("h_vec") or None
            kspec = KernelSpec(grid.dim, meta["family"], k=float(meta["k"]), L=float(meta["L"]),
                               h_vec=tuple(float(c) for c in h.split(",")) if h else None)
        return cls(grid, t.astype(complex), t_hat.astype(complex), bool(int(meta["even"])),
                   kspec, meta.get("label", ""))


def _octant_dct(octant_fn, dim, length, keep, scale):
    """Separable DCT-I of an even array given by octant slabs, pruned to ``keep`` outputs.

    ``octant_fn(sl)`` returns the octant values with the last axis limited
    to ``sl``.
    """
    width = max(1, int(_SLAB_BYTES // (16 * length ** (dim - 1))))
    partial = np.empty((keep,) * (dim - 1) + (length,), dtype=complex)
    for c0 in range(0, length, width):
        sl = slice(c0, min(length, c0 + width))
        w = np.asarray(octant_fn(sl), dtype=complex)
        for axis in range(dim - 1):
            w = np.take(sfft.dct(w, type=1, axis=axis), np.arange(keep), axis=axis)
        partial[..., sl] = w
    out = np.take(sfft.dct(partial, type=1, axis=dim - 1), np.arange(keep), axis=dim - 1)
    return out * scale


def precompute_table(mult: SpectralMultiplier, label: str = "") -> ConvolutionTable:
    """Translation table: the direct path applied to a discrete delta.

    For radial kernels the multiplier is even in each axis, so its inverse
    DFT is a cosine transform over one octant. That is evaluated by a
    DCT-I that only keeps the ``n + 1`` needed offsets per axis. Other
    kernels take the dense inverse DFT.
    """
    grid = mult.grid
    n, d = grid.n, grid.dim
    P = mult.size
    if mult.even:
        table = mult.radial_values()
        m2 = np.arange(P // 2 + 1) ** 2

        def octant(sl):
            q = m2[sl].reshape((1,) * (d - 1) + (-1,))
            for a in range(d - 1):
                q = q + m2.reshape([-1 if b == a else 1 for b in range(d)])
            return table[q]

        t = _octant_dct(octant, d, P // 2 + 1, n + 1, 1.0 / P**d)
        t_hat = sfft.dctn(t, type=1)
        if mult.kspec.real_symmetric:
            t, t_hat = t.real + 0j, t_hat.real + 0j
        return ConvolutionTable(grid, t, t_hat, True, mult.kspec, label)
    return _dense_table(grid, mult.values(), mult.kspec, label)


def _dense_table(grid, values, kspec, label):
    n, d = grid.n, grid.dim
    P = values.shape[0]
    full = sfft.ifftn(values)
    off = np.mod(np.arange(-n, n), P)
    t = np.zeros((2 * n,) * d, dtype=complex)
    dest = np.mod(np.arange(-n, n), 2 * n)
    t[np.ix_(*([dest] * d))] = full[np.ix_(*([off] * d))]
    del full
    return ConvolutionTable(grid, t, sfft.fftn(t), False, kspec, label)


def precompute_gradient_tables(mult: SpectralMultiplier) -> list:
    """Tables of the derivative kernels ``d/dx_a (g_L * .)``, one per axis.

    Uses the dense inverse DFT, so memory grows like ``(4n)^d``.
    """
    vals = mult.values()
    out = []
    for a in range(mult.grid.dim):
        dm = spectral_derivative_multiplier(mult.lattice, a)
        out.append(_dense_table(mult.grid, vals * dm, mult.kspec, f"d/dx{a}"))
    return out


def convolve_precomputed(table: ConvolutionTable, source) -> np.ndarray:
    """Aperiodic convolution with the translation table on the ``2n`` lattice."""
    source = _check_source(source, table.grid)
    return _pruned_apply(source, table.grid, table)[0]


def nystrom_entry(table: ConvolutionTable, i_offset) -> complex:
    """Matrix entry of the discretized operator for index difference ``i_offset``."""
    return table.entry(i_offset)
