"""Periodic 2D grids and sampled fields (scalar / vector / complex).

Conventions: arrays are indexed [i, j] with i along x and j along y
(``indexing='ij'``). Sample points are the nodes x0 + i*hx, y0 + j*hy of a
uniform periodic grid; the box is [x0, x0+Lx) x [y0, y0+Ly) and defaults to
being centered at the origin.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"PFLD1"


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    x0: float | None = None
    y0: float | None = None

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8 or self.nx % 2 or self.ny % 2:
            raise ValueError("nx, ny must be even and >= 8")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("Lx, Ly must be positive")
        if self.x0 is None:
            object.__setattr__(self, "x0", -0.5 * self.Lx)
        if self.y0 is None:
            object.__setattr__(self, "y0", -0.5 * self.Ly)

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x0 + self.hx * np.arange(self.nx)
        y = self.y0 + self.hy * np.arange(self.ny)
        return x, y

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y, indexing="ij")

    def points(self) -> np.ndarray:
        """All sample points as an (nx, ny, 2) array."""
        X, Y = self.meshgrid()
        return np.stack([X, Y], axis=-1)

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        kx = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.hx)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.hy)
        return np.meshgrid(kx, ky, indexing="ij")


def _check(grid: Grid2D, data: np.ndarray, comps: int, dtype) -> np.ndarray:
    shape = grid.shape if comps == 1 else grid.shape + (comps,)
    arr = np.asarray(data, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected samples of shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64) if dtype == np.complex128 else arr)):
        raise ValueError("field samples must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid2D
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check(self.grid, self.data, 1, np.float64))

    def mean(self) -> float:
        return float(self.data.mean())

    def integral(self) -> float:
        return float(self.data.sum() * self.grid.cell_area)

    def l2(self) -> float:
        return float(np.sqrt((self.data**2).sum() * self.grid.cell_area))

    def __add__(self, other):
        return ScalarField(self.grid, self.data + _samples(other, self.grid))

    def __sub__(self, other):
        return ScalarField(self.grid, self.data - _samples(other, self.grid))

    def __mul__(self, other):
        return ScalarField(self.grid, self.data * _samples(other, self.grid))

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    grid: Grid2D
    data: np.ndarray  # (nx, ny, 2)

    def __post_init__(self):
        object.__setattr__(self, "data", _check(self.grid, self.data, 2, np.float64))

    def component(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.data[..., k])

    def l2(self) -> float:
        return float(np.sqrt((self.data**2).sum() * self.grid.cell_area))

    def perp(self) -> "VectorField":
        """Counterclockwise pi/2 rotation applied pointwise: (u, v) -> (-v, u)."""
        return VectorField(self.grid, np.stack([-self.data[..., 1], self.data[..., 0]], axis=-1))


@dataclass(frozen=True)
class ComplexField:
    grid: Grid2D
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _check(self.grid, self.data, 1, np.complex128))

    def abs(self) -> ScalarField:
        return ScalarField(self.grid, np.abs(self.data))


def _samples(obj, grid: Grid2D) -> np.ndarray:
    if isinstance(obj, ScalarField):
        if obj.grid != grid:
            raise ValueError("grid mismatch")
        return obj.data
    return np.asarray(obj, dtype=np.float64)


def constant_field(grid: Grid2D, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def sample_scalar(grid: Grid2D, fn) -> ScalarField:
    X, Y = grid.meshgrid()
    return ScalarField(grid, fn(X, Y))


def sample_vector(grid: Grid2D, fn) -> VectorField:
    X, Y = grid.meshgrid()
    fx, fy = fn(X, Y)
    return VectorField(grid, np.stack([np.broadcast_to(fx, X.shape),
                                       np.broadcast_to(fy, X.shape)], axis=-1))


# ---------------------------------------------------------------------------
# serialization: flat CSV and the self-describing PFLD1 binary dump
# ---------------------------------------------------------------------------

def write_csv(path, fld) -> None:
    X, Y = fld.grid.meshgrid()
    if isinstance(fld, ScalarField):
        cols = [X.ravel(), Y.ravel(), fld.data.ravel()]
        header = "x,y,value"
    elif isinstance(fld, VectorField):
        cols = [X.ravel(), Y.ravel(), fld.data[..., 0].ravel(), fld.data[..., 1].ravel()]
        header = "x,y,vx,vy"
    else:
        cols = [X.ravel(), Y.ravel(), fld.data.real.ravel(), fld.data.imag.ravel()]
        header = "x,y,re,im"
    table = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, table, delimiter=",", fmt="%.17g")


def write_binary(path, fld) -> None:
    """Header: magic 'PFLD1', uint32 nx, ny, float64 Lx, Ly (little-endian),
    then row-major float64 payload (vector: interleaved components; complex:
    interleaved re, im)."""
    g = fld.grid
    if isinstance(fld, ScalarField):
        payload = fld.data
    elif isinstance(fld, VectorField):
        payload = fld.data
    else:
        payload = np.stack([fld.data.real, fld.data.imag], axis=-1)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIdd", g.nx, g.ny, g.Lx, g.Ly))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_binary(path, kind: str = "auto"):
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        nx, ny, Lx, Ly = struct.unpack("<IIdd", fh.read(24))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid2D(nx, ny, Lx, Ly)
    n = nx * ny
    if raw.size == n:
        ncomp = 1
    elif raw.size == 2 * n:
        ncomp = 2
    else:
        raise ValueError(f"payload size {raw.size} does not match {nx}x{ny} grid")
    if ncomp == 1:
        return ScalarField(grid, raw.reshape(nx, ny))
    data = raw.reshape(nx, ny, 2)
    if kind == "complex":
        return ComplexField(grid, data[..., 0] + 1j * data[..., 1])
    return VectorField(grid, data)
