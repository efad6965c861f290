"""Two-scale pinning landscapes and their wiggly evaluations.

A landscape holds a closed-form cell potential hhat0(x, y), 1-periodic in the
fast variable y (and optionally modulated by a slow closed-form factor in x).
At pin separation eta the wiggly potential is h(x) = scale * eta *
hhat0(x, x/eta), whose gradient picks up the fast derivative at order one:
grad h = scale * (grad2 hhat0 + eta * grad1 hhat0), and the pinning weight is
a = exp(h).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

KINDS = ("zero", "cosine1d", "eggbox", "tilted_random_fourier", "tabulated")
TWO_PI = 2.0 * np.pi


@dataclass
class PinningLandscape:
    kind: str = "zero"
    amplitude: float = 0.0
    eta: float = 1.0
    scale: float = 1.0
    seed: int = 0
    modes: int = 3
    # slow modulation: hhat0 is multiplied by 1 + slow_amplitude*cos(2 pi x.slow_dir)
    slow_amplitude: float = 0.0
    slow_dir: tuple[float, float] = (1.0, 0.0)
    table: np.ndarray | None = None  # tabulated cell potential, shape (n, n)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown landscape kind {self.kind!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.kind == "tilted_random_fourier":
            rng = np.random.default_rng(self.seed)
            ks = []
            for k1 in range(-self.modes, self.modes + 1):
                for k2 in range(-self.modes, self.modes + 1):
                    if (k1, k2) > (0, 0):
                        ks.append((k1, k2))
            ks = np.array(ks, dtype=float)
            amp = rng.normal(size=len(ks)) / (1.0 + (ks**2).sum(axis=1))
            phase = rng.uniform(0, TWO_PI, size=len(ks))
            self._rf_k = ks
            self._rf_amp = amp
            self._rf_phase = phase
            # normalize so that max |hhat0| ~ amplitude on the cell
            peak = np.abs(self._cell_raw(_unit_grid(256))).max()
            self._rf_amp *= self.amplitude / max(peak, 1e-300)
        if self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated landscape needs a table")
            from scipy.interpolate import RectBivariateSpline
            t = np.asarray(self.table, dtype=float)
            n0, n1 = t.shape
            # periodic bicubic: pad by 3 cells on each side
            tp = np.pad(t, 3, mode="wrap")
            u = (np.arange(-3, n0 + 3)) / n0
            v = (np.arange(-3, n1 + 3)) / n1
            self._spl = RectBivariateSpline(u, v, tp, kx=3, ky=3)

    # -- cell potential hhat0 and its fast gradient ------------------------

    def _cell_raw(self, y: np.ndarray) -> np.ndarray:
        y1, y2 = y[..., 0], y[..., 1]
        if self.kind == "zero":
            return np.zeros(y1.shape)
        if self.kind == "cosine1d":
            return self.amplitude * np.cos(TWO_PI * y1)
        if self.kind == "eggbox":
            return self.amplitude * (np.cos(TWO_PI * y1) + np.cos(TWO_PI * y2))
        if self.kind == "tilted_random_fourier":
            ph = TWO_PI * (y[..., None, 0] * self._rf_k[:, 0] + y[..., None, 1] * self._rf_k[:, 1])
            return (self._rf_amp * np.cos(ph + self._rf_phase)).sum(axis=-1)
        yy1 = np.mod(y1, 1.0)
        yy2 = np.mod(y2, 1.0)
        return self._spl(yy1.ravel(), yy2.ravel(), grid=False).reshape(y1.shape)

    def _cell_grad_raw(self, y: np.ndarray) -> np.ndarray:
        y1, y2 = y[..., 0], y[..., 1]
        if self.kind == "zero":
            return np.zeros(y.shape)
        if self.kind == "cosine1d":
            g1 = -self.amplitude * TWO_PI * np.sin(TWO_PI * y1)
            return np.stack([g1, np.zeros_like(g1)], axis=-1)
        if self.kind == "eggbox":
            g1 = -self.amplitude * TWO_PI * np.sin(TWO_PI * y1)
            g2 = -self.amplitude * TWO_PI * np.sin(TWO_PI * y2)
            return np.stack([g1, g2], axis=-1)
        if self.kind == "tilted_random_fourier":
            ph = TWO_PI * (y[..., None, 0] * self._rf_k[:, 0] + y[..., None, 1] * self._rf_k[:, 1])
            s = -TWO_PI * self._rf_amp * np.sin(ph + self._rf_phase)
            g1 = (s * self._rf_k[:, 0]).sum(axis=-1)
            g2 = (s * self._rf_k[:, 1]).sum(axis=-1)
            return np.stack([g1, g2], axis=-1)
        yy1 = np.mod(y1, 1.0)
        yy2 = np.mod(y2, 1.0)
        g1 = self._spl(yy1.ravel(), yy2.ravel(), dx=1, grid=False).reshape(y1.shape)
        g2 = self._spl(yy1.ravel(), yy2.ravel(), dy=1, grid=False).reshape(y1.shape)
        return np.stack([g1, g2], axis=-1)

    def _slow(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Slow factor s(x) and grad s; s = 1 when no modulation is set."""
        if self.slow_amplitude == 0.0:
            one = np.ones(x.shape[:-1])
            return one, np.zeros(x.shape)
        d = np.asarray(self.slow_dir, dtype=float)
        ph = TWO_PI * (x[..., 0] * d[0] + x[..., 1] * d[1])
        s = 1.0 + self.slow_amplitude * np.cos(ph)
        ds = -self.slow_amplitude * TWO_PI * np.sin(ph)
        return s, np.stack([ds * d[0], ds * d[1]], axis=-1)

    def hhat0(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s, _ = self._slow(x)
        return s * self._cell_raw(y)

    def grad2_hhat0(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s, _ = self._slow(x)
        return s[..., None] * self._cell_grad_raw(np.asarray(y, dtype=float))

    def grad1_hhat0(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _, ds = self._slow(x)
        return ds * self._cell_raw(np.asarray(y, dtype=float))[..., None]

    # -- wiggly evaluation --------------------------------------------------

    def h(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.scale * self.eta * self.hhat0(x, x / self.eta)

    def grad_h(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x / self.eta
        return self.scale * (self.grad2_hhat0(x, y) + self.eta * self.grad1_hhat0(x, y))

    def weight(self, x) -> np.ndarray:
        return np.exp(self.h(x))

    # -- cell-problem views (fast variable only, slow position frozen) ------

    def cell_h(self, y, x_slow=(0.0, 0.0)) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        xs = np.broadcast_to(np.asarray(x_slow, dtype=float), y.shape)
        return self.scale * self.hhat0(xs, y)

    def cell_grad(self, y, x_slow=(0.0, 0.0)) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        xs = np.broadcast_to(np.asarray(x_slow, dtype=float), y.shape)
        return self.scale * self.grad2_hhat0(xs, y)

    def osc(self) -> float:
        """max hhat0 - min hhat0 over the unit cell (the Arrhenius barrier)."""
        a = abs(self.amplitude) * self.scale
        if self.kind == "zero":
            return 0.0
        if self.kind == "cosine1d":
            return 2.0 * a
        if self.kind == "eggbox":
            return 4.0 * a
        vals = self.cell_h(_unit_grid(512))
        return float(vals.max() - vals.min())

    # -- JSON descriptors ---------------------------------------------------

    def to_json(self) -> str:
        d = {"kind": self.kind, "amplitude": self.amplitude, "eta": self.eta,
             "scale": self.scale, "seed": self.seed, "modes": self.modes,
             "slow_amplitude": self.slow_amplitude, "slow_dir": list(self.slow_dir)}
        if self.table is not None:
            d["table"] = np.asarray(self.table).tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "PinningLandscape":
        d = json.loads(text)
        return cls.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict) -> "PinningLandscape":
        kw = dict(d)
        if "slow_dir" in kw:
            kw["slow_dir"] = tuple(kw["slow_dir"])
        if kw.get("table") is not None:
            kw["table"] = np.asarray(kw["table"], dtype=float)
        return cls(**kw)


def _unit_grid(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    Y1, Y2 = np.meshgrid(t, t, indexing="ij")
    return np.stack([Y1, Y2], axis=-1)


def eval_pinning(land: PinningLandscape, x):
    """Return (h, grad h, a = e^h) at x (vectorized over leading axes)."""
    h = land.h(x)
    gh = land.grad_h(x)
    return h, gh, np.exp(h)


def washboard(amplitude: float = -1.0 / TWO_PI, eta: float = 1.0) -> PinningLandscape:
    """1D cosine cell potential A cos(2 pi y1); the default amplitude gives
    pinning force sin(2 pi y1) with unit depinning threshold along e1."""
    return PinningLandscape(kind="cosine1d", amplitude=amplitude, eta=eta)
