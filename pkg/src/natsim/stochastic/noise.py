"""Seeded Wiener and two-outcome increments with one independent stream per (path, channel)."""

from __future__ import annotations

import numpy as np

MODES = ("gaussian", "binary")


def channel_generator(seed: int, path: int, channel: int) -> np.random.Generator:
    """PCG64 stream for one (path, channel) pair.

    Streams come from ``SeedSequence(seed, spawn_key=(path, channel))``, so a
    path's increments do not depend on how many other paths are simulated or in
    which order they are drawn.
    """
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(seed, spawn_key=(int(path), int(channel)))
    return np.random.Generator(np.random.PCG64(ss))


class NoisePath:
    """Increment stream for a single trajectory.

    ``gaussian`` increments are N(0, dt) (numpy's ziggurat sampler);
    ``binary`` increments are exactly +sqrt(dt) or -sqrt(dt), with P(+)
    either 1/2 or supplied per draw.
    """

    def __init__(self, seed: int, n_channels: int, dt: float, mode: str = "gaussian",
                 path: int = 0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.seed, self.n_channels, self.dt, self.mode, self.path = (
            int(seed), int(n_channels), float(dt), mode, int(path))
        self._gens = [channel_generator(self.seed, self.path, k) for k in range(self.n_channels)]

    def increments(self, n_steps: int, p_plus=None) -> np.ndarray:
        """Next ``n_steps`` increments, shape (n_steps, n_channels).

        Drawing in several blocks yields the same stream as one large block.
        ``p_plus`` (binary mode only) is broadcast against that shape.
        """
        if self.mode == "gaussian":
            if p_plus is not None:
                raise ValueError("p_plus applies to binary mode only")
            cols = [g.standard_normal(n_steps) for g in self._gens]
            return np.sqrt(self.dt) * np.stack(cols, axis=-1).reshape(n_steps, self.n_channels)
        u = np.stack([g.random(n_steps) for g in self._gens], axis=-1).reshape(
            n_steps, self.n_channels)
        prob = 0.5 if p_plus is None else np.broadcast_to(p_plus, u.shape)
        return np.where(u < prob, 1.0, -1.0) * np.sqrt(self.dt)

    def uniforms(self, n_steps: int) -> np.ndarray:
        """Raw U(0,1) draws from the same streams, shape (n_steps, n_channels)."""
        return np.stack([g.random(n_steps) for g in self._gens], axis=-1).reshape(
            n_steps, self.n_channels)


class EnsembleNoise:
    """Per-step increments for a batch of paths, drawn in blocks.

    Path ``first_path + i`` uses the same streams as ``NoisePath(seed, ..., path=first_path + i)``,
    so splitting an ensemble into batches does not change any path.
    """

    def __init__(self, seed: int, n_paths: int, n_channels: int, dt: float,
                 mode: str = "gaussian", first_path: int = 0, block: int = 1024):
        self.paths = [NoisePath(seed, n_channels, dt, mode, path=first_path + i)
                      for i in range(n_paths)]
        self.dt, self.mode, self.block = float(dt), mode, int(block)
        self.n_paths, self.n_channels = n_paths, n_channels
        self._buf = np.empty((0, n_paths, n_channels))
        self._pos = 0

    def _refill(self):
        if self.mode == "binary":
            # store uniforms so per-step probabilities can be applied later
            blocks = [p.uniforms(self.block) for p in self.paths]
        else:
            blocks = [p.increments(self.block) for p in self.paths]
        self._buf = np.stack(blocks, axis=1)
        self._pos = 0

    def _row(self):
        if self._pos >= self._buf.shape[0]:
            self._refill()
        row = self._buf[self._pos]
        self._pos += 1
        return row

    def next_uniforms(self) -> np.ndarray:
        """Raw U(0,1) draws for one step (binary mode), for outcome-by-outcome sampling."""
        if self.mode != "binary":
            raise ValueError("uniform draws are available in binary mode only")
        return self._row()

    def next(self, p_plus=None) -> np.ndarray:
        """Increments for one step, shape (n_paths, n_channels)."""
        row = self._row()
        if self.mode == "gaussian":
            return row
        prob = 0.5 if p_plus is None else p_plus
        return np.where(row < prob, 1.0, -1.0) * np.sqrt(self.dt)
