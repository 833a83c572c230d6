"""Differential N x M crossbar holding one model per row plus row counters."""

from __future__ import annotations

import json

import numpy as np

from .device import (
    DeviceLaw,
    ProgrammingLut,
    i_set_for_target,
    quantize_to_lut,
    sample_device_prefactors,
    sample_hcs,
)

SNAPSHOT_VERSION = 1


class CrossbarStateError(RuntimeError):
    pass


class SnapshotError(ValueError):
    pass


class CrossbarArray:
    """Two N x M conductance grids (g+ and g-) and N integer counters.

    LCS devices are stored with conductance 0 so that readout never needs to
    consult the state masks.  ``sd_scale`` multiplies every cycle-to-cycle
    SD; 0 gives a noiseless device (used by tests).
    """

    def __init__(
        self,
        rows: int,
        cols: int,
        law: DeviceLaw,
        rng: np.random.Generator | None = None,
        lut: ProgrammingLut | None = None,
        d2d: bool = True,
        sd_scale: float = 1.0,
    ):
        if rows < 1 or cols < 1:
            raise ValueError("crossbar needs at least one row and one column")
        self.rows = rows
        self.cols = cols
        self.law = law
        self.lut = lut if lut is not None and len(lut) else None
        self.sd_scale = float(sd_scale)
        self.g_plus = np.zeros((rows, cols))
        self.g_minus = np.zeros((rows, cols))
        self.hcs_plus = np.zeros((rows, cols), dtype=bool)
        self.hcs_minus = np.zeros((rows, cols), dtype=bool)
        self.counters = np.zeros(rows, dtype=np.int64)
        if d2d and rng is None:
            raise ValueError("an rng is required to draw device-to-device offsets")
        self.d_plus = sample_device_prefactors(law, (rows, cols), rng, d2d)
        self.d_minus = sample_device_prefactors(law, (rows, cols), rng, d2d)

    # -- readout ---------------------------------------------------------

    def _check_row(self, n: int) -> None:
        if not 0 <= n < self.rows:
            raise IndexError(f"row {n} out of range for {self.rows}-row crossbar")

    def read_row(self, n: int) -> np.ndarray:
        self._check_row(n)
        return self.g_plus[n] - self.g_minus[n]

    def weights(self) -> np.ndarray:
        """All differential parameters, shape (N, M)."""
        return self.g_plus - self.g_minus

    def dot_product(self, n: int, v) -> float:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.cols,):
            raise ValueError(f"input length {v.shape} does not match {self.cols} columns")
        return float(self.read_row(n) @ v)

    def row_programmed(self, n: int) -> bool:
        return bool(self.hcs_plus[n].all() and self.hcs_minus[n].all())

    # -- programming -------------------------------------------------------

    def _set_row(self, n: int, i_plus, i_minus, rng) -> None:
        g = sample_hcs(
            self.law,
            np.stack([self.d_plus[n], self.d_minus[n]]),
            np.stack([i_plus, i_minus]),
            rng,
            self.sd_scale,
        )
        self.g_plus[n], self.g_minus[n] = g[0], g[1]
        self.hcs_plus[n] = True
        self.hcs_minus[n] = True

    def initialize_row(self, rng, n: int = 0) -> None:
        """SET every device of row ``n`` at the lowest current (widest proposal)."""
        self._check_row(n)
        i = np.full(self.cols, self.law.i_min)
        self._set_row(n, i, i, rng)

    def program_currents(self, src: np.ndarray) -> np.ndarray:
        """SET currents that reproduce the conductances ``src`` as medians."""
        i = i_set_for_target(self.law, src)
        if self.lut is not None:
            i = quantize_to_lut(self.lut, self.law, i)
        return np.asarray(i)

    def propose_row(self, src: int, dst: int, rng) -> None:
        """Program row ``dst`` with a proposal centred on row ``src``."""
        self._check_row(src)
        self._check_row(dst)
        if not self.row_programmed(src):
            raise CrossbarStateError(f"source row {src} is not fully programmed")
        i_plus = self.program_currents(self.g_plus[src])
        i_minus = self.program_currents(self.g_minus[src])
        self._set_row(dst, i_plus, i_minus, rng)

    def erase_row(self, n: int) -> None:
        self._check_row(n)
        self.g_plus[n] = 0.0
        self.g_minus[n] = 0.0
        self.hcs_plus[n] = False
        self.hcs_minus[n] = False

    def reset_all(self) -> None:
        self.g_plus[:] = 0.0
        self.g_minus[:] = 0.0
        self.hcs_plus[:] = False
        self.hcs_minus[:] = False
        self.counters[:] = 0

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> str:
        """Versioned JSON document; identical arrays give identical text."""
        doc = {
            "version": SNAPSHOT_VERSION,
            "rows": self.rows,
            "cols": self.cols,
            "law": self.law.to_dict(),
            "lut": [list(e) for e in self.lut.entries] if self.lut is not None else None,
            "sd_scale": self.sd_scale,
            "counters": self.counters.tolist(),
            "hcs_plus": self.hcs_plus.ravel().astype(int).tolist(),
            "hcs_minus": self.hcs_minus.ravel().astype(int).tolist(),
            "g_plus": self.g_plus.ravel().tolist(),
            "g_minus": self.g_minus.ravel().tolist(),
            "d_plus": self.d_plus.ravel().tolist(),
            "d_minus": self.d_minus.ravel().tolist(),
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def restore(cls, text: str) -> "CrossbarArray":
        try:
            doc = json.loads(text)
            if not isinstance(doc, dict):
                raise SnapshotError("snapshot must be a JSON object")
            if doc.get("version") != SNAPSHOT_VERSION:
                raise SnapshotError(f"unsupported snapshot version {doc.get('version')!r}")
            rows, cols = int(doc["rows"]), int(doc["cols"])
            law = DeviceLaw.from_dict(doc["law"])
            lut = ProgrammingLut(tuple(tuple(e) for e in doc["lut"])) if doc["lut"] else None
            arr = cls(rows, cols, law, lut=lut, d2d=False, sd_scale=doc["sd_scale"])
            shape = (rows, cols)

            def grid(key, dtype=float):
                a = np.asarray(doc[key], dtype=dtype)
                if a.size != rows * cols:
                    raise SnapshotError(f"field {key!r} has {a.size} values, expected {rows * cols}")
                return a.reshape(shape)

            arr.g_plus = grid("g_plus")
            arr.g_minus = grid("g_minus")
            arr.hcs_plus = grid("hcs_plus", bool)
            arr.hcs_minus = grid("hcs_minus", bool)
            arr.d_plus = grid("d_plus")
            arr.d_minus = grid("d_minus")
            counters = np.asarray(doc["counters"], dtype=np.int64)
            if counters.shape != (rows,) or np.any(counters < 0):
                raise SnapshotError("counters must be N non-negative integers")
            arr.counters = counters
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"malformed crossbar snapshot: {exc}") from exc
        if np.any(arr.g_plus[~arr.hcs_plus] != 0) or np.any(arr.g_minus[~arr.hcs_minus] != 0):
            raise SnapshotError("LCS devices must carry zero conductance")
        if np.any(arr.g_plus[arr.hcs_plus] <= 0) or np.any(arr.g_minus[arr.hcs_minus] <= 0):
            raise SnapshotError("HCS devices must carry positive conductance")
        if np.any(arr.d_plus <= 0) or np.any(arr.d_minus <= 0):
            raise SnapshotError("device prefactors must be positive")
        return arr

    def copy(self) -> "CrossbarArray":
        return CrossbarArray.restore(self.snapshot())
