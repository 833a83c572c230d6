"""Simulated device characterisation sweeps and power-law recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import DeviceLaw, fit_power_law, sample_device_prefactors, sample_hcs


@dataclass
class PowerLawSweep:
    """Per-current cycle-to-cycle statistics of a device population."""

    i_set: np.ndarray
    empirical_median: np.ndarray
    empirical_sd: np.ndarray
    law_median: np.ndarray
    law_sd: np.ndarray

    def rows(self):
        return zip(self.i_set, self.empirical_median, self.empirical_sd, self.law_median, self.law_sd)

    def fit(self) -> dict:
        d, c = fit_power_law(zip(self.i_set, self.empirical_median))
        a, b = fit_power_law(zip(self.i_set, self.empirical_sd))
        return {"a": a, "b": b, "c": c, "d": d}


def sweep_currents(law: DeviceLaw, count: int) -> np.ndarray:
    """``count`` currents spaced geometrically over the law's window."""
    return np.geomspace(law.i_min, law.i_max, count)


def cycle_population(law: DeviceLaw, d_i: np.ndarray, i_set: float, cycles: int, rng) -> np.ndarray:
    """RESET/SET ``cycles`` times at ``i_set``; returns (devices, cycles) conductances."""
    d_rep = np.repeat(d_i[:, None], cycles, axis=1)
    return sample_hcs(law, d_rep, np.full(d_rep.shape, i_set), rng)


def power_law_sweep(
    law: DeviceLaw, devices: int, cycles: int, currents: int, rng, d2d: bool = True
) -> PowerLawSweep:
    """Median and SD versus SET current over a population.

    For every current each device is cycled; its cycle-to-cycle median and
    SD are taken, and the population median of each is reported.
    """
    d_i = sample_device_prefactors(law, devices, rng, d2d)
    i_set = sweep_currents(law, currents)
    med, sd = [], []
    for i in i_set:
        g = cycle_population(law, d_i, i, cycles, rng)
        med.append(np.median(np.median(g, axis=1)))
        sd.append(np.median(np.std(g, axis=1, ddof=1)))
    return PowerLawSweep(
        i_set=i_set,
        empirical_median=np.array(med),
        empirical_sd=np.array(sd),
        law_median=law.d * i_set**law.c,
        law_sd=law.a * i_set**law.b,
    )


def single_device_cycles(law: DeviceLaw, i_set: float, cycles: int, rng) -> np.ndarray:
    return sample_hcs(law, np.full(cycles, law.d), np.full(cycles, i_set), rng)


def device_spread(law: DeviceLaw, devices: int, cycles: int, i_set: float, rng, d2d: bool = True):
    """Per-device (median, SD) over repeated cycling at one current."""
    d_i = sample_device_prefactors(law, devices, rng, d2d)
    g = cycle_population(law, d_i, i_set, cycles, rng)
    return np.median(g, axis=1), np.std(g, axis=1, ddof=1)
