"""System-level production: array DC output, losses and inverter conversion.

Losses enter in the order a plant experiences them. Soiling shades the
cells, so it reduces the effective irradiance before the diode solve.
Degradation lowers the array current. DC wiring drops voltage between
array and inverter, the inverter converts, and AC wiring takes its share
of the AC output. Inverter conversion loss is produced by the inverter
model itself and is never applied twice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .geometry import ArrayOrientation
from .losses import WiringSpec, ohmic_loss
from .pvcore import (G_STC, ArrayConfig, InverterParams, ModuleParams, OperatingConditions,
                     module_dc, photocurrent, snl_ac_power)

SIGNALS = ["I_L", "I_sc", "V_oc", "I_DC", "V_DC", "P_DC", "P_AC"]


@dataclass(frozen=True)
class SystemConfig:
    name: str
    array: ArrayConfig
    module: ModuleParams
    inverter: InverterParams
    orientation: ArrayOrientation
    dc_wiring: WiringSpec
    ac_wiring: WiringSpec
    V_AC_nominal: float = 480.0

    @property
    def area(self):
        """Total module area in m2."""
        return self.module.area * self.array.n_modules

    @property
    def nameplate(self):
        """Nominal DC power at STC, W (module STC power times module count)."""
        res = module_dc(self.module, [G_STC], [25.0])
        return float(res.P[0]) * self.array.n_modules


def _pct(x, n):
    if x is None:
        return None
    return np.broadcast_to(np.asarray(x, dtype=float), (n,))


def simulate(system: SystemConfig, G_POA, T_cell, soiling=0.0, degradation=0.0,
             dc_wiring=None, ac_wiring=None, index=None):
    """Simulated electrical signals for one system.

    Parameters
    ----------
    system : SystemConfig
    G_POA, T_cell : array_like
        Plane-of-array irradiance (W/m2) and cell temperature (C).
    soiling, degradation : float or array_like
        Loss percentages per sample.
    dc_wiring, ac_wiring : float, array_like or None
        Loss percentages per sample; ``None`` computes the ohmic loss from
        the wiring spec and the simulated current.
    index : optional
        Index for the returned frame.

    Returns
    -------
    DataFrame
        ``G_POA``, ``T_cell``, the array signals in :data:`SIGNALS`, and
        ``eta_cell``, ``eta_inv`` plus the applied loss percentages.
    """
    G = np.atleast_1d(np.asarray(G_POA, dtype=float))
    T = np.broadcast_to(np.asarray(T_cell, dtype=float), G.shape)
    n = G.size
    soil = _pct(soiling, n)
    deg = _pct(degradation, n)
    G_eff = G * (1.0 - soil / 100.0)
    mod = module_dc(system.module, G_eff, T)
    ns, npar = system.array.modules_per_string, system.array.strings
    lit = G_eff > 0
    i_l = np.zeros(n)
    if np.any(lit):
        i_l[lit] = photocurrent(system.module, OperatingConditions(G_eff[lit], T[lit]))
    derate = 1.0 - deg / 100.0
    I_DC = mod.I * npar * derate
    V_arr = mod.V * ns
    P_arr = V_arr * I_DC
    if dc_wiring is None:
        _, dc_pct = ohmic_loss(I_DC, system.dc_wiring, P_arr)
        dc_pct = np.nan_to_num(dc_pct)
    else:
        dc_pct = _pct(dc_wiring, n)
    V_DC = V_arr * (1.0 - dc_pct / 100.0)
    P_DC = V_DC * I_DC
    P_inv = snl_ac_power(P_DC, V_DC, system.inverter)
    if ac_wiring is None:
        I_AC = P_inv / system.V_AC_nominal
        _, ac_pct = ohmic_loss(I_AC, system.ac_wiring, P_inv)
        ac_pct = np.nan_to_num(ac_pct)
    else:
        ac_pct = _pct(ac_wiring, n)
    P_AC = P_inv * (1.0 - ac_pct / 100.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta_cell = np.where(G > 0, P_DC / (G * system.area), 0.0)
        eta_inv = np.where(P_DC > 0, P_AC / np.where(P_DC > 0, P_DC, 1.0), 0.0)
    out = pd.DataFrame({
        "G_POA": G, "T_cell": T,
        "I_L": i_l * npar, "I_sc": mod.I_sc * npar * derate, "V_oc": mod.V_oc * ns,
        "I_DC": I_DC, "V_DC": V_DC, "P_DC": P_DC, "P_AC": P_AC,
        "eta_cell": eta_cell, "eta_inv": eta_inv,
        "loss_soiling": soil, "loss_degradation": deg,
        "loss_dc_wiring": dc_pct, "loss_ac_wiring": ac_pct,
    }, index=index)
    return out
