"""Single-diode module model and Sandia inverter conversion.

Module parameters are translated from reference conditions with the
De Soto/CEC relations, the implicit diode equation is solved through its
explicit Lambert-W form, and the maximum power point is located by
golden-section search. The hot loops live in :mod:`pvtwin.kernels`.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np

from . import kernels
from .errors import ConfigurationError, DegenerateConditionsError, InputError, NumericalError

G_STC = 1000.0
T_STC = 25.0
KELVIN = 273.15
BOLTZMANN_EV = 8.617333262e-5  # eV/K
RESIDUAL_TOL = 1e-9


def _load_json(name_or_path):
    if str(name_or_path).endswith(".json") and "/" in str(name_or_path):
        with open(name_or_path) as fh:
            return json.load(fh)
    text = resources.files("pvtwin.data").joinpath(f"{name_or_path}.json").read_text()
    return json.loads(text)


def _from_mapping(cls, data):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names - {"source"}
    if unknown:
        raise ConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**{k: v for k, v in data.items() if k in names})


@dataclass(frozen=True)
class ModuleParams:
    """Five-parameter CEC description of one PV module plus datasheet extras."""

    alpha_sc: float
    a_ref: float
    I_L_ref: float
    I_o_ref: float
    R_sh_ref: float
    R_s: float
    adjust: float
    Eg_ref: float = 1.121
    dEgdT: float = -0.0002677
    gamma_pmp: float = -0.0036
    cells_in_series: int = 72
    area: float = 2.0
    T_NOCT: float = 45.0
    name: str = ""

    def __post_init__(self):
        if not self.I_L_ref > 0:
            raise InputError("I_L_ref must be positive")
        if not self.I_o_ref > 0:
            raise InputError("I_o_ref must be positive")
        if not self.R_s >= 0:
            raise InputError("R_s must be non-negative")
        if not self.R_sh_ref > 0:
            raise InputError("R_sh_ref must be positive")
        if not self.a_ref > 0:
            raise InputError("a_ref must be positive")
        if not 0 <= self.adjust <= 100:
            raise InputError("adjust must lie in [0, 100]")

    @classmethod
    def load(cls, name_or_path="module_lg400n2w_a5"):
        """Load a bundled parameter set by name, or a JSON file by path."""
        return _from_mapping(cls, _load_json(name_or_path))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class OperatingConditions:
    """Effective plane-of-array irradiance (W/m2) and cell temperature (C)."""

    G: float
    T_cell: float

    def __post_init__(self):
        if np.any(np.asarray(self.G) < 0) or np.any(np.isnan(self.G)):
            raise InputError("irradiance G must be non-negative")


@dataclass(frozen=True)
class DiodeParams:
    I_L: float
    I_o: float
    a: float
    R_s: float
    R_sh: float

    def __post_init__(self):
        for name in ("I_L", "I_o", "a", "R_sh"):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise InputError(f"{name} must be strictly positive")
        if not np.all(np.asarray(self.R_s) >= 0):
            raise InputError("R_s must be non-negative")


@dataclass(frozen=True)
class MPPResult:
    """Operating point at maximum power plus the curve end points."""

    V: float
    I: float
    P: float
    V_oc: float
    I_sc: float


@dataclass(frozen=True)
class InverterParams:
    """Sandia inverter model coefficients."""

    P_AC0: float
    P_DC0: float
    V_DC0: float
    P_S0: float
    C0: float
    C1: float
    C2: float
    C3: float
    V_AC: float = 480.0
    mppt_low: float = 0.0
    mppt_high: float = float("inf")
    name: str = ""

    def __post_init__(self):
        if not self.P_AC0 > 0:
            raise InputError("P_AC0 must be positive")
        if not self.P_DC0 > self.P_S0 >= 0:
            raise InputError("require P_DC0 > P_S0 >= 0")
        if not self.V_DC0 > 0:
            raise InputError("V_DC0 must be positive")

    @classmethod
    def load(cls, name_or_path="inverter_trio_50"):
        return _from_mapping(cls, _load_json(name_or_path))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ArrayConfig:
    modules_per_string: int
    strings: int

    def __post_init__(self):
        if self.modules_per_string < 1 or self.strings < 1:
            raise InputError("modules_per_string and strings must be >= 1")

    @property
    def n_modules(self):
        return self.modules_per_string * self.strings


def adjust_alpha(params: ModuleParams):
    """Short-circuit temperature coefficient after the CEC adjustment."""
    return params.alpha_sc * (1.0 - params.adjust / 100.0)


def photocurrent(params: ModuleParams, cond: OperatingConditions):
    """Light-generated current, proportional to irradiance."""
    G = np.asarray(cond.G, dtype=float)
    out = G / G_STC * (params.I_L_ref + adjust_alpha(params) * (np.asarray(cond.T_cell) - T_STC))
    return out if out.ndim else float(out)


def translate_params(params: ModuleParams, cond: OperatingConditions) -> DiodeParams:
    """Diode parameters at the given irradiance and cell temperature.

    Raises
    ------
    DegenerateConditionsError
        If any irradiance is zero; callers treat those points as dark.
    """
    G = np.asarray(cond.G, dtype=float)
    if np.any(G <= 0):
        raise DegenerateConditionsError("translate_params requires G > 0")
    T_K = np.asarray(cond.T_cell, dtype=float) + KELVIN
    Tref_K = T_STC + KELVIN
    dT = T_K - Tref_K
    Eg = params.Eg_ref * (1.0 + params.dEgdT * dT)
    I_o = params.I_o_ref * (T_K / Tref_K) ** 3 * np.exp(
        params.Eg_ref / (BOLTZMANN_EV * Tref_K) - Eg / (BOLTZMANN_EV * T_K))
    a = params.a_ref * T_K / Tref_K
    R_sh = params.R_sh_ref * G_STC / G
    I_L = photocurrent(params, cond)

    def _out(x):
        x = np.asarray(x, dtype=float)
        return x if x.ndim else float(x)

    R_s = params.R_s if np.ndim(G) == 0 else np.full(G.shape, params.R_s)
    return DiodeParams(_out(I_L), _out(I_o), _out(a), R_s, _out(R_sh))


def diode_residual(V, I, dp: DiodeParams):
    """Residual of the implicit single-diode equation, in amperes."""
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    vd = V + I * dp.R_s
    return dp.I_L - dp.I_o * np.expm1(vd / dp.a) - vd / dp.R_sh - I


def current_at(V, dp: DiodeParams):
    """Terminal current at voltage ``V``."""
    out = kernels.i_from_v(V, dp.I_L, dp.I_o, dp.a, dp.R_s, dp.R_sh)
    return out if out.ndim else float(out)


def solve_single_diode(dp: DiodeParams) -> MPPResult:
    """Maximum power point, open-circuit voltage and short-circuit current.

    Raises
    ------
    NumericalError
        If any solution is non-finite or violates the residual tolerance.
    """
    vmp, imp, pmp, voc, isc = kernels.mpp(dp.I_L, dp.I_o, dp.a, dp.R_s, dp.R_sh)
    checks = [
        np.abs(diode_residual(vmp, imp, dp)),
        np.abs(diode_residual(voc, 0.0, dp)),
        np.abs(diode_residual(0.0, isc, dp)),
    ]
    worst = np.maximum.reduce([np.broadcast_to(c, np.shape(vmp)) for c in checks])
    bad = ~np.isfinite(pmp) | ~(worst <= RESIDUAL_TOL)
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))[:5].tolist()
        finite = worst[np.isfinite(worst)]
        raise NumericalError("single-diode solve did not converge", indices=idx,
                             max_residual=float(finite.max()) if finite.size else float("nan"))
    out = [x if np.ndim(x) else float(x) for x in (vmp, imp, pmp, voc, isc)]
    return MPPResult(*out)


def scale_to_array(mpp: MPPResult, cfg: ArrayConfig) -> MPPResult:
    """Series modules add voltage, parallel strings add current."""
    ns, npar = cfg.modules_per_string, cfg.strings
    return MPPResult(V=mpp.V * ns, I=mpp.I * npar, P=mpp.P * ns * npar,
                     V_oc=mpp.V_oc * ns, I_sc=mpp.I_sc * npar)


def module_dc(params: ModuleParams, G, T_cell) -> MPPResult:
    """Module MPP over arrays of conditions; dark points give zeros."""
    G = np.atleast_1d(np.asarray(G, dtype=float))
    T = np.broadcast_to(np.asarray(T_cell, dtype=float), G.shape)
    if np.any(G < 0) or np.any(~np.isfinite(G)):
        raise InputError("irradiance must be finite and non-negative")
    out = [np.zeros(G.shape) for _ in range(5)]
    lit = G > 0
    if np.any(lit):
        dp = translate_params(params, OperatingConditions(G[lit], T[lit]))
        res = solve_single_diode(dp)
        for k, v in enumerate((res.V, res.I, res.P, res.V_oc, res.I_sc)):
            out[k][lit] = v
    return MPPResult(*out)


def snl_coefficients(V_DC, inv: InverterParams):
    """Voltage-dependent Sandia coefficients ``(A, B, C)``."""
    dv = np.asarray(V_DC, dtype=float) - inv.V_DC0
    A = inv.P_DC0 * (1.0 + inv.C1 * dv)
    B = inv.P_S0 * (1.0 + inv.C2 * dv)
    C = inv.C0 * (1.0 + inv.C3 * dv)
    return A, B, C


def snl_ac_power(P_DC, V_DC, inv: InverterParams):
    """AC output of the Sandia inverter model.

    Output is zero at or below the startup power ``B`` and clipped at
    ``P_AC0``.
    """
    P_DC = np.asarray(P_DC, dtype=float)
    V_DC = np.asarray(V_DC, dtype=float)
    if np.any(P_DC < 0) or np.any(V_DC < 0):
        raise InputError("P_DC and V_DC must be non-negative")
    A, B, C = snl_coefficients(V_DC, inv)
    span = A - B
    if np.any(span == 0):
        raise NumericalError("inverter coefficients give A == B", V_DC=float(np.ravel(V_DC)[0]))
    x = P_DC - B
    raw = (inv.P_AC0 / span - C * span) * x + C * x * x
    out = np.where(x <= 0, 0.0, np.clip(raw, 0.0, inv.P_AC0))
    return out if out.ndim else float(out)
