"""Link budget and attenuation physics for a 130-150 GHz point-to-point link.

Covers free-space path loss, table-driven gaseous absorption, ITU-R P.838-3
rain scattering (horizontal polarization), and a Mie-scattering snow model:
snowflake dielectric from an ice/water mixing rule, extinction efficiency
from the Mie series, flake population from a Gunn-Marshall size distribution
plus a beam-occupancy count driven by the snowfall rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy.interpolate import RegularGridInterpolator

C_LIGHT_M_S = 299_792_458.0

GAS_TABLE_RESOURCE = "gas_attenuation_100_200ghz_v1.npz"

# Calibrated snowflake liquid-water fraction: single knob tuned so the snow
# model reproduces the campaign-scale excess loss at the mean snowfall rate
# (see tools/calibrate_snow_wetness.py).
DEFAULT_SNOW_WETNESS = 0.45

# Bundled dielectric constants near 140 GHz (overridable): ice is flat across
# mm-waves; water follows a double-Debye evaluation near 0 degC.
DIELECTRIC_ICE_140GHZ = 3.15 + 0.005j
DIELECTRIC_WATER_140GHZ = 5.8 + 8.0j


@dataclass(frozen=True)
class WeatherState:
    """One atmospheric reading driving the channel attenuation models."""

    temperature_c: float
    water_vapor_g_m3: float
    pressure_hpa: float
    precipitation_rate_mm_hr: float = 0.0
    precipitation_kind: str = "none"
    timestamp_s: float = 0.0

    def __post_init__(self):
        if self.pressure_hpa <= 0:
            raise ValueError("pressure must be positive")
        if self.water_vapor_g_m3 < 0:
            raise ValueError("water vapor density must be non-negative")
        if self.precipitation_rate_mm_hr < 0:
            raise ValueError("precipitation rate must be non-negative")
        if self.precipitation_kind not in ("none", "rain", "snow"):
            raise ValueError(f"unknown precipitation kind "
                             f"{self.precipitation_kind!r}")


@dataclass(frozen=True)
class LinkBudget:
    """Gain/loss ledger inputs for the received-power model."""

    tx_power_dbm: float = 16.0
    tx_gain_dbi: float = 38.0
    rx_gain_dbi: float = 38.0
    hw_gain_db: float = 0.0
    hw_loss_db: float = 0.0
    distance_m: float = 70.0
    center_frequency_hz: float = 140e9

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance must be positive")
        if self.center_frequency_hz <= 0:
            raise ValueError("center frequency must be positive")

    @property
    def eirp_dbm(self) -> float:
        return self.tx_power_dbm + self.tx_gain_dbi


def _default_bins() -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.05, 3.0, 60)
    centers = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    return centers, widths


@dataclass(frozen=True, eq=False)
class SnowModelParams:
    """Physical inputs of the snow scattering model.

    Radii are melted-equivalent in mm; the scattering sphere uses the
    geometric flake radius obtained via the bulk snow density.  wetness is
    the liquid-water volume fraction of a flake and acts as the model's
    single calibration knob.
    """

    density_g_cm3: float = 0.52
    terminal_velocity_m_s: float = 1.5
    flake_mass_mg: float = 2.5
    beam_diameter_m: float = 0.122
    link_length_m: float = 70.0
    wetness: float = DEFAULT_SNOW_WETNESS
    dielectric_ice: complex = DIELECTRIC_ICE_140GHZ
    dielectric_water: complex = DIELECTRIC_WATER_140GHZ
    bin_radii_mm: np.ndarray = field(default_factory=lambda: _default_bins()[0])
    bin_widths_mm: np.ndarray = field(default_factory=lambda: _default_bins()[1])

    def __post_init__(self):
        for name in ("density_g_cm3", "terminal_velocity_m_s", "flake_mass_mg",
                     "beam_diameter_m", "link_length_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.wetness <= 1.0:
            raise ValueError("wetness must lie in [0, 1]")
        radii = np.ascontiguousarray(self.bin_radii_mm, dtype=np.float64)
        widths = np.ascontiguousarray(self.bin_widths_mm, dtype=np.float64)
        if radii.size == 0:
            raise ValueError("size bins must be non-empty")
        if radii.shape != widths.shape:
            raise ValueError("bin radii and widths must match")
        if np.any(radii <= 0) or np.any(widths <= 0):
            raise ValueError("bin radii and widths must be positive")
        if radii.size > 1 and np.any(np.diff(radii) <= 0):
            raise ValueError("bin radii must be strictly increasing")
        radii.setflags(write=False)
        widths.setflags(write=False)
        object.__setattr__(self, "bin_radii_mm", radii)
        object.__setattr__(self, "bin_widths_mm", widths)


def fspl(frequency_hz: float, distance_m: float) -> float:
    """Free-space path loss in dB between isotropic antennas."""
    if frequency_hz <= 0 or distance_m <= 0:
        raise ValueError("frequency and distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / C_LIGHT_M_S)


class GasAttenuationTable:
    """Bundled specific-attenuation grid over (f, T, water vapor, pressure).

    The grid is precomputed by tools/gen_gas_table.py from a reduced
    line-set Van Vleck-Weisskopf model (O2 118.75 GHz line, H2O 183.31 GHz
    line, empirical dry/wet continua) covering 100-200 GHz.
    """

    def __init__(self, freq_ghz, temp_c, vapor_g_m3, pressure_hpa, gamma_db_km):
        self.freq_ghz = np.asarray(freq_ghz, dtype=np.float64)
        self.temp_c = np.asarray(temp_c, dtype=np.float64)
        self.vapor_g_m3 = np.asarray(vapor_g_m3, dtype=np.float64)
        self.pressure_hpa = np.asarray(pressure_hpa, dtype=np.float64)
        self._interp = RegularGridInterpolator(
            (self.freq_ghz, self.temp_c, self.vapor_g_m3, self.pressure_hpa),
            np.asarray(gamma_db_km, dtype=np.float64),
            method="linear", bounds_error=True)

    @classmethod
    def bundled(cls) -> "GasAttenuationTable":
        ref = resources.files("thzsounder") / "data" / GAS_TABLE_RESOURCE
        with ref.open("rb") as fh:
            data = np.load(fh)
            return cls(data["freq_ghz"], data["temp_c"], data["vapor_g_m3"],
                       data["pressure_hpa"], data["gamma_db_km"])

    def specific_attenuation_db_km(self, frequency_hz: float,
                                   state: WeatherState) -> float:
        f_ghz = frequency_hz / 1e9
        if not self.freq_ghz[0] <= f_ghz <= self.freq_ghz[-1]:
            raise ValueError(
                f"frequency {f_ghz:.3f} GHz outside the gas table coverage "
                f"[{self.freq_ghz[0]:.0f}, {self.freq_ghz[-1]:.0f}] GHz")
        point = (f_ghz,
                 float(np.clip(state.temperature_c, self.temp_c[0], self.temp_c[-1])),
                 float(np.clip(state.water_vapor_g_m3, self.vapor_g_m3[0],
                               self.vapor_g_m3[-1])),
                 float(np.clip(state.pressure_hpa, self.pressure_hpa[0],
                               self.pressure_hpa[-1])))
        return float(self._interp(point))


_BUNDLED_GAS_TABLE: GasAttenuationTable | None = None


def _gas_table() -> GasAttenuationTable:
    global _BUNDLED_GAS_TABLE
    if _BUNDLED_GAS_TABLE is None:
        _BUNDLED_GAS_TABLE = GasAttenuationTable.bundled()
    return _BUNDLED_GAS_TABLE


def gas_attenuation(state: WeatherState, frequency_hz: float, distance_m: float,
                    table: GasAttenuationTable | None = None) -> float:
    """Molecular absorption loss in dB over the path."""
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    table = table or _gas_table()
    gamma = table.specific_attenuation_db_km(frequency_hz, state)
    return gamma * distance_m / 1000.0


# ITU-R P.838-3 horizontal-polarization fitting coefficients for the rain
# specific-attenuation power law gamma = k * R**alpha.
_P838_KH = (
    np.array([-5.33980, -0.35351, -0.23789, -0.94158]),  # a_j
    np.array([-0.10008, 1.26970, 0.86036, 0.64552]),     # b_j
    np.array([1.13098, 0.45400, 0.15354, 0.16817]),      # c_j
    -0.18961, 0.71147)                                    # m_k, c_k
_P838_AH = (
    np.array([-0.14318, 0.29591, 0.32177, -5.37610, 16.17210]),
    np.array([1.82442, 0.77564, 0.63773, -0.96230, -3.29980]),
    np.array([-0.55187, 0.19822, 0.13164, 1.47828, 3.43990]),
    0.67849, -1.95537)


def rain_coefficients(frequency_hz: float) -> tuple[float, float]:
    """(k, alpha) for horizontal polarization at the given frequency."""
    f_ghz = frequency_hz / 1e9
    if not 1.0 <= f_ghz <= 1000.0:
        raise ValueError("rain coefficients are defined for 1-1000 GHz")
    logf = math.log10(f_ghz)
    aj, bj, cj, mk, ck = _P838_KH
    log_k = float(np.dot(aj, np.exp(-(((logf - bj) / cj) ** 2)))) + mk * logf + ck
    k = 10.0 ** log_k
    aj, bj, cj, ma, ca = _P838_AH
    alpha = float(np.dot(aj, np.exp(-(((logf - bj) / cj) ** 2)))) + ma * logf + ca
    return k, alpha


def rain_attenuation(rate_mm_hr: float, frequency_hz: float,
                     distance_m: float) -> float:
    """Rain scattering loss in dB over the path (k * R**alpha per km)."""
    if rate_mm_hr < 0:
        raise ValueError("rain rate must be non-negative")
    if rate_mm_hr == 0.0:
        return 0.0
    k, alpha = rain_coefficients(frequency_hz)
    return k * rate_mm_hr ** alpha * distance_m / 1000.0


def debye_mixture(eps_ice: complex, eps_water: complex, wetness: float) -> complex:
    """Effective dielectric constant of an ice/water mixture.

    Volume-fraction mixing of the Clausius-Mossotti factors (Debye mixing
    rule); continuous and monotone along the mixing path with exact
    endpoints at wetness 0 (ice) and 1 (water).
    """
    if not 0.0 <= wetness <= 1.0:
        raise ValueError("wetness must lie in [0, 1]")
    if wetness == 0.0:
        return complex(eps_ice)
    if wetness == 1.0:
        return complex(eps_water)
    q = (wetness * (eps_water - 1.0) / (eps_water + 2.0)
         + (1.0 - wetness) * (eps_ice - 1.0) / (eps_ice + 2.0))
    return (1.0 + 2.0 * q) / (1.0 - q)


def mie_extinction(refractive_index: complex, size_parameter: float) -> float:
    """Extinction efficiency Q_ext of a homogeneous sphere.

    Standard Mie series with logarithmic-derivative downward recurrence,
    truncated at ceil(chi + 4*chi^(1/3) + 2).  The absorbing branch uses
    Im(n) >= 0.
    """
    chi = float(size_parameter)
    if chi <= 0:
        raise ValueError("size parameter must be positive")
    m = complex(refractive_index)
    if m.imag < 0:
        raise ValueError("refractive index must have Im(n) >= 0")
    nstop = int(math.ceil(chi + 4.0 * chi ** (1.0 / 3.0) + 2.0))
    nmx = max(nstop, int(math.ceil(abs(m * chi)))) + 16

    d = np.zeros(nmx + 1, dtype=np.complex128)
    mx = m * chi
    for i in range(nmx, 0, -1):
        ri = i / mx
        d[i - 1] = ri - 1.0 / (d[i] + ri)

    psi_nm2, psi_nm1 = math.cos(chi), math.sin(chi)      # psi_{-1}, psi_0
    chi_nm2, chi_nm1 = -math.sin(chi), math.cos(chi)     # chi_{-1}, chi_0
    qext = 0.0
    for n in range(1, nstop + 1):
        psi_n = (2.0 * n - 1.0) / chi * psi_nm1 - psi_nm2
        chi_n = (2.0 * n - 1.0) / chi * chi_nm1 - chi_nm2
        xi_n = complex(psi_n, -chi_n)
        xi_nm1 = complex(psi_nm1, -chi_nm1)
        da = d[n] / m + n / chi
        db = d[n] * m + n / chi
        a_n = (da * psi_n - psi_nm1) / (da * xi_n - xi_nm1)
        b_n = (db * psi_n - psi_nm1) / (db * xi_n - xi_nm1)
        term = (2.0 * n + 1.0) * (a_n + b_n).real
        if not math.isfinite(term):
            raise ArithmeticError(
                f"Mie series failed to converge at order {n} "
                f"(n={m}, chi={chi})")
        qext += term
        psi_nm2, psi_nm1 = psi_nm1, psi_n
        chi_nm2, chi_nm1 = chi_nm1, chi_n
    return 2.0 / (chi * chi) * qext


def snowflake_count(rate_mm_hr: float, params: SnowModelParams) -> float:
    """Expected number of snowflakes inside the antenna beam volume.

    F = R * (pi/14.4) * (D^2 * H * rho) / (v * m) with R in mm/hr, beam
    diameter D and link length H in m, bulk density rho in g/cm^3, fall
    speed v in m/s and flake mass m in mg; the 1e3 factor closes the unit
    conversion chain.
    """
    if rate_mm_hr < 0:
        raise ValueError("snowfall rate must be non-negative")
    p = params
    return (rate_mm_hr * (math.pi / 14.4)
            * (p.beam_diameter_m ** 2 * p.link_length_m * p.density_g_cm3)
            / (p.terminal_velocity_m_s * p.flake_mass_mg) * 1e3)


def gunn_marshall_density(radius_mm: np.ndarray, rate_mm_hr: float) -> np.ndarray:
    """Gunn-Marshall flake size distribution N(r) in m^-3 mm^-1.

    Exponential in melted-equivalent diameter D = 2r with
    N0 = 3.8e3 * R^-0.87 m^-3 mm^-1 and Lambda = 25.5 * R^-0.48 cm^-1.
    """
    if rate_mm_hr <= 0:
        return np.zeros_like(np.asarray(radius_mm, dtype=np.float64))
    n0 = 3.8e3 * rate_mm_hr ** -0.87
    lam_per_mm = 2.55 * rate_mm_hr ** -0.48
    return n0 * np.exp(-lam_per_mm * 2.0 * np.asarray(radius_mm, dtype=np.float64))


def snow_attenuation(rate_mm_hr: float, params: SnowModelParams,
                     frequency_hz: float) -> float:
    """Snow scattering loss in dB for the whole link.

    Binned sum of Mie extinction cross-sections over the Gunn-Marshall size
    distribution, scaled by the beam snowflake count:
    L = 4.343e3 * sum_j sigma_ext(r_j) N(r_j, R) r_j dr_j * F(R).
    Zero when the rate is zero.
    """
    if rate_mm_hr < 0:
        raise ValueError("snowfall rate must be non-negative")
    if rate_mm_hr == 0.0:
        return 0.0
    lam_mm = C_LIGHT_M_S / frequency_hz * 1e3
    eps = debye_mixture(params.dielectric_ice, params.dielectric_water,
                        params.wetness)
    n = complex(np.sqrt(complex(eps)))
    if n.imag < 0:
        n = -n
    geometric_scale = (1.0 / params.density_g_cm3) ** (1.0 / 3.0)

    radii = params.bin_radii_mm
    widths = params.bin_widths_mm
    density = gunn_marshall_density(radii, rate_mm_hr)
    total = 0.0
    for r, dr, nr in zip(radii, widths, density):
        r_geo = geometric_scale * r
        q_ext = mie_extinction(n, 2.0 * math.pi * r_geo / lam_mm)
        sigma_m2 = q_ext * math.pi * (r_geo * 1e-3) ** 2
        total += sigma_m2 * nr * r * dr
    return 4.343e3 * total * snowflake_count(rate_mm_hr, params)


@dataclass(frozen=True)
class LinkBudgetResult:
    """Per-term received-power ledger; all terms in dB/dBm."""

    tx_power_dbm: float
    tx_gain_dbi: float
    rx_gain_dbi: float
    hw_gain_db: float
    hw_loss_db: float
    fspl_db: float
    gas_db: float
    scatter_db: float

    @property
    def received_dbm(self) -> float:
        return (self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi
                + self.hw_gain_db - self.hw_loss_db - self.fspl_db
                - self.gas_db - self.scatter_db)

    @property
    def eirp_dbm(self) -> float:
        return self.tx_power_dbm + self.tx_gain_dbi

    def terms(self) -> dict[str, float]:
        return {
            "tx_power_dbm": self.tx_power_dbm,
            "tx_gain_dbi": self.tx_gain_dbi,
            "rx_gain_dbi": self.rx_gain_dbi,
            "hw_gain_db": self.hw_gain_db,
            "hw_loss_db": -self.hw_loss_db,
            "fspl_db": -self.fspl_db,
            "gas_db": -self.gas_db,
            "scatter_db": -self.scatter_db,
        }


def link_budget_eval(budget: LinkBudget, state: WeatherState,
                     snow_params: SnowModelParams | None = None,
                     gas_table: GasAttenuationTable | None = None
                     ) -> LinkBudgetResult:
    """Evaluate the received-power ledger for one weather reading.

    The scattering term dispatches on the precipitation kind; the snow
    model's link length follows the budget distance.
    """
    f = budget.center_frequency_hz
    d = budget.distance_m
    loss_gas = gas_attenuation(state, f, d, table=gas_table)
    if state.precipitation_kind == "rain":
        loss_sc = rain_attenuation(state.precipitation_rate_mm_hr, f, d)
    elif state.precipitation_kind == "snow":
        params = snow_params or SnowModelParams(link_length_m=d)
        if params.link_length_m != d:
            params = replace(params, link_length_m=d)
        loss_sc = snow_attenuation(state.precipitation_rate_mm_hr, params, f)
    else:
        loss_sc = 0.0
    return LinkBudgetResult(
        tx_power_dbm=budget.tx_power_dbm,
        tx_gain_dbi=budget.tx_gain_dbi,
        rx_gain_dbi=budget.rx_gain_dbi,
        hw_gain_db=budget.hw_gain_db,
        hw_loss_db=budget.hw_loss_db,
        fspl_db=fspl(f, d),
        gas_db=loss_gas,
        scatter_db=loss_sc)
