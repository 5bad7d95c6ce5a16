"""Closed-form propagation quantities and environment parameter catalogs.

Everything in this module is a pure function of its inputs: free-space
(Friis) reception power, surface refractivity from the effective earth
curvature, single knife-edge diffraction, Okumura-Hata open-space loss,
and lookups into the terrain / climate / ground-electrical parameter
tables used to configure irregular-terrain propagation tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite, log, log10, pi, sqrt

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Effective earth curvature factor for normal atmospheric conditions (4/3 earth).
EFFECTIVE_EARTH_CURVATURE = 1.333

# Okumura-Hata nominal validity band; outside it the formula is still evaluated
# but results carry a warning flag.
HATA_NOMINAL_BAND_MHZ = (150.0, 1500.0)
HATA_MAX_DISTANCE_KM = 20.0

# Knife-edge diffraction approximation constants (ITU-R P.526 single edge).
KNIFE_EDGE_CUTOFF = -0.78


def wavelength_m(f_mhz: float) -> float:
    """Wavelength in meters for a frequency in MHz."""
    if f_mhz <= 0:
        raise ValueError(f"frequency must be positive, got {f_mhz} MHz")
    return SPEED_OF_LIGHT / (f_mhz * 1e6)


@dataclass(frozen=True)
class AntennaLink:
    """A point-to-point link in linear units.

    Attributes:
        p_tx: transmit power in watts
        g_tx: transmit antenna gain, dimensionless
        g_rx: receive antenna gain, dimensionless
        f: carrier frequency in MHz
        d: path distance in meters
    """

    p_tx: float
    g_tx: float
    g_rx: float
    f: float
    d: float

    def __post_init__(self):
        if self.p_tx <= 0:
            raise ValueError(f"p_tx must be positive, got {self.p_tx}")
        if self.g_tx < 0 or self.g_rx < 0:
            raise ValueError("antenna gains must be non-negative")
        if self.f <= 0:
            raise ValueError(f"frequency must be positive, got {self.f} MHz")
        if self.d <= 0:
            raise ValueError(f"distance must be positive, got {self.d} m")


@dataclass(frozen=True)
class ObstaclePath:
    """Geometry of a single knife-edge obstruction.

    Attributes:
        h_obs: obstacle height above the direct ray in meters (negative when
            the edge is below the line of sight)
        d1: distance from one path end to the obstacle top, meters
        d2: distance from the other path end to the obstacle top, meters
        f: carrier frequency in MHz
    """

    h_obs: float
    d1: float
    d2: float
    f: float

    def __post_init__(self):
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("d1 and d2 must be positive")
        if self.f <= 0:
            raise ValueError(f"frequency must be positive, got {self.f} MHz")


@dataclass(frozen=True)
class HataLink:
    """Inputs to the Okumura-Hata open-space loss formula.

    Attributes:
        f: frequency in MHz
        h1: base-station antenna height in meters
        h2: mobile antenna height in meters
        d: distance in kilometers (valid up to 20 km)
    """

    f: float
    h1: float
    h2: float
    d: float

    def __post_init__(self):
        if self.f <= 0:
            raise ValueError(f"frequency must be positive, got {self.f} MHz")
        if self.h1 <= 0 or self.h2 <= 0:
            raise ValueError("antenna heights must be positive")
        if not 0 < self.d <= HATA_MAX_DISTANCE_KM:
            raise ValueError(
                f"distance must be in (0, {HATA_MAX_DISTANCE_KM}] km, got {self.d}"
            )


@dataclass(frozen=True)
class HataResult:
    """Okumura-Hata loss plus a non-fatal validity flag."""

    loss_db: float
    outside_nominal_frequency: bool


@dataclass(frozen=True)
class TerrainClass:
    label: str
    dh_min_m: float
    dh_max_m: float


@dataclass(frozen=True)
class ClimateClass:
    label: str
    n_s: float


@dataclass(frozen=True)
class GroundClass:
    label: str
    permittivity: float
    conductivity_s_per_m: float


# Terrain irregularity classes: label and the dh interval (meters) that
# characterizes each. The published intervals are non-contiguous, so lookup is
# by label only; no reverse classification from a dh value.
TERRAIN_CLASSES = (
    TerrainClass("Water or flat surface", 0.0, 10.0),
    TerrainClass("Flat surface", 10.0, 20.0),
    TerrainClass("Lightly irregular surface", 40.0, 60.0),
    TerrainClass("Hills", 80.0, 150.0),
    TerrainClass("Mountains", 200.0, 500.0),
)

# Climate classes and their surface refractivity in N-units.
CLIMATE_CLASSES = (
    ClimateClass("Equatorial", 360.0),
    ClimateClass("Continental Subtropical", 320.0),
    ClimateClass("Marine Subtropical", 370.0),
    ClimateClass("Desert", 280.0),
    ClimateClass("Template", 301.0),
    ClimateClass("Marine template, upon earth", 320.0),
    ClimateClass("Marine template, upon water", 350.0),
)

# Ground electrical constants: relative permittivity and conductivity (S/m).
GROUND_CLASSES = (
    GroundClass("Medium Earth", 15.0, 0.005),
    GroundClass("Poor Earth", 4.0, 0.001),
    GroundClass("Rich Earth", 25.0, 0.02),
    GroundClass("Fresh water", 81.0, 0.010),
    GroundClass("Sea water", 81.0, 5.0),
)


@dataclass(frozen=True)
class EnvironmentCatalog:
    """Immutable lookup tables of terrain, climate and ground parameters."""

    terrain_classes: tuple = TERRAIN_CLASSES
    climate_classes: tuple = CLIMATE_CLASSES
    ground_classes: tuple = GROUND_CLASSES

    def lookup(self, label: str, kind: str):
        """Resolve a catalog row by label.

        Args:
            label: row label, matched case-insensitively
            kind: one of "terrain", "climate", "ground"

        Raises:
            LookupError: unknown label (message lists the valid ones)
            ValueError: unknown kind
        """
        tables = {
            "terrain": self.terrain_classes,
            "climate": self.climate_classes,
            "ground": self.ground_classes,
        }
        if kind not in tables:
            raise ValueError(f"kind must be one of {sorted(tables)}, got {kind!r}")
        rows = tables[kind]
        wanted = label.strip().lower()
        for row in rows:
            if row.label.lower() == wanted:
                return row
        valid = ", ".join(row.label for row in rows)
        raise LookupError(f"unknown {kind} label {label!r}; valid labels: {valid}")


DEFAULT_CATALOG = EnvironmentCatalog()


def lookup_environment(label: str, kind: str):
    """Resolve a row of the default environment catalog by label."""
    return DEFAULT_CATALOG.lookup(label, kind)


def friis_received_power(link: AntennaLink) -> float:
    """Free-space received power in watts.

    Args:
        link: link description in linear units

    Returns:
        p_tx * g_tx * g_rx * lambda^2 / ((4 pi)^2 d^2)
    """
    lam = wavelength_m(link.f)
    return link.p_tx * link.g_tx * link.g_rx * lam**2 / ((4.0 * pi) ** 2 * link.d**2)


def free_space_loss_db(f_mhz: float, d_m: float) -> float:
    """Free-space path loss in dB (unit-gain Friis ratio)."""
    if d_m <= 0:
        raise ValueError(f"distance must be positive, got {d_m} m")
    lam = wavelength_m(f_mhz)
    return 20.0 * log10(4.0 * pi * d_m / lam)


def surface_refractivity(k: float) -> float:
    """Surface refractivity N_s (N-units) from the effective curvature factor.

    Args:
        k: effective earth curvature factor, must exceed 1

    Returns:
        179.3 * ln((1 - 1/k) / 0.046665)
    """
    if k <= 1:
        raise ValueError(f"curvature factor must exceed 1, got {k}")
    return 179.3 * log((1.0 - 1.0 / k) / 0.046665)


def knife_edge_parameter(path: ObstaclePath) -> float:
    """Dimensionless diffraction parameter of a single knife edge.

    The sign of the result follows the sign of the obstacle height: negative
    when the edge is below the direct ray.
    """
    lam = wavelength_m(path.f)
    return path.h_obs * sqrt((2.0 / lam) * (1.0 / path.d1 + 1.0 / path.d2))


def knife_edge_loss(nu: float) -> float:
    """Excess diffraction loss in dB for a single knife edge.

    Uses the standard single-edge approximation: zero loss below the cutoff
    at nu = -0.78, otherwise 6.9 + 20 log10(sqrt((nu-0.1)^2 + 1) + nu - 0.1).
    """
    if not isfinite(nu):
        raise ValueError(f"diffraction parameter must be finite, got {nu}")
    if nu <= KNIFE_EDGE_CUTOFF:
        return 0.0
    return 6.9 + 20.0 * log10(sqrt((nu - 0.1) ** 2 + 1.0) + nu - 0.1)


def hata_loss(link: HataLink, mobile_correction: str = "small-medium") -> HataResult:
    """Okumura-Hata open-space loss in dB.

    Args:
        link: frequency, antenna heights and distance
        mobile_correction: mobile-antenna correction mode, "small-medium"
            (small/medium city, the default) or "large" (large city)

    Returns:
        HataResult with the loss and a flag set when the frequency lies
        outside the model's nominal 150-1500 MHz validity band. The formula
        is still evaluated in that case; callers decide how to treat it.
    """
    f, h1, h2, d = link.f, link.h1, link.h2, link.d
    if mobile_correction == "small-medium":
        a_h2 = (1.1 * log10(f) - 0.7) * h2 - (1.56 * log10(f) - 0.8)
    elif mobile_correction == "large":
        if f >= 300.0:
            a_h2 = 3.2 * log10(11.75 * h2) ** 2 - 4.97
        else:
            a_h2 = 8.29 * log10(1.54 * h2) ** 2 - 1.1
    else:
        raise ValueError(
            f"mobile_correction must be 'small-medium' or 'large', got {mobile_correction!r}"
        )
    loss = (
        69.55
        + 26.16 * log10(f)
        - 13.82 * log10(h1)
        - a_h2
        + (44.9 - 6.55 * log10(h1)) * log10(d)
    )
    low, high = HATA_NOMINAL_BAND_MHZ
    return HataResult(loss_db=loss, outside_nominal_frequency=not low <= f <= high)
