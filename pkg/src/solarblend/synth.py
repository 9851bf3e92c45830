"""Seeded synthetic hourly solar dataset with planted day regimes.

Each day draws one of three sky regimes (clear / mixed / overcast); its
GHI profile is clear-sky GHI times an AR(1) clear-sky-index path around
the regime mean. Auxiliary features (irradiance split, weather, image
statistics) are generated consistently with the day's cloudiness so the
recognition stage has signal to work with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date as date_t
from datetime import timedelta

import numpy as np

from .data import (DAY_HOURS, Dataset, DayProfile, HourRecord,
                   haurwitz_clear_sky, solar_zenith_deg)

REGIME_NAMES = ("clear", "mixed", "overcast")


class InvalidConfig(Exception):
    def __init__(self, field_name, detail=""):
        super().__init__(f"invalid config field {field_name!r}: {detail}")
        self.field_name = field_name


@dataclass
class SynthConfig:
    n_days: int = 96
    start: date_t = date_t(2023, 1, 1)
    mix: tuple = (0.4, 0.35, 0.25)
    csi_means: tuple = (0.95, 0.60, 0.25)
    # Stationary CSI spread per regime. Kept tight enough (and the default
    # site equatorial, flattening seasonal amplitude) that the planted
    # regimes are recoverable by clustering on raw W/m^2 profiles.
    csi_vols: tuple = (0.02, 0.08, 0.05)
    # Hour-to-hour CSI persistence per regime. Deliberately heterogeneous:
    # clear days are strongly persistent, mixed days mean-revert quickly,
    # so the optimal transition model differs by regime.
    ar_phi: tuple = (0.9, 0.3, 0.65)
    noise: float = 1.0
    latitude: float = 0.0
    seed: int = 0

    def validate(self):
        if self.n_days < 1:
            raise InvalidConfig("n_days", "must be >= 1")
        if len(self.mix) != 3 or abs(sum(self.mix) - 1.0) > 1e-9 \
                or any(p < 0 for p in self.mix):
            raise InvalidConfig("mix", "three non-negative proportions summing to 1")
        if any(not (0 < m < 1.1) for m in self.csi_means):
            raise InvalidConfig("csi_means", "must lie in (0, 1.1)")
        if any(v < 0 for v in self.csi_vols):
            raise InvalidConfig("csi_vols", "must be non-negative")
        phis = self.ar_phi if isinstance(self.ar_phi, (tuple, list)) \
            else (self.ar_phi,)
        if any(not (0.0 <= p < 1.0) for p in phis):
            raise InvalidConfig("ar_phi", "must lie in [0, 1)")
        if self.noise < 0:
            raise InvalidConfig("noise", "must be non-negative")


def synth_generate(cfg: SynthConfig) -> tuple[Dataset, list[int]]:
    """Generate a dataset and the planted regime label of each day."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    days = []
    planted = []
    for di in range(cfg.n_days):
        date = cfg.start + timedelta(days=di)
        regime = int(rng.choice(3, p=cfg.mix))
        planted.append(regime)
        mean = cfg.csi_means[regime]
        vol = cfg.csi_vols[regime]
        phi = cfg.ar_phi[regime] if isinstance(cfg.ar_phi, (tuple, list)) \
            else float(cfg.ar_phi)
        # innovation scaled so the AR(1) stationary spread equals ``vol``
        innov = vol * math.sqrt(1.0 - phi ** 2)
        csi = mean + vol * rng.standard_normal()
        recs = []
        day_sigma_track = []
        for hour in DAY_HOURS:
            csi = mean + phi * (csi - mean) + innov * rng.standard_normal()
            csi = float(np.clip(csi, 0.0, 1.1))
            doy = date.timetuple().tm_yday
            ghi_clr = haurwitz_clear_sky(cfg.latitude, doy, hour)
            ghi = ghi_clr * csi
            cloud = float(np.clip(1.0 - csi, 0.0, 1.0))
            cos_z = math.cos(math.radians(
                solar_zenith_deg(cfg.latitude, doy, hour)))
            diffuse_frac = float(np.clip(1.05 - csi, 0.15, 1.0))
            dhi = ghi * diffuse_frac
            dni = (ghi - dhi) / max(cos_z, 0.05)
            day_sigma_track.append(vol)
            recs.append(HourRecord(
                date=date, hour=hour,
                ghi=round(ghi, 3), ghi_clr=round(ghi_clr, 3),
                dni=round(max(dni, 0.0), 3), dhi=round(max(dhi, 0.0), 3),
                temp=round(18.0 + 8.0 * math.sin(2 * math.pi * (doy - 80) / 365)
                           + 4.0 * math.sin(math.pi * (hour - 7) / 12)
                           - 5.0 * cloud + cfg.noise * rng.standard_normal(), 3),
                rh=round(float(np.clip(30.0 + 55.0 * cloud
                                       + 5.0 * cfg.noise * rng.standard_normal(),
                                       0.0, 100.0)), 3),
                pres=round(1013.0 + cfg.noise * rng.standard_normal(), 3),
                ws=round(abs(3.0 + cfg.noise * rng.standard_normal()), 3),
                wd=round(float(rng.uniform(0.0, 360.0)) % 360.0, 3),
                img_mu=round(float(np.clip(-0.55 + 0.5 * cloud
                                           + 0.02 * rng.standard_normal(),
                                           -1.0, 1.0)), 5),
                img_sigma=round(float(np.clip(0.03 + 1.2 * vol
                                              + 0.01 * rng.standard_normal(),
                                              0.0, 1.0)), 5),
                img_entropy=round(float(np.clip(0.5 + 12.0 * vol
                                                + 0.05 * rng.standard_normal(),
                                                0.0, math.log(150))), 5),
            ))
        days.append(DayProfile(date, tuple(recs)))
    return Dataset(days=days), planted


def write_dataset_csv(ds: Dataset, path):
    """Serialize a dataset in the documented ingest CSV layout."""
    def fmt(v):
        return "" if v is None else f"{v:.6f}"

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,ghi,ghi_clr,dni,dhi,temp,rh,pres,ws,wd,"
                 "img_mu,img_sigma,img_entropy,image_path\n")
        for day in ds.days:
            for r in day.records:
                fh.write(
                    f"{r.date.isoformat()}T{r.hour:02d}:00:00,"
                    f"{fmt(r.ghi)},{fmt(r.ghi_clr)},{fmt(r.dni)},{fmt(r.dhi)},"
                    f"{fmt(r.temp)},{fmt(r.rh)},{fmt(r.pres)},{fmt(r.ws)},"
                    f"{fmt(r.wd)},{fmt(r.img_mu)},{fmt(r.img_sigma)},"
                    f"{fmt(r.img_entropy)},{r.image_path or ''}\n")


def write_labels_csv(ds: Dataset, labels, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,regime\n")
        for day, lab in zip(ds.days, labels):
            fh.write(f"{day.date.isoformat()},{int(lab)}\n")
