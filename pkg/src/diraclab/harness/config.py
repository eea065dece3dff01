"""Strict experiment configuration.

Flat key-value file with sections (INI syntax).  Unknown sections or keys are
hard errors: silent typos in physics parameters are the top failure mode.
Documented schema:

  [model]     dimension, sigmas (pauli2|dirac3|degenerate2|json:...),
              S (identity|cosine:a), V0 (zero|mass:mu|tabulated:path.npy),
              gal_alpha, gal_beta, gal_profile (box|cos2), gal_support
  [grid]      side, points_per_cell, buffer, backend, wilson_r
  [disorder]  density (edge_beta|uniform), m, M, R, beta_tail, kappa,
              u_profile (cos2_bump|box_bump), u_matrix (identity|spin_up),
              coupling_scale
  [run]       base_seed, samples, workers, out, overwrite
  [estimator] name + estimator-specific keys (see ESTIMATOR_KEYS)
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..disorder import (DisorderModel, SingleSiteProfile, make_disorder_model,
                        profile_preset)
from ..errors import SchemaError
from ..model import (CliffordSet, GalMassSpec, GridBox, ModelSpec, PAULI_3,
                     chi_profile, clifford_preset, coefficient_preset,
                     potential_preset, tabulated_potential)


def _parse_float_list(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _parse_int_list(s):
    return [int(x) for x in s.split(",") if x.strip()]


def _parse_bool(s):
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise SchemaError(f"not a boolean: {s!r}")


def _parse_pairs(s):
    # "0,18;24,0" -> [(0, 18), (24, 0)]
    out = []
    for part in s.split(";"):
        xy = [int(v) for v in part.split(",")]
        if len(xy) % 2:
            raise SchemaError(f"bad point pair {part!r}")
        k = len(xy) // 2
        out.append((tuple(xy[:k]), tuple(xy[k:])))
    return out


MODEL_KEYS = {
    "dimension": int, "sigmas": str, "S": str, "V0": str,
    "gal_alpha": float, "gal_beta": float, "gal_profile": str,
    "gal_support": float,
}
GRID_KEYS = {
    "side": int, "points_per_cell": int, "buffer": int, "backend": str,
    "wilson_r": float,
}
DISORDER_KEYS = {
    "density": str, "m": float, "M": float, "R": float, "beta_tail": float,
    "kappa": float, "u_profile": str, "u_matrix": str, "coupling_scale": float,
}
RUN_KEYS = {
    "base_seed": int, "samples": int, "workers": int, "out": str,
    "overwrite": _parse_bool,
}

ESTIMATOR_KEYS = {
    "gap": {"scan_lo": float, "scan_hi": float, "bins": int},
    "spectrum-scan": {"scan_lo": float, "scan_hi": float, "bins": int,
                      "min_count": int},
    "wegner": {"e0": float, "eta_list": _parse_float_list,
               "l_list": _parse_int_list},
    "decay": {"window_lo": float, "window_hi": float, "max_pairs": int},
    "regularity": {"e_list": _parse_float_list, "l": int, "mass": float},
    "h1": {"e0": float, "l0": int, "theta": float, "nu": float,
           "edge_lo": float, "edge_hi": float},
    "ct": {"e": float, "separations": _parse_float_list, "mode": str,
           "gap_lo": float, "gap_hi": float},
    "bs": {"mu": float, "gap_lo": float, "gap_hi": float, "site_lambda": float},
    "specav": {"trials": int, "dim": int, "j_lo": float, "j_hi": float,
               "quad_points": int},
    "edge": {"delta": float, "scan_lo": float, "scan_hi": float,
             "edge_samples": int},
    "msa": {"l0": int, "alpha": float, "zeta": float, "mass": float,
            "n_scales": int, "i_lo": float, "i_hi": float, "pairs": _parse_pairs,
            "e_points": int},
    "dyn": {"window_lo": float, "window_hi": float, "r": float,
            "t_max": float, "t_points": int, "disordered": _parse_bool},
    "gal-scan": {"alpha_list": _parse_float_list, "beta_list": _parse_float_list,
                 "profile": str, "support": float, "points_per_cell": int,
                 "ab_cap": float},
}

SECTION_KEYS = {"model": MODEL_KEYS, "grid": GRID_KEYS,
                "disorder": DISORDER_KEYS, "run": RUN_KEYS}


@dataclass
class ExperimentConfig:
    estimator: str
    model: dict
    grid: dict
    disorder: Optional[dict]
    run: dict
    params: dict
    source_text: str = ""

    def config_hash(self):
        blob = json.dumps({"estimator": self.estimator, "model": self.model,
                           "grid": self.grid, "disorder": self.disorder,
                           "run": {k: v for k, v in self.run.items()
                                   if k not in ("workers", "out", "overwrite")},
                           "params": self.params}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- object construction ----------------------------------------------

    def clifford(self) -> CliffordSet:
        name = self.model.get("sigmas", "pauli2")
        if name.startswith("json:"):
            raw = json.loads(name[5:])
            sig = tuple(np.array([[complex(re, im) for re, im in row]
                                  for row in mat]) for mat in raw)
            d = len(sig)
            return CliffordSet(d, sig[0].shape[0], sig)
        return clifford_preset(name)

    def model_spec(self) -> ModelSpec:
        cl = self.clifford()
        dim = self.model.get("dimension", cl.dim)
        if dim != cl.dim:
            raise SchemaError("dimension does not match the sigma family")
        s_name = self.model.get("S", "identity")
        v_name = self.model.get("V0", "zero")
        if s_name.startswith("tabulated:"):
            from ..model import tabulated_coefficient
            s_field = tabulated_coefficient(np.load(s_name.split(":", 1)[1]))
        else:
            s_field = coefficient_preset(s_name, cl.comp)
        if v_name.startswith("tabulated:"):
            v0 = tabulated_potential(np.load(v_name.split(":", 1)[1]))
        else:
            v0 = potential_preset(v_name, cl)
        gal = None
        if "gal_alpha" in self.model:
            gal = GalMassSpec(
                alpha=self.model["gal_alpha"],
                beta=self.model.get("gal_beta", 1.0),
                chi=chi_profile(self.model.get("gal_profile", "cos2"),
                                self.model.get("gal_support", 0.5)))
        grid = GridBox(center=(0,) * dim,
                       side=self.grid.get("side", 12),
                       points_per_cell=self.grid.get("points_per_cell", 8),
                       buffer=self.grid.get("buffer", 8),
                       backend=self.grid.get("backend", "fourier_symbol"),
                       wilson_r=self.grid.get("wilson_r", 1.0))
        return ModelSpec(clifford=cl, S=s_field, V0=v0, grid=grid, gal=gal)

    def disorder_model(self) -> Optional[DisorderModel]:
        if self.disorder is None:
            return None
        dd = self.disorder
        cl = self.clifford()
        prof_name = dd.get("u_profile", "cos2_bump")
        prof = profile_preset(prof_name)
        mat_name = dd.get("u_matrix", "identity")
        if mat_name in ("spin_up", "spin_down"):
            sign = 1.0 if mat_name == "spin_up" else -1.0
            prof = SingleSiteProfile(scalar=prof.scalar, radius=prof.radius,
                                     name=prof.name + "_" + mat_name,
                                     axis_factor=prof.axis_factor,
                                     matrix=(np.eye(2) + sign * PAULI_3) / 2)
        elif mat_name != "identity":
            raise SchemaError(f"unknown u_matrix {mat_name!r}")
        return make_disorder_model(
            dim=self.model.get("dimension", cl.dim), comp=cl.comp,
            m=dd.get("m", 1.0), M=dd.get("M", 1.0), R=dd.get("R", 0.3),
            beta_tail=dd.get("beta_tail", 1.0),
            density=dd.get("density", "edge_beta"),
            kappa=dd.get("kappa"), u_profile=prof)

    @property
    def coupling_scale(self):
        return self.disorder.get("coupling_scale", 1.0) if self.disorder else 0.0


def load_config(path, overrides=None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str        # keys are case-sensitive (m vs M)
    if not os.path.exists(path):
        raise SchemaError(f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(f"config parse error: {exc}")
    sections = set(cp.sections())
    known = set(SECTION_KEYS) | {"estimator"}
    unknown = sections - known
    if unknown:
        raise SchemaError(f"unknown config sections: {sorted(unknown)}")
    if "estimator" not in sections:
        raise SchemaError("missing [estimator] section")
    est_raw = dict(cp["estimator"])
    name = est_raw.pop("name", None)
    if name is None:
        raise SchemaError("estimator name is required")
    if name not in ESTIMATOR_KEYS:
        raise SchemaError(f"unknown estimator {name!r}; "
                          f"choices: {sorted(ESTIMATOR_KEYS)}")
    params = _parse_section(est_raw, ESTIMATOR_KEYS[name], f"estimator:{name}")
    parsed = {}
    for sec, schema in SECTION_KEYS.items():
        if sec in sections:
            parsed[sec] = _parse_section(dict(cp[sec]), schema, sec)
        else:
            parsed[sec] = None
    cfg = ExperimentConfig(
        estimator=name,
        model=parsed["model"] or {},
        grid=parsed["grid"] or {},
        disorder=parsed["disorder"],
        run=parsed["run"] or {},
        params=params,
        source_text=text,
    )
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg.run[key] = val
    return cfg


def _parse_section(raw, schema, label):
    out = {}
    for key, val in raw.items():
        if key not in schema:
            raise SchemaError(f"unknown key {key!r} in [{label}]")
        try:
            out[key] = schema[key](val)
        except SchemaError:
            raise
        except Exception as exc:
            raise SchemaError(f"bad value for {key!r} in [{label}]: {exc}")
    return out


def validate_config(cfg: ExperimentConfig):
    """Build every referenced object and check estimator preconditions that
    are checkable without compute.  Raises SchemaError on failure."""
    spec = cfg.model_spec()
    dm = cfg.disorder_model()
    needs_disorder = cfg.estimator in ("spectrum-scan", "wegner", "decay",
                                       "edge", "h1")
    if needs_disorder and dm is None:
        raise SchemaError(f"estimator {cfg.estimator!r} needs a [disorder] section")
    if cfg.estimator == "msa":
        from ..estimators import MsaSchedule
        MsaSchedule(L0=cfg.params.get("l0", 6),
                    alpha=cfg.params.get("alpha", 1.5),
                    zeta=cfg.params.get("zeta", 0.6),
                    mass=cfg.params.get("mass", 0.05),
                    n_scales=cfg.params.get("n_scales", 3))
    if cfg.estimator == "wegner":
        if not cfg.params.get("eta_list"):
            raise SchemaError("wegner needs eta_list")
        if not cfg.params.get("l_list"):
            raise SchemaError("wegner needs l_list")
    if cfg.estimator == "ct":
        from ..model import validate_elliptic_symbol
        check = validate_elliptic_symbol(spec.clifford, 1000)
        if not check["elliptic"]:
            raise SchemaError("symbol fails the ellipticity gate; "
                              "resolvent decay probes are not permitted")
    return spec, dm
