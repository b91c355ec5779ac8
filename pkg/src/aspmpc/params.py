"""Plant constants: stoichiometry, kinetics, settler, geometry, smoothing.

Defaults are the standard BSM1/ASM1 values.  A flat ``name = value`` text
file can override any constant (see `load_overrides`).
"""

from dataclasses import dataclass, field, fields, replace

import numpy as np


@dataclass(frozen=True)
class PlantParams:
    # Stoichiometric
    Y_A: float = 0.24        # g COD formed per g N oxidised
    Y_H: float = 0.67        # g COD formed per g COD utilised
    f_P: float = 0.08        # fraction of biomass to particulate products
    i_XB: float = 0.08       # g N per g COD in biomass
    i_XP: float = 0.06       # g N per g COD in X_P

    # Kinetic
    mu_H: float = 4.00       # 1/d
    K_S: float = 10.0        # g COD/m^3
    K_OH: float = 0.20       # g O2/m^3
    K_NO: float = 0.50       # g N/m^3
    b_H: float = 0.30        # 1/d
    eta_g: float = 0.80
    eta_h: float = 0.80
    k_h: float = 3.00        # g X_S per (g X_BH COD * d)
    K_X: float = 0.10        # g X_S per g X_BH COD
    mu_A: float = 0.50       # 1/d
    K_NH: float = 1.00       # g N/m^3
    b_A: float = 0.05        # 1/d
    K_OA: float = 0.40       # g O2/m^3
    k_a: float = 0.05        # m^3 per (g COD * d)

    # Settler (double-exponential settling velocity)
    v0_max: float = 250.0    # m/d
    v0: float = 474.0        # m/d
    r_h: float = 0.000576    # m^3/g
    r_p: float = 0.00286     # m^3/g
    f_ns: float = 0.00228

    # General
    V_A: tuple = (1000.0, 1000.0, 1333.0, 1333.0, 1333.0)   # m^3
    V_S: float = 600.0       # m^3 per settler layer
    h_S: float = 0.4         # m per settler layer
    S_S_EC: float = 4.0e5    # g COD/m^3, external carbon concentration
    S_O_sat: float = 8.0     # g O2/m^3
    X_t: float = 3000.0      # g/m^3, settling threshold

    # Smoothing sharpness for the differentiable model variant
    step_sharpness: float = 50.0     # 1/(g/m^3), tanh factor on the X_t switch
    beta_flux: float = 0.01          # 1/(g m^-2 d^-1), soft-min of solid fluxes
    beta_vel: float = 0.5            # 1/(m d^-1), soft clipping of settling velocity

    # Integrator guard: states below -clamp_eps are clamped to zero
    clamp_eps: float = 1e-9

    def pack(self):
        """Flatten to the float64 vector consumed by the numba kernels."""
        scalars = [
            self.Y_A, self.Y_H, self.f_P, self.i_XB, self.i_XP,
            self.mu_H, self.K_S, self.K_OH, self.K_NO, self.b_H,
            self.eta_g, self.eta_h, self.k_h, self.K_X, self.mu_A,
            self.K_NH, self.b_A, self.K_OA, self.k_a,
            self.v0_max, self.v0, self.r_h, self.r_p, self.f_ns,
            self.V_S, self.h_S, self.S_S_EC, self.S_O_sat, self.X_t,
            self.step_sharpness, self.beta_flux, self.beta_vel,
        ]
        return np.array(scalars + list(self.V_A), dtype=np.float64)


# Slot map for PlantParams.pack(); kept next to it so they cannot drift apart.
(P_YA, P_YH, P_FP, P_IXB, P_IXP,
 P_MUH, P_KS, P_KOH, P_KNO, P_BH,
 P_ETAG, P_ETAH, P_KH, P_KX, P_MUA,
 P_KNH, P_BA, P_KOA, P_KA,
 P_V0MAX, P_V0, P_RH, P_RP, P_FNS,
 P_VS, P_HS, P_SSEC, P_SOSAT, P_XT,
 P_SHARP, P_BETAF, P_BETAV, P_VA1) = range(33)

N_PACKED = 37  # 32 scalars + 5 reactor volumes

_FIELD_ALIASES = {
    "v_0": "v0",
    "v_0_max": "v0_max",
    "v0max": "v0_max",
}


def load_overrides(path, base=None):
    """Read a flat ``name = value`` override file on top of `base` params.

    Keys follow the model constant symbol names (``Y_H``, ``mu_H``, ``eta_g``,
    ``v0_max``, ``S_S_EC``, ...).  Reactor volumes can be set individually as
    ``V_A1`` .. ``V_A5`` or all at once as ``V_A``.  Lines starting with ``#``
    and blank lines are ignored.

    Raises:
        ValueError: on unknown keys or unparsable values (message carries the
            offending line number).
    """
    base = base if base is not None else PlantParams()
    known = {f.name for f in fields(PlantParams)}
    updates = {}
    volumes = list(base.V_A)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'name = value', got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            key = _FIELD_ALIASES.get(key, key)
            try:
                value = float(val.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad numeric value {val.strip()!r}") from exc
            if key.startswith("V_A") and len(key) == 4 and key[3].isdigit():
                idx = int(key[3]) - 1
                if not 0 <= idx < 5:
                    raise ValueError(f"{path}:{lineno}: reactor index out of range in {key}")
                volumes[idx] = value
            elif key == "V_A":
                volumes = [value] * 5
            elif key in known:
                updates[key] = value
            else:
                raise ValueError(f"{path}:{lineno}: unknown parameter {key!r}")
    updates["V_A"] = tuple(volumes)
    return replace(base, **updates)
