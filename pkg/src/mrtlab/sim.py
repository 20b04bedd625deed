"""Floating point MRT simulator on periodic grids.

Collision happens in moment space with per-moment relaxation rates
s = 1/(sigma + 1/2); streaming is an exact periodic index shift because
every velocity is an integer multiple of dx/dt.  Matrices come from the
exact moment algebra and are converted to float64 once per config.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equilibria import equilibrium_family, variable_map
from .matrices import build_moment_matrix, invert_moment_matrix
from .pde import viscosity_table
from .schemes import SchemeDef, builtin

EXPERIMENTS = ("shear-wave", "acoustic", "thermal-wave")


class FitError(RuntimeError):
    """Raised when a decay or oscillation fit cannot be trusted."""


@dataclass(frozen=True)
class SimConfig:
    scheme: SchemeDef
    shape: tuple
    sigma: tuple                      # ((symbol, value), ...) pairs
    dx: float = 1.0
    dt: float = 1.0
    cs: float | None = None           # sound speed for schemes that keep it free
    e0: float | None = None           # reference internal energy (thermal)
    steps: int = 1000
    record_every: int = 1
    flags: tuple = ()

    def __post_init__(self):
        s = self.scheme
        if len(self.shape) != s.dim:
            raise ValueError(f"shape {self.shape} does not match dim {s.dim}")
        if any(int(n) <= 0 for n in self.shape):
            raise ValueError("grid extents must be positive")
        if self.dx <= 0 or self.dt <= 0:
            raise ValueError("dx and dt must be positive")
        if self.steps < 0 or self.record_every <= 0:
            raise ValueError("bad step counts")
        rates = dict(self.sigma)
        for name in sorted({g for g in s.sigmas if g}):
            if name not in rates:
                raise ValueError(f"missing relaxation parameter {name}")
            sk = rate_from_sigma(rates[name])
            if not 0.0 < sk < 2.0:
                raise ValueError(
                    f"relaxation rate out of (0,2): s={sk:.4g} "
                    f"for {name} (sigma={rates[name]})")

    @property
    def lam(self):
        return self.dx / self.dt

    def sigma_value(self, name):
        return dict(self.sigma)[name]


def rate_from_sigma(sigma):
    return 1.0 / (float(sigma) + 0.5)


@dataclass
class LatticeState:
    f: np.ndarray                     # populations, shape (*grid, Q)
    n: int = 0


@dataclass
class MacroFields:
    rho: np.ndarray
    u: tuple                          # d velocity component arrays
    e: np.ndarray | None = None       # internal energy (thermal models)


def _compile_entry(poly, lam, cs, name):
    """Turn an equilibrium polynomial into a float evaluator on arrays."""
    terms = []
    for mono, coef in sorted(poly.terms.items()):
        c = float(coef) * lam ** mono[5]
        if mono[6]:
            if cs is None:
                raise ValueError(
                    f"equilibrium {name} uses the sound speed; set cs")
            c *= cs ** mono[6]
        terms.append((c, mono[:5]))

    def ev(prim, _terms=tuple(terms)):
        out = 0.0
        for c, expo in _terms:
            t = c
            for arr, k in zip(prim, expo):
                if k:
                    t = t * arr ** k
            out = out + t
        return out

    return ev


class _Kernel:
    """Per-config float matrices, shifts and compiled equilibria."""

    def __init__(self, cfg: SimConfig):
        s = cfg.scheme
        lam = cfg.lam
        self.dim = s.dim
        self.q = len(s.velocities)
        self.ncons = s.conserved
        self.axes = tuple(range(s.dim))
        self.shifts = tuple(tuple(int(c) for c in v) for v in s.velocities)

        mm = build_moment_matrix(s)
        inv = invert_moment_matrix(mm)
        m_f = np.array([[float(x) for x in row] for row in mm.core])
        i_f = np.array([[float(x) for x in row] for row in inv.core])
        degs = np.array(s.lambda_degrees, dtype=float)
        m_f *= lam ** degs[:, None]
        i_f *= lam ** (-degs[None, :])
        self.mt = np.ascontiguousarray(m_f.T)
        self.invt = np.ascontiguousarray(i_f.T)

        rates = dict(cfg.sigma)
        self.s = np.zeros(self.q)
        for k, g in enumerate(s.sigmas):
            if g:
                self.s[k] = rate_from_sigma(rates[g])

        eq = equilibrium_family(s, flags=cfg.flags)
        self.eq_items = []
        for k, name in enumerate(s.moment_names):
            if k < self.ncons:
                continue
            fn = _compile_entry(eq.entries[name], lam, cfg.cs, name)
            self.eq_items.append((k, fn))

        vm = variable_map(s)
        self.thermal = vm.model.kind == "thermal"
        if self.thermal:
            a, b = vm.energy_ab
            self.energy_ab = (float(a), float(b))
        else:
            self.energy_ab = None
        self.lam = lam

    def primitives(self, m):
        rho = m[..., 0]
        u = [m[..., 1 + i] / rho for i in range(self.dim)]
        while len(u) < 3:
            u.append(0.0)
        if self.thermal:
            a, b = self.energy_ab
            big_e = (m[..., self.dim + 1] - b * self.lam ** 2 * rho) / a
            e = big_e / rho - 0.5 * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
        else:
            e = 0.0
        return (rho, u[0], u[1], u[2], e)


def _kernel(cfg: SimConfig) -> _Kernel:
    k = cfg.__dict__.get("_kernel")
    if k is None:
        k = _Kernel(cfg)
        object.__setattr__(cfg, "_kernel", k)
    return k


def init_lattice(cfg: SimConfig, fields: MacroFields) -> LatticeState:
    """Populations at local equilibrium for the given macroscopic fields."""
    k = _kernel(cfg)
    shape = tuple(int(n) for n in cfg.shape)
    rho = np.broadcast_to(np.asarray(fields.rho, dtype=float), shape)
    if np.min(rho) <= 0:
        raise ValueError(f"nonpositive density: min rho = {np.min(rho)}")
    u = [np.broadcast_to(np.asarray(c, dtype=float), shape) for c in fields.u]
    if len(u) != k.dim:
        raise ValueError(f"need {k.dim} velocity components")
    while len(u) < 3:
        u.append(np.zeros(shape))
    m = np.zeros(shape + (k.q,))
    m[..., 0] = rho
    for i in range(k.dim):
        m[..., 1 + i] = rho * u[i]
    if k.thermal:
        if fields.e is None:
            raise ValueError("thermal model needs an e field")
        e = np.broadcast_to(np.asarray(fields.e, dtype=float), shape)
        a, b = k.energy_ab
        big_e = 0.5 * rho * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2) + rho * e
        m[..., k.dim + 1] = a * big_e + b * k.lam ** 2 * rho
    else:
        e = 0.0
    prim = (rho, u[0], u[1], u[2], e)
    for idx, fn in k.eq_items:
        m[..., idx] = fn(prim)
    return LatticeState(m @ k.invt, 0)


def collide_moments(m: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Relax the nonconserved moments toward equilibrium."""
    k = _kernel(cfg)
    prim = k.primitives(m)
    out = m.copy()
    for idx, fn in k.eq_items:
        sk = k.s[idx]
        out[..., idx] = (1.0 - sk) * m[..., idx] + sk * fn(prim)
    return out


def step(state: LatticeState, cfg: SimConfig) -> LatticeState:
    """One collide-then-stream update on the periodic grid."""
    k = _kernel(cfg)
    f_star = collide_moments(state.f @ k.mt, cfg) @ k.invt
    out = np.empty_like(f_star)
    for j, shift in enumerate(k.shifts):
        out[..., j] = np.roll(f_star[..., j], shift, axis=k.axes)
    if not np.isfinite(out).all():
        raise RuntimeError(f"non-finite populations after step {state.n + 1}")
    return LatticeState(out, state.n + 1)


def macro_fields(state: LatticeState, cfg: SimConfig) -> MacroFields:
    """Density, velocity and (thermal) internal energy per cell."""
    k = _kernel(cfg)
    m = state.f @ k.mt
    rho = m[..., 0]
    if np.min(rho) <= 0:
        raise ValueError(f"nonpositive density: min rho = {np.min(rho)}")
    prim = k.primitives(m)
    u = tuple(prim[1 + i] for i in range(k.dim))
    return MacroFields(rho, u, prim[4] if k.thermal else None)


# -- measurements ------------------------------------------------------------

def fit_exponential(times, amps, skip=0.05, min_r2=0.98):
    """Decay rate of amps ~ exp(-rate*t) by least squares on the log."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(amps, dtype=float)
    if t.shape != a.shape or t.size < 4:
        raise FitError("need matching series of at least 4 samples")
    n0 = int(math.ceil(t.size * skip))
    t, a = t[n0:], a[n0:]
    if np.max(np.abs(a)) == 0.0:
        return 0.0
    if np.min(a) <= 0.0:
        raise FitError("amplitude series is not positive")
    y = np.log(a)
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 1e-20 * t.size:
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
        if r2 < min_r2:
            raise FitError(f"exponential fit rejected (R^2 = {r2:.4f})")
    return -float(slope)


def fit_frequency(times, vals):
    """Angular frequency from the zero crossings of a damped cosine."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(vals, dtype=float)
    cross = []
    for i in range(len(v) - 1):
        if v[i] == 0.0:
            continue
        if (v[i] > 0) != (v[i + 1] > 0):
            frac = v[i] / (v[i] - v[i + 1])
            cross.append(t[i] + frac * (t[i + 1] - t[i]))
    if len(cross) < 3:
        raise FitError(f"only {len(cross)} zero crossings; run longer")
    slope = np.polyfit(np.arange(len(cross)), cross, 1)[0]
    return math.pi / float(slope)


@dataclass
class MeasurementReport:
    scheme: str
    kind: str
    quantity: str                     # nu, c_s or kappa
    wavenumber: float
    measured: float
    predicted: float
    rate: float | None
    series: tuple                     # ((step, time, value), ...)
    notes: tuple = ()

    @property
    def ratio(self):
        return self.measured / self.predicted

    @property
    def percent_error(self):
        return 100.0 * abs(self.measured - self.predicted) / abs(self.predicted)

    def summary(self):
        return (f"{self.scheme} {self.kind}: {self.quantity}_measured/"
                f"{self.quantity}_predicted = {self.ratio:.4f} "
                f"({self.percent_error:.2f}% off; measured {self.measured:.6g},"
                f" predicted {self.predicted:.6g})")


def _poly_float(p, env):
    total = 0.0
    for mono, coef in sorted(p.terms.items()):
        t = float(coef)
        for k, name in enumerate(p.vars):
            if mono[k]:
                t *= float(env[name]) ** mono[k]
        total += t
    return total


def _sigma_env(cfg, rho0):
    env = {"rho": rho0, "u": 0.0, "v": 0.0, "w": 0.0,
           "e": cfg.e0 or 0.0, "lam": cfg.lam, "cs": cfg.cs or 0.0}
    for name, val in cfg.sigma:
        env[name.replace("sigma", "sig")] = float(val)
        env[name] = float(val)
    for name in ("sig_e", "sig_x", "sig_q", "sig_h"):
        env.setdefault(name, 0.0)
    return env


def predicted_viscosity(cfg: SimConfig, rho0=1.0):
    """Kinematic shear viscosity from the analysis table, per unit time."""
    vis = viscosity_table(cfg.scheme.name)
    return _poly_float(vis.mu, _sigma_env(cfg, rho0)) * cfg.dt / rho0


def predicted_sound_speed(cfg: SimConfig):
    s = cfg.scheme
    if s.model == "thermal":
        if cfg.e0 is None:
            raise ValueError("thermal sound speed needs e0")
        gam = 2.0 if s.dim == 2 else 5.0 / 3.0
        return math.sqrt(gam * (gam - 1.0) * cfg.e0)
    if cfg.cs is not None:
        return cfg.cs
    return cfg.lam / math.sqrt(3.0)


def predicted_prandtl(cfg: SimConfig):
    pr = viscosity_table(cfg.scheme.name).prandtl
    if pr is None:
        raise ValueError(f"no Prandtl number on record for {cfg.scheme.name}")
    return float(pr)


def _wave_x(cfg):
    n0 = int(cfg.shape[0])
    x = np.arange(n0) * cfg.dx
    return x.reshape((n0,) + (1,) * (cfg.scheme.dim - 1))


def _mode_amplitude(fld, phase):
    return 2.0 * abs(np.mean(fld * phase))


def _mode_signed(fld, sinkx):
    return 2.0 * float(np.mean(fld * sinkx))


def run_experiment(cfg: SimConfig, kind: str, *, rho0=1.0, amplitude=None,
                   background=None) -> MeasurementReport:
    """Initialize a single-mode field, advance, and fit the response."""
    if kind not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {kind!r}")
    s = cfg.scheme
    thermal = s.model == "thermal"
    if kind == "thermal-wave" and not thermal:
        raise ValueError("experiment incompatible with model: "
                         "thermal-wave needs a thermal scheme")
    if thermal and cfg.e0 is None:
        raise ValueError("thermal scheme needs e0")
    lam = cfg.lam
    cap = 1e-3 * lam if kind == "shear-wave" else 1e-3
    if amplitude is None:
        amplitude = cap
    if not 0.0 <= amplitude <= cap * (1 + 1e-12):
        raise ValueError(f"amplitude {amplitude} above linear-response cap "
                         f"{cap:.3g}")
    bg = tuple(float(b) for b in (background or ()))
    if bg and len(bg) != s.dim:
        raise ValueError(f"background needs {s.dim} components")
    if any(abs(b) > 0.05 * lam for b in bg):
        raise ValueError("background velocity above 0.05*lambda")

    x = _wave_x(cfg)
    wavelength = cfg.shape[0] * cfg.dx
    kw = 2.0 * math.pi / wavelength
    sinkx = np.sin(kw * x)
    phase = np.exp(-1j * kw * x)
    shape = tuple(int(n) for n in cfg.shape)
    zero = np.zeros(shape)
    u0 = [zero + (bg[i] if bg else 0.0) for i in range(s.dim)]

    if kind == "shear-wave":
        u0[1] = u0[1] + amplitude * sinkx
        fields = MacroFields(zero + rho0, tuple(u0),
                             zero + cfg.e0 if thermal else None)
        observe = lambda mf: _mode_amplitude(mf.u[1], phase)
    elif kind == "acoustic":
        fields = MacroFields(rho0 * (1.0 + amplitude * sinkx), tuple(u0),
                             zero + cfg.e0 if thermal else None)
        observe = lambda mf: _mode_signed(mf.rho - rho0, sinkx)
    else:
        fields = MacroFields(rho0 * (1.0 - amplitude * sinkx), tuple(u0),
                             cfg.e0 * (1.0 + amplitude * sinkx))
        observe = lambda mf: _mode_amplitude(mf.e, phase)

    state = init_lattice(cfg, fields)
    series = [(0, 0.0, observe(macro_fields(state, cfg)))]
    for n in range(1, cfg.steps + 1):
        state = step(state, cfg)
        if n % cfg.record_every == 0:
            series.append((n, n * cfg.dt, observe(macro_fields(state, cfg))))
    times = [t for _, t, _ in series]
    vals = [v for _, _, v in series]

    if kind == "acoustic":
        omega = fit_frequency(times, vals)
        measured = omega / kw
        predicted = predicted_sound_speed(cfg)
        rate = None
        quantity = "c_s"
    else:
        rate = fit_exponential(times, vals)
        measured = rate / kw ** 2
        if kind == "shear-wave":
            predicted = predicted_viscosity(cfg, rho0)
            quantity = "nu"
        else:
            predicted = predicted_viscosity(cfg, rho0) / predicted_prandtl(cfg)
            quantity = "kappa"
    return MeasurementReport(s.name, kind, quantity, kw, measured, predicted,
                             rate, tuple(series))


def write_series(report: MeasurementReport, path):
    with open(path, "w") as fh:
        fh.write(f"step,time,{report.quantity}_mode_amplitude\n")
        for stp, t, v in report.series:
            fh.write(f"{stp},{t!r},{v!r}\n")


# -- config files ------------------------------------------------------------

CONFIG_KEYS = (
    "scheme", "scheme_file", "flags", "experiment", "shape", "dx", "dt",
    "sigma_e", "sigma_x", "sigma_q", "sigma_h", "cs", "e0", "rho0",
    "steps", "record_every", "amplitude", "background",
)


def _num(text):
    text = text.strip()
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def load_config(path):
    """Flat key = value run description -> (SimConfig, kind, options)."""
    raw = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{ln}: unknown key {key!r}")
            raw[key] = val
    if "scheme" not in raw:
        raise ValueError("config needs a scheme")
    if "scheme_file" in raw:
        from .schemes import parse_scheme
        with open(raw["scheme_file"]) as fh:
            scheme = parse_scheme(fh.read())
        if scheme.name != raw["scheme"]:
            raise ValueError("scheme name does not match scheme_file")
    else:
        scheme = builtin(raw["scheme"])
    shape = tuple(int(n) for n in raw.get("shape", "64").split("x"))
    if len(shape) == 1:
        shape = shape * scheme.dim
    sigma = tuple((k, _num(raw[k])) for k in
                  ("sigma_e", "sigma_x", "sigma_q", "sigma_h") if k in raw)
    sigma = tuple((f"sig{name[5:]}", val) for name, val in sigma)
    cfg = SimConfig(
        scheme=scheme, shape=shape, sigma=sigma,
        dx=_num(raw.get("dx", "1")), dt=_num(raw.get("dt", "1")),
        cs=_num(raw["cs"]) if "cs" in raw else None,
        e0=_num(raw["e0"]) if "e0" in raw else None,
        steps=int(raw.get("steps", "1000")),
        record_every=int(raw.get("record_every", "1")),
        flags=tuple(f for f in raw.get("flags", "").split(",") if f))
    kind = raw.get("experiment", "shear-wave")
    opts = {"rho0": _num(raw.get("rho0", "1"))}
    if "amplitude" in raw:
        opts["amplitude"] = _num(raw["amplitude"])
    if "background" in raw:
        opts["background"] = tuple(_num(v) for v in
                                   raw["background"].split(","))
    return cfg, kind, opts
