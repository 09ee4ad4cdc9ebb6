"""Gate and noise parameter containers for the Molmer-Sorensen simulator."""

from dataclasses import dataclass, field, asdict, replace

import numpy as np
from scipy import optimize

from ..hilbert import TWO_PI, ModeGeometry

# Reference operating point: Raman detuning -2pi x 900 GHz, 30 us gate.
REFERENCE_RAMAN_DETUNING = -TWO_PI * 900e9
DEFAULT_T_GATE = 30e-6
DEFAULT_RISE_FALL = 0.75e-6


@dataclass(frozen=True)
class Envelope:
    """Amplitude envelope g(t) on [0, t_gate], peak value 1.

    ``kind`` is "square" or "raised_cosine"; ``rise_fall`` is the duration of
    each ramp for the shaped pulse.
    """

    kind: str = "square"
    rise_fall: float = 0.0

    def __post_init__(self):
        if self.kind not in ("square", "raised_cosine"):
            raise ValueError(f"unsupported envelope kind {self.kind!r}")
        if self.rise_fall < 0:
            raise ValueError("rise_fall must be non-negative")
        if self.kind == "raised_cosine" and self.rise_fall == 0:
            object.__setattr__(self, "kind", "square")

    @property
    def is_square(self):
        return self.kind == "square"

    def __call__(self, t, t_gate):
        t = np.asarray(t, dtype=float)
        g = np.where((t >= 0) & (t <= t_gate), 1.0, 0.0)
        if self.is_square:
            return g
        tau = self.rise_fall
        if 2 * tau > t_gate:
            raise ValueError("ramps longer than the pulse")
        up = 0.5 * (1.0 - np.cos(np.pi * np.clip(t, 0, tau) / tau))
        down = 0.5 * (1.0 - np.cos(np.pi * np.clip(t_gate - t, 0, tau) / tau))
        return g * np.minimum(up, down)

    def breakpoints(self, t_gate):
        if self.is_square:
            return np.array([0.0, t_gate])
        return np.array([0.0, self.rise_fall, t_gate - self.rise_fall, t_gate])


@dataclass(frozen=True)
class GateConfig:
    """One MS gate scenario.

    delta   sideband detuning (rad/s)
    omega   carrier Rabi rate (rad/s); the sideband coupling per ion is
            eta_S * omega / 2, so eta_S * omega = delta / 2 is the single-loop
            maximally entangling condition for a square pulse
    phases  (phi_1b, phi_1r, phi_2b, phi_2r) in rad
    """

    delta: float
    omega: float
    eta_S: float = 0.19
    t_gate: float = DEFAULT_T_GATE
    rise_fall: float = 0.0
    phases: tuple = (0.0, 0.0, 0.0, 0.0)
    loops: int = 1
    closed: bool = True
    maximal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if len(self.phases) != 4:
            raise ValueError("phases must be (phi_1b, phi_1r, phi_2b, phi_2r)")
        if self.t_gate <= 0:
            raise ValueError("t_gate must be positive")
        if self.loops < 1:
            raise ValueError("loops must be >= 1")

    @property
    def envelope(self):
        if self.rise_fall > 0:
            return Envelope("raised_cosine", self.rise_fall)
        return Envelope("square")

    @property
    def coupling(self):
        """Peak spin-dependent force per ion, F = eta_S * omega / 2 (rad/s)."""
        return 0.5 * self.eta_S * self.omega

    @property
    def spin_phases(self):
        """Per-ion spin-axis phase (phi_b + phi_r)/2."""
        b1, r1, b2, r2 = self.phases
        return np.array([0.5 * (b1 + r1), 0.5 * (b2 + r2)])

    @property
    def motion_phases(self):
        """Per-ion motional phase (phi_r - phi_b)/2."""
        b1, r1, b2, r2 = self.phases
        return np.array([0.5 * (r1 - b1), 0.5 * (r2 - b2)])

    def with_phases(self, phases):
        return replace(self, phases=tuple(phases))

    def closure_violation(self):
        """Relative deviation from t_gate = 2 pi loops / delta (square pulses)."""
        return abs(self.t_gate * self.delta / (TWO_PI * self.loops) - 1.0)

    def entanglement_violation(self):
        """Relative deviation from eta_S * omega = delta / (2 sqrt(loops))."""
        target = self.delta / (2.0 * np.sqrt(self.loops))
        return abs(self.eta_S * self.omega / target - 1.0)

    def violations(self, tol=1e-9):
        out = []
        if self.envelope.is_square:
            if self.closed and self.closure_violation() > tol:
                out.append(f"closure: t_gate*delta/(2pi*loops) off by {self.closure_violation():.3e}")
            if self.maximal and self.entanglement_violation() > tol:
                out.append(f"entanglement: eta_S*omega vs delta/2 off by {self.entanglement_violation():.3e}")
        return out

    @classmethod
    def ideal(cls, t_gate=DEFAULT_T_GATE, eta_S=0.19, loops=1, rise_fall=0.0,
              phases=(0.0, 0.0, 0.0, 0.0)):
        """Closed, maximally entangling configuration for the given duration.

        Square pulses use the closed form delta = 2 pi loops / t_gate and
        eta_S omega = delta / (2 sqrt(loops)). With ramps, delta is the
        loops-th zero of the envelope's Fourier transform and omega is scaled
        to keep the maximally entangling geometric phase.
        """
        delta = TWO_PI * loops / t_gate
        omega = delta / (2.0 * eta_S * np.sqrt(loops))
        cfg = cls(delta=delta, omega=omega, eta_S=eta_S, t_gate=t_gate,
                  rise_fall=rise_fall, phases=phases, loops=loops)
        if rise_fall > 0:
            cfg = calibrate_shaped(cfg)
        return cfg


def calibrate_shaped(cfg):
    """Re-tune delta and omega of a shaped pulse to close the loop and keep the
    maximally entangling geometric phase."""
    from .propagate import EnvelopeQuadrature

    quad = EnvelopeQuadrature(cfg.envelope, cfg.t_gate, loops=cfg.loops)

    def closure(delta):
        # g is symmetric about T/2, so e^{i delta T/2} U(T) is real
        u_end = quad.displacement_integral(np.array([delta]))[0]
        return float(np.real(np.exp(0.5j * delta * cfg.t_gate) * u_end))

    # a raised-cosine edge is a rectangle of width T - tau smoothed by a
    # half-cosine kernel, so the spectral zero sits near 2 pi loops / (T - tau)
    d0 = TWO_PI * cfg.loops / (cfg.t_gate - cfg.rise_fall)
    lo, hi = 0.98 * d0, 1.02 * d0
    delta = optimize.brentq(closure, lo, hi, xtol=1e-14 * d0, rtol=1e-15)
    j = quad.phase_integral(np.array([delta]))[0]
    # |c| = 2 branch must accumulate geometric phase pi/2: 4 F^2 J = pi/2
    force = np.sqrt(np.pi / (8.0 * j))
    omega = 2.0 * force / cfg.eta_S
    return replace(cfg, delta=delta, omega=omega)


@dataclass(frozen=True)
class NoiseModel:
    """Physical noise parameters for one gate.

    raman_rate        Raman scattering probability per ion per gate
    rayleigh_error    Bell-state error from Rayleigh recoil per gate
    mode_freq_rms     Gaussian stretch-frequency jitter, Hz r.m.s.
    chi               rocking-mode cross-Kerr shift, Hz per quantum
    nbar_x, nbar_y    thermal occupations of the rocking modes
    rabi_frac_rms     Gaussian fractional Rabi-rate jitter
    eta_C             COM Lamb-Dicke parameter entering the Debye-Waller term
    nbar_C, nbar_S    initial thermal occupations
    heating_rate_S/C  quanta per second
    dephasing_rate    per-ion phase diffusion, rad^2/s
    qubit_freq_rms    quasi-static qubit frequency error, Hz r.m.s.
    leakage_fraction  share of Raman scatters leaving the qubit manifold
    """

    raman_rate: float = 0.0
    rayleigh_error: float = 0.0
    mode_freq_rms: float = 0.0
    chi: float = 0.0
    nbar_x: float = 0.0
    nbar_y: float = 0.0
    rabi_frac_rms: float = 0.0
    eta_C: float = 0.0
    nbar_C: float = 0.0
    nbar_S: float = 0.0
    heating_rate_S: float = 0.0
    heating_rate_C: float = 0.0
    dephasing_rate: float = 0.0
    qubit_freq_rms: float = 0.0
    leakage_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if self.leakage_fraction > 1:
            raise ValueError("leakage_fraction must lie in [0, 1]")

    def only(self, *names):
        """Copy with every noise source off except the named fields.

        Occupations and the Debye-Waller eta are kept when their driving
        source is kept.
        """
        keep = set(names)
        groups = {
            "mode_freq": ("mode_freq_rms", "chi", "nbar_x", "nbar_y"),
            "rabi": ("rabi_frac_rms", "eta_C", "nbar_C", "heating_rate_C"),
            "raman": ("raman_rate",),
            "rayleigh": ("rayleigh_error",),
            "heating": ("heating_rate_S", "nbar_S"),
            "dephasing": ("dephasing_rate",),
            "qubit": ("qubit_freq_rms",),
        }
        fields_on = set()
        for k in keep:
            fields_on.update(groups.get(k, (k,)))
        kw = {}
        for name, value in asdict(self).items():
            if name == "leakage_fraction":
                kw[name] = value
            else:
                kw[name] = value if name in fields_on else 0.0
        return NoiseModel(**kw)

    def with_(self, **kw):
        return replace(self, **kw)

    @property
    def is_noiseless(self):
        d = asdict(self)
        d.pop("leakage_fraction")
        d.pop("eta_C")
        return all(v == 0 for v in d.values())

    @classmethod
    def reference_budget(cls, geometry=None):
        """Noise parameters for the -2pi x 900 GHz, 30 us operating point."""
        from .noise import raman_rate_for_error

        geometry = geometry or ModeGeometry()
        leak = 1.0 / 3.0
        # rocking-mode occupation chosen so chi*(n_x+n_y) jitters by 100 Hz r.m.s.
        chi = 45.0
        nbar_xy = 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * (100.0 / chi) ** 2 / 2.0))
        return cls(
            raman_rate=raman_rate_for_error(4.0e-4, leak),
            rayleigh_error=1.7e-4,
            mode_freq_rms=50.0,
            chi=chi,
            nbar_x=nbar_xy,
            nbar_y=nbar_xy,
            rabi_frac_rms=1e-3,
            eta_C=geometry.eta_single,
            nbar_C=0.01,
            nbar_S=0.006,
            heating_rate_S=1.0,
            heating_rate_C=80.0,
            # per-ion phase variance gamma*T; Bell error ~ gamma*T/2 = 2e-5 at 30 us
            dephasing_rate=2.0 * 2e-5 / DEFAULT_T_GATE,
            qubit_freq_rms=1.0,
            leakage_fraction=leak,
        )
