"""Delay-domain SAGE estimation of multipath components from a sampled CIR.

The forward model is a sum of band-limited (sinc) pulses on the tap grid::

    h[n] = sum_l alpha_l * sinc(n - tau_l / Ts)

Estimation starts with successive cancellation (strongest correlation peak,
subtract, repeat) and then runs SAGE sweeps. For path ``l`` the E-step forms
``x_l = residual + alpha_l * p(tau_l)``; the M-step maximises
``|p(tau)^T x_l|^2 / ||p(tau)||^2`` over an oversampled delay grid around the
current delay (followed by a parabolic refinement) and sets ``alpha_l`` by
projection. Each M-step never accepts a worse delay than the current one, so
the residual energy cannot grow from sweep to sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FLOOR_DB, MAX_PATHS, TAP_SPACING_NS, MultipathComponent
from .errors import DegenerateProfileError, InvalidArgumentError


@dataclass(frozen=True)
class EstimatorConfig:
    max_paths: int = MAX_PATHS
    delay_grid_oversampling: int = 8
    max_iterations: int = 50
    convergence_tol: float = 1e-4
    prune_floor_db: float = FLOOR_DB
    tap_spacing_ns: float = TAP_SPACING_NS
    # M-step search window, in taps either side of the current delay
    search_halfwidth_taps: float = 2.0
    # sweeps over the detected paths after each successive-cancellation step
    init_sweeps: int = 2

    def __post_init__(self):
        if self.max_paths < 1:
            raise InvalidArgumentError("max_paths must be >= 1")
        if self.delay_grid_oversampling < 1:
            raise InvalidArgumentError("delay_grid_oversampling must be >= 1")
        if not self.convergence_tol > 0:
            raise InvalidArgumentError("convergence_tol must be > 0")
        if self.init_sweeps < 0:
            raise InvalidArgumentError("init_sweeps must be >= 0")
        if self.max_iterations < 0:
            raise InvalidArgumentError("max_iterations must be >= 0")
        if not self.tap_spacing_ns > 0:
            raise InvalidArgumentError("tap_spacing_ns must be > 0")


@dataclass
class SageResult:
    mpcs: list
    residual_energy: float
    residual_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    input_energy: float = 0.0


def pulse_matrix(delays_ns, n_taps: int, tap_spacing_ns: float = TAP_SPACING_NS) -> np.ndarray:
    """Sampled sinc pulses, one row per delay."""
    delays = np.atleast_1d(np.asarray(delays_ns, dtype=float))
    n = np.arange(n_taps, dtype=float)
    return np.sinc(n[None, :] - delays[:, None] / tap_spacing_ns)


def synthesize_cir_from_mpcs(mpcs, tap_spacing_ns: float = TAP_SPACING_NS, n_taps: int = 276) -> np.ndarray:
    """Superpose band-limited pulses for ``mpcs`` onto ``n_taps`` complex taps."""
    h = np.zeros(int(n_taps), dtype=complex)
    if not mpcs:
        return h
    delays = np.array([m.delay_ns for m in mpcs], dtype=float)
    window = n_taps * tap_spacing_ns
    bad = (delays < 0.0) | (delays >= window)
    if bad.any():
        raise InvalidArgumentError(
            f"delay {delays[bad][0]} ns outside the tap window [0, {window}) ns"
        )
    amps = np.array([m.amplitude for m in mpcs], dtype=complex)
    return amps @ pulse_matrix(delays, n_taps, tap_spacing_ns)


class _Dictionary:
    """Pulses on the oversampled delay grid plus helpers for off-grid delays."""

    def __init__(self, n_taps, spacing, oversampling):
        self.n_taps = n_taps
        self.spacing = spacing
        self.step = spacing / oversampling
        self.grid = np.arange(n_taps * oversampling) * self.step
        self.atoms = pulse_matrix(self.grid, n_taps, spacing)
        self.norms2 = np.einsum("ij,ij->i", self.atoms, self.atoms)
        self.window = n_taps * spacing

    def pulse(self, tau):
        return np.sinc(np.arange(self.n_taps) - tau / self.spacing)

    def score(self, tau, x):
        p = self.pulse(tau)
        c = p @ x
        return (c.real * c.real + c.imag * c.imag) / (p @ p)

    def best_delay(self, x, lo=None, hi=None):
        """Maximise the normalised correlation over grid points in [lo, hi], then refine."""
        if lo is None:
            i0, i1 = 0, self.grid.size
        else:
            i0 = max(0, int(math.floor(lo / self.step)))
            i1 = min(self.grid.size, int(math.ceil(hi / self.step)) + 1)
        c = self.atoms[i0:i1] @ x
        s = (c.real**2 + c.imag**2) / self.norms2[i0:i1]
        j = int(np.argmax(s))
        tau, best = self.grid[i0 + j], s[j]
        if 0 < j < s.size - 1:
            denom = s[j - 1] - 2.0 * s[j] + s[j + 1]
            if denom < 0.0:
                shift = 0.5 * (s[j - 1] - s[j + 1]) / denom
                cand = tau + shift * self.step
                if 0.0 <= cand < self.window:
                    sc = self.score(cand, x)
                    if sc > best:
                        tau, best = cand, sc
        return tau, best


def _check_input(cir):
    x = np.asarray(cir, dtype=complex)
    if x.ndim != 1 or x.size < 2:
        raise InvalidArgumentError("CIR must be a 1-D sequence of at least 2 taps")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("CIR contains non-finite samples")
    energy = float(np.vdot(x, x).real)
    if energy == 0.0:
        raise DegenerateProfileError("CIR is identically zero")
    return x, energy


def sage(cir, cfg: EstimatorConfig | None = None) -> SageResult:
    """Estimate MPC delays and amplitudes from one CIR snapshot.

    Returns the pruned components sorted by delay together with the residual
    energy after every stage (initialisation first, then one entry per sweep).
    """
    cfg = cfg or EstimatorConfig()
    x, energy = _check_input(cir)
    d = _Dictionary(x.size, cfg.tap_spacing_ns, cfg.delay_grid_oversampling)
    # candidates this far below the strongest path end the initialisation
    stop_ratio = 10.0 ** ((cfg.prune_floor_db - 10.0) / 10.0)

    taus, alphas, pulses = [], [], []
    half = cfg.search_halfwidth_taps * cfg.tap_spacing_ns
    r = x.copy()
    for _ in range(cfg.max_paths):
        tau, _ = d.best_delay(r)
        p = d.pulse(tau)
        a = (p @ r) / (p @ p)
        power = abs(a) ** 2
        if alphas and power < stop_ratio * max(abs(b) ** 2 for b in alphas):
            break
        taus.append(tau)
        alphas.append(a)
        pulses.append(p)
        r = r - a * p
        # re-fit earlier paths now that the new one is explained
        for _ in range(cfg.init_sweeps):
            r, _ = _sweep(d, r, taus, alphas, pulses, half)
        if np.vdot(r, r).real <= 1e-24 * energy:
            break

    history = [float(np.vdot(r, r).real)]
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iterations + 1):
        r, change = _sweep(d, r, taus, alphas, pulses, half)
        history.append(float(np.vdot(r, r).real))
        if change < cfg.convergence_tol:
            converged = True
            break

    taus, alphas = _merge_and_prune(np.array(taus), np.array(alphas, dtype=complex), d.step, cfg.prune_floor_db)
    if taus.size:
        P = pulse_matrix(taus, x.size, cfg.tap_spacing_ns)
        alphas, *_ = np.linalg.lstsq(P.T.astype(complex), x, rcond=1e-8)
        r = x - alphas @ P
    order = np.argsort(taus, kind="stable")
    mpcs = [
        MultipathComponent.from_complex(float(taus[i]), complex(alphas[i]), path_id=n)
        for n, i in enumerate(order)
        if abs(alphas[i]) > 0.0
    ]
    return SageResult(
        mpcs=mpcs,
        residual_energy=float(np.vdot(r, r).real),
        residual_history=history,
        iterations=sweeps if cfg.max_iterations else 0,
        converged=converged,
        input_energy=energy,
    )


def _sweep(d, r, taus, alphas, pulses, half):
    """One SAGE pass over every path, in place; returns the new residual and
    the largest relative parameter change."""
    change = 0.0
    for l in range(len(taus)):
        xl = r + alphas[l] * pulses[l]
        current = d.score(taus[l], xl)
        tau, best = d.best_delay(xl, taus[l] - half, taus[l] + half)
        if best <= current:
            tau = taus[l]
        p = d.pulse(tau) if tau != taus[l] else pulses[l]
        a = (p @ xl) / (p @ p)
        change = max(
            change,
            abs(tau - taus[l]) / max(taus[l], d.spacing),
            abs(a - alphas[l]) / max(abs(alphas[l]), 1e-300),
        )
        taus[l], alphas[l], pulses[l] = tau, a, p
        r = xl - a * p
    return r, change


def _merge_and_prune(taus, alphas, min_sep, floor_db):
    if taus.size == 0:
        return taus, alphas
    # paths that collapsed onto (almost) the same delay are one path
    order = np.argsort(taus, kind="stable")
    taus, alphas = taus[order], alphas[order]
    mt, ma = [taus[0]], [alphas[0]]
    for t, a in zip(taus[1:], alphas[1:]):
        if t - mt[-1] < min_sep:
            if abs(a) > abs(ma[-1]):
                mt[-1] = t
            ma[-1] = ma[-1] + a
        else:
            mt.append(t)
            ma.append(a)
    taus, alphas = np.array(mt), np.array(ma, dtype=complex)
    power = np.abs(alphas) ** 2
    if power.max() == 0.0:
        return taus[:0], alphas[:0]
    keep = power >= power.max() * 10.0 ** (floor_db / 10.0)
    return taus[keep], alphas[keep]


def estimate_mpcs(cir, cfg: EstimatorConfig | None = None) -> list:
    """Components estimated by :func:`sage`, sorted by delay."""
    return sage(cir, cfg).mpcs
