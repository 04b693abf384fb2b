"""Experiment drivers shared by the command line and the test suite.

Each ``run_*`` function takes a validated :class:`ExperimentConfig` and
returns a :class:`RunResult` holding CSV tables and text reports; file
output lives in :mod:`heom1f.io`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytics, bath, control, crgate, heom, tomography

PLUS = 0.5 * np.ones((2, 2), dtype=complex)
STATES = {"plus": PLUS,
          "zero": np.diag([1.0, 0.0]).astype(complex),
          "one": np.diag([0.0, 1.0]).astype(complex)}


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    texts: dict = field(default_factory=dict)    # name -> str
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# noise models


@dataclass(frozen=True)
class Noise:
    """Per-qubit dephasing environment used by every driver.

    ``mode`` is one of ``none``, ``full_1f``, ``cutoff_plus_static``,
    ``total_static`` and ``lindblad``.  ``series`` includes any static
    term.
    """

    mode: str
    series: bath.ExponentialSeries = field(default_factory=bath.ExponentialSeries)
    t_phi: float | None = None
    static_depth: int = 40
    static_check: bool = True

    def channels(self, n_qubits=1):
        if self.mode in ("none", "lindblad"):
            return []
        return [heom.DissipationChannel.sigma_z(self.series, q, n_qubits) for q in range(n_qubits)]

    def describe(self):
        out = {"mode": self.mode, "n_terms": len(self.series),
               "static_variance": self.series.static_variance,
               "certified_error": self.series.certified_error}
        if self.t_phi is not None:
            out["t_phi_ns"] = self.t_phi
        return out


def make_noise(mode, model=None, horizon=None, tolerance=1e-3, k_max=40, quad=bath.DEFAULT_QUAD,
               static_variance=None, t_phi=None, static_depth=40, static_check=True):
    """Build a :class:`Noise` from a bath model.

    ``total_static`` defaults its variance to the total power
    ``int_0^inf S dw`` of ``model``.
    """
    kw = {"static_depth": static_depth, "static_check": static_check}
    if mode == "none":
        return Noise("none", **kw)
    if mode == "lindblad":
        if t_phi is None:
            raise ValueError("lindblad noise needs t_phi")
        return Noise("lindblad", t_phi=float(t_phi), **kw)
    if mode == "total_static":
        v = bath.band_variance(model, 0.0, math.inf, quad) if static_variance is None else static_variance
        return Noise("total_static", bath.ExponentialSeries(static_variance=float(v)), **kw)
    series = bath.fit_exponentials(model, horizon, tolerance, k_max, quad)
    if mode == "cutoff_plus_static":
        if static_variance is None:
            raise ValueError("cutoff_plus_static noise needs a static variance")
        series = series.with_static(static_variance)
    elif mode != "full_1f":
        raise ValueError(f"unknown noise mode {mode!r}")
    return Noise(mode, series, **kw)


def evolve(noise, rho0, hamiltonian, t_span, config, sample_times=None, n_qubits=1):
    """Propagate ``rho0`` (or a stack) under ``noise``; returns a Trajectory."""
    if noise.mode == "lindblad":
        return heom.lindblad_propagate(rho0, hamiltonian, 1.0 / noise.t_phi, t_span, config.dt,
                                       sample_times, n_qubits)
    if noise.mode == "total_static":
        return heom.static_disorder_propagate(
            rho0, hamiltonian, noise.series.static_variance, noise.static_depth, t_span,
            dt=config.dt, sample_times=sample_times, n_qubits=n_qubits, stepper=config.stepper,
            convergence_tol=1e-6 if noise.static_check else None)
    return heom.simulate(noise.channels(n_qubits), rho0, hamiltonian, t_span, config, sample_times)


def sample_grid(t_end, step):
    n = int(round(t_end / step))
    grid = np.arange(n + 1) * step
    grid = grid[grid < t_end - 1e-9]
    return np.append(grid, t_end)


def noise_from_config(cfg, horizon):
    b = cfg.bath
    fit = b.get("fit", {})
    return make_noise(b["noise"], cfg.bath_model(), horizon=fit.get("horizon_ns", horizon),
                      tolerance=fit["tolerance"], k_max=fit["k_max"], quad=cfg.quad_config(),
                      static_variance=b.get("static_variance"), t_phi=b.get("t_phi_ns"),
                      static_depth=cfg.solver["static_depth"], static_check=cfg.solver["static_check"])


def propagator_config(cfg, depth=None):
    s = cfg.solver
    return heom.PropagatorConfig(depth=s["depth"] if depth is None else depth, dt=s["dt_ns"],
                                 stepper=s["stepper"], scheme=s["scheme"], max_ados=s["max_ados"])


# ---------------------------------------------------------------------------
# single-qubit pure dephasing


def reference_coherence(noise, model, times, rho01_0=0.5, quad=bath.DEFAULT_QUAD):
    """Closed-form |rho01| for the given noise model (used as an oracle column)."""
    times = np.asarray(times, dtype=float)
    v = noise.series.static_variance
    if noise.mode == "none":
        return np.full(times.shape, abs(rho01_0))
    if noise.mode == "lindblad":
        return analytics.lindblad_coherence(times, noise.t_phi, rho01_0)
    if noise.mode == "total_static":
        return analytics.gaussian_static_coherence(times, v, rho01_0)
    g = analytics.dephasing_exponent(times, model, quad)
    return abs(rho01_0) * np.exp(-g - 2.0 * v * times**2)


def trajectory_rows(traj):
    rows = []
    d = traj.rhos.shape[-1]
    for t, rho in zip(traj.times, traj.rhos):
        row = [float(t)]
        for i in range(d):
            for j in range(i, d):
                row += [float(rho[i, j].real), float(rho[i, j].imag)]
        row.append(float(abs(rho[0, 1])))
        rows.append(row)
    header = ["t_ns"]
    for i in range(d):
        for j in range(i, d):
            header += [f"re_rho_{i}{j}", f"im_rho_{i}{j}"]
    header.append("abs_rho_01")
    return header, rows


def run_free_dephasing(cfg):
    t_end = cfg.output["t_end_ns"]
    model = cfg.bath_model()
    noise = noise_from_config(cfg, t_end)
    times = sample_grid(t_end, cfg.output["sample_ns"])
    rho0 = STATES[cfg.system["initial_state"]]
    traj = evolve(noise, rho0, None, (0.0, t_end), propagator_config(cfg), times)
    ref = reference_coherence(noise, model, times, abs(rho0[0, 1]), cfg.quad_config())
    dev = np.abs(traj.coherence - ref)
    res = RunResult()
    res.tables["trajectory"] = trajectory_rows(traj)
    res.tables["oracle"] = (["t_ns", "abs_rho_01", "reference", "abs_difference"],
                            [[float(t), float(a), float(b), float(c)]
                             for t, a, b, c in zip(times, traj.coherence, ref, dev)])
    res.texts["report"] = (f"noise: {noise.mode}\nmax_abs_deviation: {dev.max():.6e}\n"
                           f"n_ados: {traj.meta.get('n_ados', 1)}\n")
    res.meta.update(noise=noise.describe(), max_abs_deviation=float(dev.max()))
    return res


def run_tnl_compare(cfg):
    t_end = cfg.output["t_end_ns"]
    model = cfg.bath_model()
    noise = noise_from_config(cfg, t_end)
    times = sample_grid(t_end, cfg.output["sample_ns"])
    depths = list(cfg.solver["tnl_depths"])
    ref_depth = cfg.solver["reference_depth"]
    base = propagator_config(cfg)
    curves = {}
    for L in depths:
        c = heom.perturbative_truncation(base, L)
        curves[L] = evolve(noise, PLUS, None, (0.0, t_end), c, times).coherence
    reference = evolve(noise, PLUS, None, (0.0, t_end), replace(base, depth=ref_depth), times).coherence
    exact = reference_coherence(noise, model, times, 0.5, cfg.quad_config())
    header = ["t_ns", "analytic"] + [f"tnl_order_{2 * L}" for L in depths] + [f"heom_L{ref_depth}"]
    rows = [[float(t), float(exact[i])] + [float(curves[L][i]) for L in depths] + [float(reference[i])]
            for i, t in enumerate(times)]
    res = RunResult()
    res.tables["tnl_compare"] = (header, rows)
    self_err = float(np.max(np.abs(reference - exact)))
    lines = [f"reference_depth: {ref_depth}", f"reference_self_error: {self_err:.6e}"]
    for L in depths:
        dev = curves[L] - reference
        lines.append(f"order_{2 * L}: max|dev| = {np.max(np.abs(dev)):.6e}, "
                     f"max overshoot = {np.max(curves[L] - exact):.6e}")
    res.texts["report"] = "\n".join(lines) + "\n"
    res.meta.update(noise=noise.describe())
    return res


# ---------------------------------------------------------------------------
# dynamical decoupling


def build_schedule(kind, sequence, sched, ideal=False):
    if kind == "cpmg":
        return control.cpmg_schedule(sched["pulses"], sequence, sched["tau_ns"], sched["gap_ns"],
                                     sched.get("first_ns"), ideal=ideal)
    return control.udd_schedule(sched["pulses"], sched["total_ns"], sched["tau_ns"], sequence, ideal=ideal)


def run_sequence(noise, schedule, config, sample_ns=0.5, rho0=PLUS):
    times = sample_grid(schedule.total_time, sample_ns)
    h = control.schedule_hamiltonian(schedule)
    return evolve(noise, rho0, h, (0.0, schedule.total_time), config, times)


@dataclass
class SequenceResult:
    schedule: control.PulseSchedule
    finite: heom.Trajectory
    ideal: heom.Trajectory | None
    echoes: analytics.EchoSeries


def decoupling_study(noise, schedules, config, sample_ns=0.5, abscissa="n", ideal_reference=True):
    """Finite and ideal-pulse runs for each labelled schedule."""
    out = {}
    for label, sch in schedules.items():
        fin = run_sequence(noise, sch, config, sample_ns)
        ide = run_sequence(noise, sch.as_ideal(), config, sample_ns) if ideal_reference else None
        out[label] = SequenceResult(sch, fin, ide, analytics.echo_peaks(fin, sch, ide, abscissa))
    return out


def _subset(series, which):
    return {"all": series, "odd": series.odd(), "even": series.even()}[which]


def run_decoupling(cfg):
    kind = cfg.experiment
    sched = cfg.schedule
    schedules = {s: build_schedule(kind, s, sched) for s in sched["sequences"]}
    horizon = max(s.total_time for s in schedules.values())
    noise = noise_from_config(cfg, horizon)
    abscissa = "n" if kind == "cpmg" else "t"
    study = decoupling_study(noise, schedules, propagator_config(cfg), cfg.output["sample_ns"],
                             abscissa, sched["ideal_reference"])
    res = RunResult()
    for label, r in study.items():
        res.tables[f"trajectory_{label}"] = trajectory_rows(r.finite)
        res.tables[f"echo_{label}"] = (["n_or_t", "peak", "delta"], r.echoes.rows())
        lines = [f"sequence: {label}", f"abscissa: {abscissa}", f"subset: {sched['fit_subset']}"]
        ser = _subset(r.echoes, sched["fit_subset"])
        if sched["ideal_reference"]:
            for model in ("linear", "quadratic"):
                try:
                    lines.append(analytics.fit_error_scaling(ser, model).report())
                except ValueError as exc:
                    lines.append(f"model: {model}\nunavailable: {exc}")
        lines.append(f"max_population_error: {r.echoes.population.max():.6e}")
        res.texts[f"fit_{label}"] = "\n".join(lines) + "\n"
    res.meta.update(noise=noise.describe())
    return res


def run_schedule_dump(cfg):
    kind = "udd" if cfg.experiment == "udd" else "cpmg"
    res = RunResult()
    for s in cfg.schedule["sequences"]:
        sch = build_schedule(kind, s, cfg.schedule)
        res.tables[f"schedule_{s}"] = (["index", "start_ns", "duration_ns", "axis"],
                                       [list(r) for r in sch.dump_rows()])
    return res


# ---------------------------------------------------------------------------
# bath decomposition


def run_decompose(cfg):
    model = cfg.bath_model()
    quad = cfg.quad_config()
    fit = cfg.bath.get("fit", {})
    horizon = fit.get("horizon_ns", cfg.output["t_end_ns"])
    series = bath.fit_exponentials(model, horizon, fit["tolerance"], fit["k_max"], quad)
    rows = [[k, float(d.real), float(d.imag), float(g.real), float(g.imag)]
            for k, (d, g) in enumerate(series.terms)]
    c0 = bath.power_scale(model, quad)
    dense = np.linspace(0.0, horizon, 2001)
    remeasured = float(np.max(np.abs(bath.reconstruct(series, dense)
                                     - bath.correlation_function(dense, model, quad))) / abs(c0))
    lines = [f"n_terms: {len(series)}",
             f"horizon_ns: {horizon}",
             f"certified_error: {series.certified_error:.6e}",
             f"remeasured_error: {remeasured:.6e}",
             f"C0: {c0:.12e}",
             f"total_variance: {bath.band_variance(model, 0.0, math.inf, quad):.12e}",
             f"static_variance_below_low_cutoff: {bath.band_variance(model, 0.0, model.omega_lc, quad):.12e}",
             f"t_phi_ns: {bath.t_phi_estimate(model, quad):.6f}"]
    res = RunResult()
    res.tables["series"] = (["k", "re_d", "im_d", "re_gamma", "im_gamma"], rows)
    res.texts["report"] = "\n".join(lines) + "\n"
    res.meta.update(certified_error=series.certified_error, n_terms=len(series))
    return res


# ---------------------------------------------------------------------------
# cross resonance


def cr_channels(params, noise, config, times):
    """Noisy and noiseless Choi matrices of the calibrated gate at ``times``.

    Pre-rotations act on the inputs (all auxiliary operators are zero at
    t = 0) and post-rotations on every sampled output.
    """
    inputs, _ = tomography.hermitian_inputs(4)
    pre = crgate.pre_unitary(params)
    post = crgate.post_unitary(params)
    rho0 = pre @ inputs @ pre.conj().T
    h = crgate.cr_static_hamiltonian(params)
    traj = evolve(noise, rho0, h, (0.0, params.duration), config, times, n_qubits=2)
    outs = post @ traj.rhos @ post.conj().T
    chi_noisy = tomography.choi(channel_from_stack(outs))
    chi_cal = np.array([tomography.choi(tomography.unitary_channel(crgate.calibrated_propagator(params, t)))
                        for t in traj.times])
    return traj.times, chi_noisy, chi_cal, traj.meta


def channel_from_stack(outs):
    return tomography.channel_from_outputs(outs, outs.shape[-1])


def run_cr_fidelity(cfg):
    params = _calibrated_or_given(cfg)
    noise = noise_from_config(cfg, params.duration)
    times = sample_grid(params.duration, cfg.output["sample_ns"])
    t, chi_n, chi_c, _ = cr_channels(params, noise, propagator_config(cfg), times)
    F = tomography.gate_fidelity(chi_n, chi_c)
    res = RunResult()
    res.tables["fidelity"] = (["t_ns", "fidelity", "infidelity"],
                              [[float(a), float(b), float(1.0 - b)] for a, b in zip(t, F)])
    q = t <= 0.25 * params.duration + 1e-9
    onset = analytics.fit_quadratic_onset(t[q], 1.0 - F[q])
    shapes = analytics.compare_decay_shapes(t[q], 1.0 - F[q])
    res.texts["report"] = (f"noise: {noise.mode}\nfinal_fidelity: {F[-1]:.8f}\n"
                           f"onset_a: {onset.a:.6e}\nonset_b: {onset.b:.6e}\nonset_r2: {onset.r2:.6f}\n"
                           f"onset_linear_fraction: {onset.linear_fraction:.6e}\n"
                           f"quadratic_rss: {shapes['quadratic_rss']:.6e}\n"
                           f"exponential_rss: {shapes['exp_rss']:.6e}\n")
    res.meta.update(noise=noise.describe())
    return res


def _matrix_table(M, labels):
    return (["row"] + list(labels), [[labels[i]] + [float(x) for x in M[i]] for i in range(M.shape[0])])


def run_cr_tomography(cfg):
    params = _calibrated_or_given(cfg)
    noise = noise_from_config(cfg, params.duration)
    t, chi_n, chi_c, meta = cr_channels(params, noise, propagator_config(cfg),
                                        np.array([0.0, params.duration]))
    chi = chi_n[-1]
    labels = crgate.pauli_labels(2)
    r_noisy = tomography.ptm_from_choi(chi)
    r_cal = tomography.ptm_from_choi(chi_c[-1])
    r_ideal = tomography.ptm(tomography.unitary_channel(crgate.ideal_unitary()))
    net = tomography.error_ptm(r_noisy, r_cal)
    coherent = tomography.error_ptm(r_cal, r_ideal)
    d = chi.shape[0]
    res = RunResult()
    res.tables["choi"] = (["row", "col", "re", "im"],
                          [[i, j, float(chi[i, j].real), float(chi[i, j].imag)]
                           for i in range(d) for j in range(d)])
    res.tables["ptm"] = _matrix_table(r_noisy, labels)
    res.tables["ptm_calibrated"] = _matrix_table(r_cal, labels)
    res.tables["ptm_ideal"] = _matrix_table(r_ideal, labels)
    res.tables["error_ptm"] = _matrix_table(net, labels)
    res.tables["coherent_error_ptm"] = _matrix_table(coherent, labels)
    checks = tomography.cp_tp_checks(chi)
    k = cfg.output["top_k"]
    res.texts["diagnostics"] = "\n".join(f"{a}: {b:.6e}" for a, b in checks.items()) + (
        f"\ngate_fidelity: {float(tomography.gate_fidelity(chi, chi_c[-1])):.10f}\n")
    res.texts["top_entries"] = ("net error (noisy - calibrated):\n"
                                + tomography.format_top_entries(tomography.top_entries(net, k))
                                + "\ncoherent error (calibrated - ideal):\n"
                                + tomography.format_top_entries(tomography.top_entries(coherent, k)) + "\n")
    res.meta.update(noise=noise.describe())
    return res


def _calibrated_or_given(cfg):
    """CR parameters from the config, optionally calibrated first (``system.cr.calibrate``)."""
    from .config import cr_params
    p = cr_params(cfg)
    if cfg.system["cr"].get("calibrate", False):
        c = cfg.calibration
        p, _ = crgate.calibrate(p, crgate.CalibrationSearch(target=c["target"]), c["max_iter"])
    return p


def run_calibrate_cr(cfg):
    from .config import cr_params
    seed = cr_params(cfg)
    c = cfg.calibration
    search = crgate.CalibrationSearch(target=c["target"], trivial=c["trivial"])
    params, report = crgate.calibrate(seed, search, c["max_iter"])
    res = RunResult()
    res.tables["calibrated_params"] = (["name", "value"], [[k, float(v)] for k, v in params.as_dict().items()])
    res.texts["report"] = report.summary() + "\n"
    res.meta.update(fidelity=report.fidelity, converged=report.converged)
    return res


RUNNERS = {
    "free_dephasing": run_free_dephasing,
    "tnl_compare": run_tnl_compare,
    "cpmg": run_decoupling,
    "udd": run_decoupling,
    "decompose": run_decompose,
    "cr_fidelity": run_cr_fidelity,
    "cr_tomography": run_cr_tomography,
    "calibrate_cr": run_calibrate_cr,
}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)
