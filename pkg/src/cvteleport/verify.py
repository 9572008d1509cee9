"""Oracle harness: closed forms against brute-force truncated-Fock numerics.

Every check produces a :class:`VerificationReport` made of :class:`Case`
records; a case passes iff its absolute error is within its tolerance.
Suites bundle the checks over fixed parameter grids and can be spread over
a process pool without changing the report.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math
import time

import numpy as np

from .analytic import analytic_output_state, capacity, channel_fidelity, holevo_quantity
from .channel import (
    MEMBER_SCHEME,
    ENSEMBLE_SCHEME,
    ChannelParams,
    IntegrationScheme,
    apply_channel,
    discretized_gaussian_ensemble,
    ensemble_average_state,
    monte_carlo_channel,
)
from .errors import ConvergenceFailure, DomainError
from .fock import (
    DEFAULT_TAIL_TOL,
    DensityMatrix,
    TruncationConfig,
    coherent_state,
    overlap,
    thermal_state,
)

STATE_TOL = 1e-6
ENTROPIC_TOL = 1e-4
CONVERGENCE_THRESHOLD = 1e-6
# Successive differences below this are round-off and count as converged.
ROUNDOFF_FLOOR = 1e-12
DEFAULT_DIM_MAX = 512
MC_SAMPLES = 100_000
MC_Z_LIMIT = 5.0

NBAR_GRID = (0.2, 0.8)
T_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
S_GRID = (0.0, 0.5, 1.0, 2.0)
ALPHA_GRID = (0, 1, 2j, 1.5 + 0.5j)
LADDER_DIMS = (32, 64, 128, 256)


@dataclass
class Case:
    name: str
    analytic: float
    numeric: float
    abs_error: float
    tol: float
    inputs: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.abs_error <= self.tol)

    def record(self):
        return (
            f"case={self.name} analytic={_fmt(self.analytic)} numeric={_fmt(self.numeric)} "
            f"err={_fmt(self.abs_error)} tol={_fmt(self.tol)} pass={int(self.passed)}"
        )


@dataclass
class VerificationReport:
    suite_name: str
    cases: list = field(default_factory=list)
    dims_used: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.cases)

    def records(self):
        return "".join(c.record() + "\n" for c in self.cases)

    def table(self):
        width = max([len(c.name) for c in self.cases] + [4])
        lines = [f"{'case':<{width}}  {'analytic':>14}  {'numeric':>14}  {'err':>9}  {'tol':>9}  result"]
        for c in self.cases:
            lines.append(
                f"{c.name:<{width}}  {c.analytic:>14.9g}  {c.numeric:>14.9g}  "
                f"{c.abs_error:>9.2e}  {c.tol:>9.2e}  {'PASS' if c.passed else 'FAIL'}"
            )
        n_pass = sum(c.passed for c in self.cases)
        lines.append(
            f"{self.suite_name}: {n_pass}/{len(self.cases)} passed, "
            f"dims {sorted(set(self.dims_used))}, {self.wall_time:.1f} s"
        )
        return "\n".join(lines)

    @classmethod
    def merge(cls, suite_name, reports):
        out = cls(suite_name)
        for r in reports:
            out.cases.extend(r.cases)
            out.dims_used.extend(r.dims_used)
            out.wall_time += r.wall_time
        return out


@dataclass(frozen=True)
class ModulationProblem:
    """Maximize the Holevo quantity over Gaussian modulation variance in ``[0, nbar_cap]``."""

    nbar_cap: float
    params: ChannelParams
    cfg: TruncationConfig | None = None
    scheme: IntegrationScheme = ENSEMBLE_SCHEME
    channel_scheme: IntegrationScheme = MEMBER_SCHEME

    def __post_init__(self):
        if self.nbar_cap < 0:
            raise DomainError(f"energy budget must be >= 0, got {self.nbar_cap!r}")


def _fmt(x):
    return repr(float(x))


def _label(**kw):
    parts = []
    for k, v in kw.items():
        if isinstance(v, complex):
            v = format_complex(v)
        elif isinstance(v, float):
            v = f"{v:g}"
        parts.append(f"{k}={v}")
    return "[" + ",".join(parts) + "]"


def format_complex(z):
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:g}"
    if z.real == 0:
        return f"{z.imag:g}i"
    return f"{z.real:g}{z.imag:+g}i"


def _params_label(params):
    if params.T is None:
        return {"nbar_s": params.nbar_s}
    return {"T": params.T, "s": params.s}


def numeric_capacity(nbar, params, cfg, scheme=ENSEMBLE_SCHEME, channel_scheme=MEMBER_SCHEME):
    """Holevo quantity of the discretized Gaussian ensemble at a fixed truncation."""
    ens = discretized_gaussian_ensemble(nbar, params, scheme, cfg, channel_scheme)
    return holevo_quantity(ens)


def numeric_fidelity(alpha, params, cfg, scheme=None):
    psi = coherent_state(alpha, cfg)
    out = apply_channel(DensityMatrix.from_state(psi), params, scheme, cfg)
    return overlap(psi, out)


def verify_capacity(nbar, params, tol=ENTROPIC_TOL, dim_max=DEFAULT_DIM_MAX,
                    scheme=ENSEMBLE_SCHEME, channel_scheme=MEMBER_SCHEME):
    """Numeric Holevo quantity against the closed-form capacity.

    The truncation starts where a thermal tail of mean ``nbar + nbar_s``
    drops below ``tol / 100`` and doubles until two rungs agree within
    ``tol / 10``.
    """
    if not tol > 0:
        raise DomainError("tol must be > 0")
    start = time.perf_counter()
    tail_tol = min(DEFAULT_TAIL_TOL * 1e4, tol / 100)
    dim = TruncationConfig.for_mean(nbar + params.nbar_s, tail_tol=tail_tol).dim
    dims, prev, value = [], None, None
    while True:
        if dim > dim_max:
            raise ConvergenceFailure(
                f"capacity at nbar={nbar}, nbar_s={params.nbar_s} did not converge "
                f"below {tol / 10:.1e} by dim {dim_max} (rungs {dims})"
            )
        value = numeric_capacity(nbar, params, TruncationConfig(dim, tail_tol), scheme, channel_scheme)
        dims.append(dim)
        if nbar == 0 or (prev is not None and abs(value - prev) < tol / 10):
            break
        prev, dim = value, 2 * dim
    expected = capacity(nbar, params)
    case = Case(
        "capacity" + _label(nbar=nbar, **_params_label(params)),
        expected, value, abs(value - expected), tol,
        inputs={"nbar": nbar, "nbar_s": params.nbar_s},
    )
    return VerificationReport("capacity", [case], dims, time.perf_counter() - start)


def verify_fidelity(alpha, params, tol=STATE_TOL, cfg=None):
    """Overlap of the numeric channel output with the input against ``1 / (1 + nbar_s)``."""
    start = time.perf_counter()
    cfg = TruncationConfig.for_mean(abs(alpha) ** 2 + params.nbar_s) if cfg is None else cfg
    value = numeric_fidelity(alpha, params, cfg)
    expected = channel_fidelity(params)
    case = Case(
        "fidelity" + _label(alpha=complex(alpha), **_params_label(params)),
        expected, value, abs(value - expected), tol,
        inputs={"alpha": complex(alpha), "nbar_s": params.nbar_s},
    )
    return VerificationReport("fidelity", [case], [cfg.dim], time.perf_counter() - start)


def verify_fidelity_independence(params, alphas=ALPHA_GRID, tol=STATE_TOL):
    """Fidelity at each alpha plus the spread across alphas as a separate case."""
    reports = [verify_fidelity(a, params, tol) for a in alphas]
    report = VerificationReport.merge("fidelity", reports)
    values = [r.cases[0].numeric for r in reports]
    spread = max(values) - min(values)
    report.cases.append(Case(
        "fidelity-spread" + _label(**_params_label(params)),
        min(values), max(values), spread, tol,
    ))
    return report


def verify_output_state(alpha, params, tol=STATE_TOL, cfg=None, n_eigs=10):
    """Integrated channel output against the displaced thermal closed form.

    Two cases: the largest entrywise deviation, and the largest deviation
    of the top ``n_eigs`` eigenvalues from the geometric distribution.
    """
    start = time.perf_counter()
    cfg = TruncationConfig.for_mean(abs(alpha) ** 2 + params.nbar_s) if cfg is None else cfg
    psi = coherent_state(alpha, cfg)
    numeric = apply_channel(DensityMatrix.from_state(psi), params, cfg=cfg)
    expected = analytic_output_state(alpha, params, cfg)
    diff = np.abs(numeric.mat - expected.mat)
    worst = np.unravel_index(np.argmax(diff), diff.shape)
    label = _label(alpha=complex(alpha), **_params_label(params))
    cases = [Case(
        "output-state" + label,
        abs(expected.mat[worst]), abs(numeric.mat[worst]), float(diff[worst]), tol,
    )]

    ns = params.nbar_s
    n = np.arange(n_eigs)
    geometric = (n == 0).astype(float) if ns == 0 else ns**n / (1.0 + ns) ** (n + 1)
    eigs = numeric.eigenvalues()[:n_eigs]
    gap = np.abs(eigs - geometric)
    k = int(np.argmax(gap))
    cases.append(Case("output-spectrum" + label, geometric[k], eigs[k], float(gap[k]), tol))
    return VerificationReport("output-state", cases, [cfg.dim], time.perf_counter() - start)


def verify_monte_carlo(nbar_s, seed, samples=MC_SAMPLES, cfg=None):
    """Monte-Carlo channel on the vacuum against radial quadrature.

    The case error is the largest ``|difference| / standard error`` over
    entries the sample size can resolve (``|entry| >= 10 / samples``);
    deeper entries are set by a handful of rare samples and carry no usable
    error estimate.
    """
    start = time.perf_counter()
    params = ChannelParams.from_noise(nbar_s)
    cfg = TruncationConfig.for_mean(nbar_s) if cfg is None else cfg
    vac = DensityMatrix.from_state(coherent_state(0, cfg))
    scheme = IntegrationScheme(kind="monte_carlo", samples=samples, seed=seed)
    mc, stderr = monte_carlo_channel(vac, params, scheme, cfg)
    quad = apply_channel(vac, params, cfg=cfg)
    resolvable = np.abs(quad.mat) >= 10.0 / samples
    z = np.abs(mc.mat - quad.mat)[resolvable] / stderr[resolvable]
    case = Case(
        "monte-carlo-zscore" + _label(nbar_s=nbar_s, seed=seed, samples=samples),
        0.0, float(z.max()), float(z.max()), MC_Z_LIMIT,
    )
    return VerificationReport("output-state", [case], [cfg.dim], time.perf_counter() - start)


def verify_average_state(nbar, params, tol=STATE_TOL, cfg=None):
    start = time.perf_counter()
    variance = nbar + params.nbar_s
    cfg = TruncationConfig.for_mean(variance) if cfg is None else cfg
    numeric = ensemble_average_state(nbar, params, cfg=cfg)
    expected = thermal_state(variance, cfg)
    diff = np.abs(numeric.mat - expected.mat)
    worst = np.unravel_index(np.argmax(diff), diff.shape)
    case = Case(
        "average-state" + _label(nbar=nbar, **_params_label(params)),
        abs(expected.mat[worst]), abs(numeric.mat[worst]), float(diff[worst]), tol,
    )
    return VerificationReport("average-state", [case], [cfg.dim], time.perf_counter() - start)


INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section_max(f, a, b, tol):
    """Golden-section search for the maximum of ``f`` on ``[a, b]``.

    Returns the final bracket ``(lo, hi)`` with ``hi - lo <= tol``.
    Assumes ``f`` is unimodal on the interval.
    """
    h = b - a
    if h <= tol:
        return a, b
    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = b - INV_PHI * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    for _ in range(steps - 1):
        if not (math.isfinite(fc) and math.isfinite(fd)):
            raise ConvergenceFailure("objective returned a non-finite value")
        h *= INV_PHI
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * h
            fd = f(d)
    return (a, d) if fc > fd else (c, b)


def optimize_modulation(prob, tol=ENTROPIC_TOL):
    """Best Gaussian modulation variance under the mean-photon budget.

    Golden-section search narrows the bracket to width ``tol``; the
    bracket midpoint is then compared with both ends of the feasible
    interval, since the optimum of a monotone objective sits on the
    boundary. Returns ``(nu_star, chi_star, report)``.
    """
    start = time.perf_counter()
    params = prob.params
    cap = prob.nbar_cap
    cfg = prob.cfg
    if cfg is None:
        tail_tol = min(DEFAULT_TAIL_TOL * 1e4, tol / 100)
        cfg = TruncationConfig.for_mean(cap + params.nbar_s, tail_tol=tail_tol)
    seen = {}

    def objective(nu):
        if nu not in seen:
            seen[nu] = numeric_capacity(nu, params, cfg, prob.scheme, prob.channel_scheme)
        return seen[nu]

    lo, hi = golden_section_max(objective, 0.0, cap, tol)
    candidates = [0.5 * (lo + hi), 0.0, cap]
    nu_star = max(candidates, key=objective)
    chi_star = objective(nu_star)

    label = _label(nbar=cap, **_params_label(params))
    expected = capacity(cap, params)
    cases = [
        Case("modulation-nu" + label, cap, nu_star, abs(nu_star - cap), 10 * tol),
        Case("modulation-chi" + label, expected, chi_star, abs(chi_star - expected), tol),
    ]
    report = VerificationReport("modulation", cases, [cfg.dim], time.perf_counter() - start)
    return nu_star, chi_star, report


def convergence_study(quantity, nbar, params, dims=LADDER_DIMS, alpha=None,
                      threshold=CONVERGENCE_THRESHOLD):
    """Evaluate a numeric quantity along a truncation ladder.

    Rungs use a permissive tail tolerance since the point of the study is
    to expose truncation error. Each successive difference is a case whose
    tolerance is the previous difference (differences must shrink, with
    round-off level ties allowed); the last one must also fall below
    ``threshold``. For fidelity the input is ``|alpha>`` with
    ``alpha = sqrt(nbar)`` unless given.
    """
    if quantity not in ("capacity", "fidelity"):
        raise DomainError(f"unknown quantity {quantity!r}")
    start = time.perf_counter()
    alpha = math.sqrt(nbar) if alpha is None else alpha
    values = []
    for dim in dims:
        cfg = TruncationConfig(dim, tail_tol=0.5)
        if quantity == "capacity":
            values.append(numeric_capacity(nbar, params, cfg))
        else:
            values.append(numeric_fidelity(alpha, params, cfg))

    label = {"nbar": nbar, **_params_label(params)}
    if quantity == "fidelity":
        label = {"alpha": complex(alpha), **_params_label(params)}
    cases = []
    prev_diff = math.inf
    for i in range(1, len(dims)):
        diff = abs(values[i] - values[i - 1])
        tol = max(prev_diff, ROUNDOFF_FLOOR)
        if i == len(dims) - 1:
            tol = min(tol, threshold)
        name = f"convergence-{quantity}" + _label(**label, dims=f"{dims[i - 1]}->{dims[i]}")
        cases.append(Case(name, values[i - 1], values[i], diff, tol))
        prev_diff = diff
    return VerificationReport("convergence", cases, list(dims), time.perf_counter() - start)


SUITES = ("capacity", "fidelity", "output-state", "average-state", "modulation", "convergence")


def suite_tasks(suite, tol=None, dim_max=DEFAULT_DIM_MAX, seed=0):
    """Ordered ``(function name, kwargs)`` tasks making up a suite."""
    names = SUITES if suite == "all" else (suite,)
    tasks = []
    for name in names:
        if name == "capacity":
            for nbar in NBAR_GRID:
                for T in T_GRID:
                    for s in S_GRID:
                        tasks.append(("capacity", dict(
                            nbar=nbar, T=T, s=s, tol=tol or ENTROPIC_TOL, dim_max=dim_max)))
        elif name == "fidelity":
            for T in T_GRID:
                for s in S_GRID:
                    tasks.append(("fidelity", dict(T=T, s=s, tol=tol or STATE_TOL)))
        elif name == "output-state":
            for alpha in (0, 1):
                for ns in (0.0, 0.5, 1.0, 2.0):
                    tasks.append(("output-state", dict(alpha=alpha, nbar_s=ns, tol=tol or STATE_TOL)))
            for ns in (0.5, 1.0, 2.0):
                tasks.append(("monte-carlo", dict(nbar_s=ns, seed=seed)))
        elif name == "average-state":
            tasks.append(("average-state", dict(nbar=0.0, nbar_s=0.0, tol=tol or STATE_TOL)))
            for nbar in NBAR_GRID:
                for T in (0.0, 0.5, 1.0):
                    for s in (0.5, 1.0):
                        tasks.append(("average-state", dict(nbar=nbar, T=T, s=s, tol=tol or STATE_TOL)))
        elif name == "modulation":
            for nbar in NBAR_GRID:
                for T, s in ((0.5, 1.0), (1.0, 2.0)):
                    tasks.append(("modulation", dict(nbar=nbar, T=T, s=s, tol=tol or ENTROPIC_TOL)))
        elif name == "convergence":
            dims = tuple(d for d in LADDER_DIMS if d <= dim_max)
            for quantity in ("capacity", "fidelity"):
                for nbar in NBAR_GRID:
                    tasks.append(("convergence", dict(quantity=quantity, nbar=nbar, T=0.0, s=0.0, dims=dims)))
        else:
            raise DomainError(f"unknown suite {name!r}")
    return tasks


def _params(kw):
    if "nbar_s" in kw:
        return ChannelParams.from_noise(kw.pop("nbar_s"))
    return ChannelParams.from_ts(kw.pop("T"), kw.pop("s"))


def run_task(task):
    kind, kwargs = task
    kw = dict(kwargs)
    params = _params(kw) if kind != "monte-carlo" else None
    if kind == "capacity":
        return verify_capacity(kw["nbar"], params, kw["tol"], kw["dim_max"])
    if kind == "fidelity":
        return verify_fidelity_independence(params, tol=kw["tol"])
    if kind == "output-state":
        return verify_output_state(kw["alpha"], params, kw["tol"])
    if kind == "monte-carlo":
        return verify_monte_carlo(kw["nbar_s"], kw["seed"])
    if kind == "average-state":
        return verify_average_state(kw["nbar"], params, kw["tol"])
    if kind == "modulation":
        _, _, report = optimize_modulation(ModulationProblem(kw["nbar"], params), kw["tol"])
        return report
    if kind == "convergence":
        return convergence_study(kw["quantity"], kw["nbar"], params, kw["dims"])
    raise DomainError(f"unknown task {kind!r}")


def run_suite(suite, tol=None, dim_max=DEFAULT_DIM_MAX, seed=0, jobs=1):
    """Run a suite; cases come back in task order whatever ``jobs`` is."""
    start = time.perf_counter()
    tasks = suite_tasks(suite, tol, dim_max, seed)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_task, tasks))
    else:
        reports = [run_task(t) for t in tasks]
    merged = VerificationReport.merge(suite, reports)
    merged.wall_time = time.perf_counter() - start
    return merged
