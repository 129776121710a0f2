"""Learning from demonstration: trajectory preprocessing and GPR guide paths.

Recorded demonstrations are cleaned (consecutive duplicates removed),
resampled to a common length along arc length, and regressed with three
independent scalar Gaussian processes (one per axis) over the integer
index 0..N-1. The RBF kernel k(t,t') = sv * exp(-(t-t')^2 / (2*ls^2))
plus i.i.d. observation noise gives a smooth posterior mean path and a
95% confidence band (1.96 * posterior std per axis).

Demos share the same index grid, so the M-fold replicated system reduces
exactly to an N-point GP on the per-index target means with noise
variance nv/M; posterior and log marginal likelihood are computed from
that reduced system (the equivalence is covered by a dense-solve test).
Targets are centered on their per-axis mean, which acts as the GP's
constant mean function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .geometry import Vec3, as_points_array

DUPLICATE_TOL_UM = 1e-6
JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)  # relative to signal variance

DEMO_SCHEMA = "tims/demo/1"
GUIDEPATH_SCHEMA = "tims/guidepath/1"


class DegenerateDemoError(ValueError):
    """Fewer than 2 distinct points, or duplicates survive resampling."""


class NumericalError(RuntimeError):
    """Kernel factorization failed even at the jitter ceiling."""


class ExtrapolationError(ValueError):
    """Query index outside [0, N-1]; guidance must never extrapolate."""


@dataclass(frozen=True)
class GprHyperparams:
    length_scale: float        # index units
    signal_variance: float     # um^2
    noise_variance: float      # um^2

    def validate(self) -> "GprHyperparams":
        for name in ("length_scale", "signal_variance", "noise_variance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        return self


@dataclass
class Demonstration:
    points: np.ndarray          # (L, 3) um
    source_id: str = ""

    def __post_init__(self):
        self.points = as_points_array(self.points)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class DemonstrationSet:
    demos: list[Demonstration]
    resample_count: int = 200

    def validate(self) -> "DemonstrationSet":
        if not self.demos:
            raise ValueError("need at least one demonstration")
        n = self.resample_count
        for d in self.demos:
            if len(d) != n:
                raise ValueError(
                    f"demo {d.source_id!r} has {len(d)} points, expected {n}; preprocess first"
                )
        return self


@dataclass
class GuidePath:
    points: np.ndarray          # (N, 3) posterior means, um
    ci_halfwidth: np.ndarray    # (N, 3) 95% CI half-widths, um

    def __post_init__(self):
        self.points = as_points_array(self.points)
        self.ci_halfwidth = as_points_array(self.ci_halfwidth)
        if len(self.points) != len(self.ci_halfwidth):
            raise ValueError("points and ci_halfwidth lengths differ")
        if np.any(self.ci_halfwidth < 0):
            raise ValueError("ci_halfwidth must be non-negative")

    def __len__(self) -> int:
        return len(self.points)

    def point(self, i: int) -> Vec3:
        return Vec3.from_array(self.points[i])

    def to_json_obj(self) -> dict:
        return {
            "schema": GUIDEPATH_SCHEMA,
            "points": [[float(v) for v in row] for row in self.points],
            "ci": [[float(v) for v in row] for row in self.ci_halfwidth],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "GuidePath":
        if obj.get("schema") != GUIDEPATH_SCHEMA:
            raise ValueError(f"unsupported guide path schema: {obj.get('schema')!r}")
        return cls(np.array(obj["points"], dtype=float), np.array(obj["ci"], dtype=float))


def dedup_consecutive(raw: np.ndarray, tol: float = DUPLICATE_TOL_UM) -> np.ndarray:
    """Drop points whose every component is within tol of the previous kept point."""
    if len(raw) == 0:
        return raw
    keep = [0]
    for i in range(1, len(raw)):
        if np.max(np.abs(raw[i] - raw[keep[-1]])) >= tol:
            keep.append(i)
    return raw[keep]


def resample_arclength(points: np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to n points uniform in arc length, endpoints exact."""
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0:
        raise DegenerateDemoError("polyline has zero arc length")
    u = np.linspace(0.0, total, n)
    out = np.column_stack([np.interp(u, s, points[:, k]) for k in range(3)])
    out[0] = points[0]
    out[-1] = points[-1]
    return out


def preprocess(raw, n: int, source_id: str = "") -> Demonstration:
    """Clean one raw trajectory: dedup, then arc-length resample to exactly n points."""
    pts = as_points_array(raw)
    if not np.all(np.isfinite(pts)):
        raise ValueError("trajectory contains non-finite coordinates")
    if n < 2:
        raise ValueError(f"resample count must be >= 2, got {n}")
    pts = dedup_consecutive(pts)
    if len(pts) < 2:
        raise DegenerateDemoError(
            f"demo {source_id!r} has fewer than 2 distinct points after dedup"
        )
    out = resample_arclength(pts, n)
    if np.any(np.max(np.abs(np.diff(out, axis=0)), axis=1) < DUPLICATE_TOL_UM):
        raise DegenerateDemoError(
            f"demo {source_id!r} collapses to duplicate consecutive points at n={n}"
        )
    return Demonstration(points=out, source_id=source_id)


def rbf_kernel(a: np.ndarray, b: np.ndarray, ls: float, sv: float) -> np.ndarray:
    d = a[:, None] - b[None, :]
    return sv * np.exp(-(d * d) / (2.0 * ls * ls))


def _chol_with_jitter(a: np.ndarray, sv: float):
    """Cholesky with escalating relative jitter; raises at the ladder ceiling."""
    try:
        return cho_factor(a, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    for rel in JITTER_LADDER:
        try:
            return cho_factor(a + rel * sv * np.eye(len(a)), lower=True), rel
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"kernel matrix not positive definite at jitter ceiling {JITTER_LADDER[-1]:g}*sv"
        f" (sv={sv:g})"
    )


@dataclass
class _AxisGp:
    """Reduced-system GP for one axis: N unique indices, demo-mean targets."""

    t: np.ndarray               # (N,) training indices 0..N-1
    hyp: GprHyperparams
    n_demos: int
    offset: float               # constant mean (per-axis target mean)
    alpha: np.ndarray = field(repr=False, default=None)   # A^-1 (ybar - offset)
    chol: tuple = field(repr=False, default=None)
    lml: float = 0.0

    @classmethod
    def fit(cls, t, ybar, ss_within, n_demos, hyp) -> "_AxisGp":
        n = len(t)
        offset = float(np.mean(ybar))
        resid = ybar - offset
        k = rbf_kernel(t, t, hyp.length_scale, hyp.signal_variance)
        a = k + (hyp.noise_variance / n_demos) * np.eye(n)
        chol, _ = _chol_with_jitter(a, hyp.signal_variance)
        alpha = cho_solve(chol, resid)
        # Exact log marginal likelihood of the full replicated system.
        logdet_a = 2.0 * np.sum(np.log(np.diag(chol[0])))
        m = n_demos
        quad = float(resid @ alpha) + ss_within / hyp.noise_variance
        logdet = n * math.log(m) + logdet_a + (m - 1) * n * math.log(hyp.noise_variance)
        lml = -0.5 * quad - 0.5 * logdet - 0.5 * m * n * math.log(2.0 * math.pi)
        return cls(t=t, hyp=hyp, n_demos=n_demos, offset=offset, alpha=alpha, chol=chol, lml=lml)

    def predict(self, tq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance at query indices."""
        ks = rbf_kernel(np.atleast_1d(tq).astype(float), self.t,
                        self.hyp.length_scale, self.hyp.signal_variance)
        mean = self.offset + ks @ self.alpha
        v = solve_triangular(self.chol[0], ks.T, lower=True)
        var = self.hyp.signal_variance - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)


@dataclass
class GprModel:
    """Per-axis GPs over the shared index grid. Immutable once fitted."""

    n_points: int
    axes: list[_AxisGp]

    @property
    def index_max(self) -> float:
        return float(self.n_points - 1)

    def predict(self, t: float) -> tuple[Vec3, Vec3]:
        """Exact posterior mean and 95% CI half-width at (fractional) index t."""
        if not (0.0 <= t <= self.index_max):
            raise ExtrapolationError(f"index {t} outside [0, {self.index_max}]")
        means, cis = [], []
        for gp in self.axes:
            mu, var = gp.predict(np.array([t]))
            means.append(mu[0])
            cis.append(1.96 * math.sqrt(var[0]))
        return Vec3(*means), Vec3(*cis)

    def predict_grid(self, tq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        tq = np.asarray(tq, dtype=float)
        if np.any(tq < 0.0) or np.any(tq > self.index_max):
            raise ExtrapolationError(f"indices outside [0, {self.index_max}]")
        means = np.empty((len(tq), 3))
        cis = np.empty((len(tq), 3))
        for k, gp in enumerate(self.axes):
            mu, var = gp.predict(tq)
            means[:, k] = mu
            cis[:, k] = 1.96 * np.sqrt(var)
        return means, cis


def _hyperparam_grid(n: int, targets: np.ndarray) -> list[GprHyperparams]:
    length_scales = np.geomspace(n / 64.0, n / 2.0, 8)
    base_var = max(float(np.var(targets)), 1e-12)
    # Noise rungs: a 1 um^2 sensor floor, a near-zero rung that the marginal
    # likelihood only selects when the demos are mutually consistent, and the
    # within-demo scatter estimate when several demos make one available.
    noise_vars = [1.0, 1e-6]
    m = targets.shape[0] if targets.ndim == 2 else 1
    if m > 1:
        ss_within = float(np.sum((targets - targets.mean(axis=0)) ** 2))
        est = ss_within / ((m - 1) * targets.shape[1])
        if est > 0 and all(abs(est - nv) / est > 0.5 for nv in noise_vars):
            noise_vars.append(est)
    grid = []
    for ls in length_scales:
        for mult in (0.5, 1.0, 2.0):
            for nv in noise_vars:
                grid.append(GprHyperparams(float(ls), base_var * mult, nv))
    return grid


def fit(demos: DemonstrationSet, hyperparams: GprHyperparams | None = None
        ) -> tuple[GprModel, GuidePath]:
    """Fit per-axis GPs over all demos and extract the guide path.

    Hyperparameters are selected per axis by maximizing the exact log
    marginal likelihood over a fixed grid unless given explicitly.
    """
    demos.validate()
    n = demos.resample_count
    m = len(demos.demos)
    t = np.arange(n, dtype=float)
    stack = np.stack([d.points for d in demos.demos])   # (M, N, 3)

    axes = []
    for k in range(3):
        y = stack[:, :, k]                              # (M, N)
        ybar = y.mean(axis=0)
        ss_within = float(np.sum((y - ybar) ** 2))
        if hyperparams is not None:
            axes.append(_AxisGp.fit(t, ybar, ss_within, m, hyperparams.validate()))
            continue
        best = None
        for hyp in _hyperparam_grid(n, y):
            cand = _AxisGp.fit(t, ybar, ss_within, m, hyp)
            if best is None or cand.lml > best.lml:
                best = cand
        axes.append(best)

    model = GprModel(n_points=n, axes=axes)
    means, cis = model.predict_grid(t)
    return model, GuidePath(points=means, ci_halfwidth=cis)


def predict(model: GprModel, t: float) -> tuple[Vec3, Vec3]:
    return model.predict(t)


# --- file formats ---------------------------------------------------------

def save_demo(path, demo: Demonstration) -> None:
    """JSON-lines demo file: a schema header line, then one point per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": DEMO_SCHEMA, "source_id": demo.source_id}) + "\n")
        for i, row in enumerate(demo.points):
            fh.write(json.dumps(
                {"t": i, "x": float(row[0]), "y": float(row[1]), "z": float(row[2])}) + "\n")


def load_demo_points(path) -> tuple[np.ndarray, str]:
    """Read a demo file back as raw points (run preprocess before fitting)."""
    source_id = ""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "schema" in obj and "t" not in obj:
                if obj["schema"] != DEMO_SCHEMA:
                    raise ValueError(f"{path}:{lineno}: unsupported demo schema {obj['schema']!r}")
                source_id = obj.get("source_id", "")
                continue
            rows.append((obj["x"], obj["y"], obj["z"]))
    if not rows:
        raise ValueError(f"{path}: no points")
    return np.array(rows, dtype=float), source_id


def save_guidepath(path, guide: GuidePath) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(guide.to_json_obj(), fh)


def load_guidepath(path) -> GuidePath:
    with open(path, "r", encoding="utf-8") as fh:
        return GuidePath.from_json_obj(json.load(fh))
