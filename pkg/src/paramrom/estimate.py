"""Parameter estimation: recover (mu1, mu2) from an observed solution by
minimizing ||x_obs - model(mu1, mu2)|| over the box, with a multi-run
zoom workflow that rebuilds the model on successively smaller boxes
centered at the previous estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hopgd, krylov, rom


def add_noise(x, eps, seed=None):
    """x + eps * standard-normal noise from a seeded generator."""
    x = np.asarray(x, dtype=np.float64)
    if eps == 0.0:
        return x.copy()
    rng = np.random.default_rng(seed)
    return x + eps * rng.standard_normal(x.shape[0])


def _nelder_mead(f, x0, box, max_iter=500, diameter_tol=1e-10):
    """Minimize f over the box: reflection/expansion/contraction with every
    vertex clamped to the box; stops when the simplex diameter falls below
    diameter_tol times the box diagonal."""
    (a1, b1), (a2, b2) = box
    diagonal = float(np.hypot(b1 - a1, b2 - a2))

    def clamp(x):
        return np.array([min(max(x[0], a1), b1), min(max(x[1], a2), b2)])

    step = np.array([0.05 * (b1 - a1), 0.05 * (b2 - a2)])
    simplex = [clamp(np.asarray(x0, dtype=np.float64))]
    simplex.append(clamp(simplex[0] + np.array([step[0], 0.0])))
    simplex.append(clamp(simplex[0] + np.array([0.0, step[1]])))
    # Degenerate start (corner): push inward instead.
    for idx in (1, 2):
        if np.allclose(simplex[idx], simplex[0]):
            inward = np.array([-step[0], 0.0]) if idx == 1 else np.array([0.0, -step[1]])
            simplex[idx] = clamp(simplex[0] + inward)
    values = [f(x) for x in simplex]

    for _ in range(max_iter):
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        diameter = max(
            float(np.linalg.norm(simplex[0] - simplex[1])),
            float(np.linalg.norm(simplex[0] - simplex[2])),
            float(np.linalg.norm(simplex[1] - simplex[2])),
        )
        if diameter < diameter_tol * diagonal:
            break
        centroid = 0.5 * (simplex[0] + simplex[1])
        reflected = clamp(centroid + (centroid - simplex[2]))
        f_reflected = f(reflected)
        if f_reflected < values[0]:
            expanded = clamp(centroid + 2.0 * (centroid - simplex[2]))
            f_expanded = f(expanded)
            if f_expanded < f_reflected:
                simplex[2], values[2] = expanded, f_expanded
            else:
                simplex[2], values[2] = reflected, f_reflected
        elif f_reflected < values[1]:
            simplex[2], values[2] = reflected, f_reflected
        else:
            contracted = clamp(centroid + 0.5 * (simplex[2] - centroid))
            f_contracted = f(contracted)
            if f_contracted < values[2]:
                simplex[2], values[2] = contracted, f_contracted
            else:
                for idx in (1, 2):
                    simplex[idx] = clamp(simplex[0] + 0.5 * (simplex[idx] - simplex[0]))
                    values[idx] = f(simplex[idx])
    best = int(np.argmin(values))
    return simplex[best], float(values[best])


def estimate_parameters(interpolated, x_obs, coarse=41, max_iter=500):
    """argmin over the model box of ||x_obs - model(mu1, mu2)||_2.

    A coarse scan over a ``coarse`` x ``coarse`` grid seeds a box-clamped
    Nelder-Mead refinement; the returned objective never exceeds the best
    scanned value. The objective may be multimodal; the multi-run zoom
    workflow below is the remedy, not a failure condition here.
    """
    x_obs = np.asarray(x_obs, dtype=np.float64)
    (a1, b1), (a2, b2) = interpolated.box

    def objective(point):
        return float(np.linalg.norm(x_obs - interpolated(point[0], point[1])))

    best = (np.inf, a1, a2)
    for mu1 in np.linspace(a1, b1, coarse):
        w1 = interpolated.spline1(mu1)
        for mu2 in np.linspace(a2, b2, coarse):
            value = float(np.linalg.norm(
                x_obs - interpolated.mode_vectors @ (w1 * interpolated.spline2(mu2))))
            if value < best[0]:
                best = (value, float(mu1), float(mu2))
    point, value = _nelder_mead(objective, np.array(best[1:]), interpolated.box,
                                max_iter=max_iter)
    if best[0] < value:
        point, value = np.array(best[1:]), best[0]
    return float(point[0]), float(point[1]), value


@dataclass
class EstimationRun:
    """Record of one zoom run of the estimation workflow."""

    index: int
    box: tuple
    n1: int
    n2: int
    rank: int
    decomposition_converged: bool
    estimate: tuple
    objective: float
    rel_err_mu1: float = None
    rel_err_mu2: float = None
    sweep_info: list = field(default_factory=list)

    def to_dict(self):
        d = {
            "run": self.index,
            "box": [list(self.box[0]), list(self.box[1])],
            "nodes": {"kind": "sparse_cross", "n1": self.n1, "n2": self.n2},
            "rank": self.rank,
            "decomposition_converged": self.decomposition_converged,
            "estimate": {"mu1": self.estimate[0], "mu2": self.estimate[1]},
            "objective": self.objective,
            "sweeps": self.sweep_info,
        }
        if self.rel_err_mu1 is not None:
            d["rel_err_percent_mu1"] = 100.0 * self.rel_err_mu1
            d["rel_err_percent_mu2"] = 100.0 * self.rel_err_mu2
        return d


def _shrunk_box(original, center, half_widths):
    """Box of the given half-widths centered at ``center``, intersected
    with the original box (zoom boxes never leave it)."""
    out = []
    for (lo, hi), c, hw in zip(original, center, half_widths):
        out.append((max(lo, c - hw), min(hi, c + hw)))
    return tuple(out)


def refine_estimate(problem, x_obs, runs=3, n1=7, n2=7, shrink=0.5,
                    sweep_tol=1e-8, k_max=300, eps_node=1e-3, max_modes=50,
                    decompose_opts=None, true_parameters=None):
    """Multi-run estimation: sample a sparse cross, build and interpolate
    the model, estimate, then halve the box around the estimate and repeat.

    Each run costs two snapshot sweeps (two LU factorizations). ``n1``,
    ``n2`` and ``eps_node`` may be scalars or per-run sequences. A run
    whose decomposition fails to converge still estimates with the best
    available model and is flagged in its record.
    """
    box0 = problem.box
    box = box0
    n1s = list(n1) if np.iterable(n1) else [n1] * runs
    n2s = list(n2) if np.iterable(n2) else [n2] * runs
    eps = list(eps_node) if np.iterable(eps_node) else [eps_node] * runs
    opts = decompose_opts or {}
    records = []
    for run in range(runs):
        nodes = hopgd.sparse_cross_nodes(box, n1s[run], n2s[run])
        mu1_star, mu2_star = nodes.anchors
        lines = []
        sweep_info = []
        for fixed_axis, fixed_value, values in (
            (2, mu2_star, nodes.mu1_values),
            (1, mu1_star, nodes.mu2_values),
        ):
            interval = (values[0], values[-1])
            line = krylov.snapshot_sweep(
                problem, fixed_axis, fixed_value, values,
                sigma=krylov.default_sigma(interval),
                tol=sweep_tol, k_max=k_max)
            lines.append(line)
            sweep_info.append({"fixed_axis": fixed_axis,
                               "fixed_value": fixed_value,
                               "sigma": line.sigma, "k": line.k})
        tensor = hopgd.SnapshotTensor.from_lines(nodes, lines)
        model = hopgd.decompose(tensor, eps_node=eps[run], max_modes=max_modes,
                                **opts)
        interpolated = rom.interpolate_model(model)
        mu1_hat, mu2_hat, objective = estimate_parameters(interpolated, x_obs)
        record = EstimationRun(
            index=run + 1, box=box, n1=n1s[run], n2=n2s[run],
            rank=model.rank, decomposition_converged=model.converged,
            estimate=(mu1_hat, mu2_hat), objective=objective,
            sweep_info=sweep_info,
        )
        if true_parameters is not None:
            t1, t2 = true_parameters
            record.rel_err_mu1 = abs(mu1_hat - t1) / abs(t1)
            record.rel_err_mu2 = abs(mu2_hat - t2) / abs(t2)
        records.append(record)
        half_widths = (shrink * 0.5 * (box[0][1] - box[0][0]),
                       shrink * 0.5 * (box[1][1] - box[1][0]))
        box = _shrunk_box(box0, (mu1_hat, mu2_hat), half_widths)
    return records
