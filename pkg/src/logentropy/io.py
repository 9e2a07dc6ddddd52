"""File formats: JSON-lines trajectories and solutions, flat float arrays.

Floats are written with 17 significant digits, which round-trips IEEE doubles
exactly.  A trajectory file is a header line followed by one record per step::

    {"spec": {...}, "t_start": 0.0, "dt": 0.001, "scheme": "euler"}
    {"t": 0.0, "dof": [...]}
    ...

Backward solutions use the same layout with ``"u"`` in place of ``"dof"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .conjugate_heat import BackwardSolution
from .flow import Trajectory
from .manifold import ManifoldSpec, MetricState


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return f"{x:.17g}"


def format_array(values) -> str:
    return "[" + ",".join(format_float(v) for v in np.asarray(values, float).ravel()) + "]"


def _record(t, key, values):
    return f'{{"t": {format_float(t)}, "{key}": {format_array(values)}}}'


def dumps_trajectory(traj: Trajectory) -> str:
    header = {"spec": traj.spec.to_dict(), "t_start": traj.t_start, "dt": traj.dt, "scheme": traj.scheme}
    lines = [json.dumps(header)]
    lines += [_record(m.t, "dof", m.dof) for m in traj.states]
    return "\n".join(lines) + "\n"


def loads_trajectory(text: str) -> Trajectory:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    spec = ManifoldSpec.from_dict(header["spec"])
    traj = Trajectory(spec, float(header["t_start"]), float(header["dt"]), [], header.get("scheme", "euler"))
    for ln in lines[1:]:
        rec = json.loads(ln)
        traj.states.append(MetricState(spec, np.array(rec["dof"], float), rec["t"]))
    return traj


def dumps_solution(sol: BackwardSolution) -> str:
    traj = sol.trajectory
    header = {
        "spec": traj.spec.to_dict(), "t_start": traj.t_start, "dt": traj.dt,
        "first_index": sol.first_index, "drift": [float(d) for d in sol.drift],
    }
    lines = [json.dumps(header)]
    lines += [_record(t, "u", u) for t, u in zip(sol.times, sol.u_fields)]
    return "\n".join(lines) + "\n"


def loads_solution(text: str, traj: Trajectory) -> BackwardSolution:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    if ManifoldSpec.from_dict(header["spec"]) != traj.spec:
        raise ValueError("solution and trajectory were computed on different specs")
    first = int(header["first_index"])
    u_fields = [np.array(json.loads(ln)["u"], float) for ln in lines[1:]]
    return BackwardSolution(traj, first, u_fields, list(header.get("drift", [0.0] * len(u_fields))))


def save_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.write_text(dumps_trajectory(traj))
    return path


def load_trajectory(path) -> Trajectory:
    return loads_trajectory(Path(path).read_text())


def save_solution(sol: BackwardSolution, path) -> Path:
    path = Path(path)
    path.write_text(dumps_solution(sol))
    return path


def load_solution(path, traj: Trajectory) -> BackwardSolution:
    return loads_solution(Path(path).read_text(), traj)


def save_field(values, path) -> Path:
    """A single node field as a JSON flat array."""
    path = Path(path)
    path.write_text(format_array(values) + "\n")
    return path


def load_field(path) -> np.ndarray:
    return np.array(json.loads(Path(path).read_text()), float)
