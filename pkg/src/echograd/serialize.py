"""CSV and JSON persistence for signals, trajectories, and run artifacts.

Floats are written with ``repr`` (shortest round-trip form), so identical
runs produce byte-identical files.  Manifests separate a deterministic
payload, whose canonical-JSON hash certifies reproducibility, from volatile
fields such as timings and the git description.
"""

from __future__ import annotations

import csv
import hashlib
import json
import subprocess

import numpy as np

from .core import GradientEstimate, Signal, TimeGrid, Trajectory

__all__ = [
    "signal_to_csv",
    "signal_from_csv",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "echo_run_to_csv",
    "gradient_to_json",
    "canonical_json",
    "payload_hash",
    "write_manifest",
    "file_sha256",
    "git_describe",
]

_CONJUGATE_PREFIX = {"hamiltonian": "p", "lagrangian": "v"}


def _fmt(value) -> str:
    return repr(float(value))


def signal_to_csv(signal: Signal, path, prefix: str = "x") -> None:
    """Header ``t, <prefix>_0..<prefix>_{dim-1}``, one row per grid point."""
    times = signal.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"{prefix}_{j}" for j in range(signal.dim)])
        for k in range(signal.grid.n_points):
            writer.writerow([_fmt(times[k])] + [_fmt(v) for v in signal.values[k]])


def _grid_from_times(times) -> TimeGrid:
    times = np.asarray(times, dtype=float)
    if times.shape[0] < 2:
        raise ValueError("need at least two samples to infer a grid")
    n = times.shape[0] - 1
    # the span quotient recovers round step sizes exactly; pairwise diffs do not
    dt = (times[-1] - times[0]) / n
    expected = times[0] + dt * np.arange(n + 1)
    if not np.allclose(times, expected, rtol=0.0, atol=1e-9 * max(abs(dt), 1.0)):
        raise ValueError("samples are not on a uniform grid")
    return TimeGrid(dt=float(dt), n_steps=n, t_start=float(times[0]))


def signal_from_csv(path) -> Signal:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    if header[0] != "t":
        raise ValueError("signal files must start with a 't' column")
    data = np.asarray(rows, dtype=float)
    return Signal(_grid_from_times(data[:, 0]), data[:, 1:])


def trajectory_to_csv(traj: Trajectory, path, phase: str | None = None) -> None:
    """Header ``t, s_0.., p_0..`` (momenta) or ``t, s_0.., v_0..`` (velocities).

    An optional constant ``phase`` column disambiguates forward/echo files
    without resorting to negative timestamps.
    """
    prefix = _CONJUGATE_PREFIX[traj.kind]
    d = traj.dim
    times = traj.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t"]
        if phase is not None:
            header.append("phase")
        header += [f"s_{j}" for j in range(d)] + [f"{prefix}_{j}" for j in range(d)]
        writer.writerow(header)
        for k in range(traj.n_points):
            row = [_fmt(times[k])]
            if phase is not None:
                row.append(phase)
            row += [_fmt(v) for v in traj.positions[k]]
            row += [_fmt(v) for v in traj.conjugate[k]]
            writer.writerow(row)


def trajectory_from_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    has_phase = len(header) > 1 and header[1] == "phase"
    start = 2 if has_phase else 1
    names = header[start:]
    d = sum(1 for name in names if name.startswith("s_"))
    kind = "hamiltonian" if names[d].startswith("p_") else "lagrangian"
    times = np.array([float(r[0]) for r in rows])
    values = np.array([[float(v) for v in r[start:]] for r in rows])
    return Trajectory(_grid_from_times(times), kind, values[:, :d], values[:, d:])


def echo_run_to_csv(run, forward_path, echo_path) -> None:
    trajectory_to_csv(run.forward, forward_path, phase="forward")
    trajectory_to_csv(run.echo, echo_path, phase="echo")


def gradient_to_json(estimate: GradientEstimate, path) -> None:
    with open(path, "w") as fh:
        json.dump(estimate.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def payload_hash(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_manifest(path, payload: dict, timings: dict | None = None) -> str:
    """Write a manifest and return the payload hash.

    The payload must be fully determined by config and seed; timings and the
    git description are recorded alongside but excluded from the hash.
    """
    digest = payload_hash(payload)
    manifest = {
        "payload": payload,
        "payload_sha256": digest,
        "git_describe": git_describe(),
        "timings": timings or {},
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return digest
