"""File formats: dataset CSVs, simulation sidecars, model and metrics files.

All writers are byte-deterministic: floats are serialized with repr
(shortest round-trip form), JSON keys are sorted, and line endings are
fixed to "\\n".
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .baselines import TwoPartModel
from .metrics import CSV_COLUMNS, MetricsReport
from .model import Dataset, ParamPair
from .optimizer import FitResult
from .selection import PuOmmModel
from .simulate import SimConfig, SimOutput

LATENT_COLUMNS = ("y", "u", "r")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset_csv(ds: Dataset, path: str | Path) -> None:
    """Columns x_1..x_p, z and, when latent fields exist, y, u, r."""
    path = Path(path)
    header = [f"x_{j + 1}" for j in range(ds.p)] + ["z"]
    latent = ds.has_latent and ds.r is not None
    if latent:
        header += list(LATENT_COLUMNS)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(ds.n):
            row = [_fmt(v) for v in ds.x[i]] + [_fmt(ds.z[i])]
            if latent:
                row += [_fmt(ds.y[i]), _fmt(ds.u[i]), _fmt(ds.r[i])]
            writer.writerow(row)


def ingest_csv(path: str | Path, schema: str = "observed_only") -> Dataset:
    """Load a dataset CSV, validating cells and reporting bad lines.

    The observed_only schema needs the feature columns x_1..x_p and z and
    ignores any latent columns present; the simulated schema additionally
    requires y, u, r.  Malformed cells and negative z raise with the
    offending 1-based line number.
    """
    if schema not in ("observed_only", "simulated"):
        raise ValueError(f"unknown schema {schema!r}")
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)

    x_names = [h for h in header if h.startswith("x_")]
    try:
        order = sorted(range(len(x_names)), key=lambda i: int(x_names[i][2:]))
    except ValueError:
        raise ValueError(f"{path}: feature columns must be named x_1..x_p") from None
    x_names = [x_names[i] for i in order]
    p = len(x_names)
    if p == 0:
        raise ValueError(f"{path}: no feature columns x_* found")
    expected = [f"x_{j + 1}" for j in range(p)]
    if x_names != expected:
        raise ValueError(f"{path}: feature columns must be x_1..x_{p} with no gaps")
    if "z" not in header:
        raise ValueError(f"{path}: missing required column z")
    needed = list(expected) + ["z"]
    if schema == "simulated":
        missing = [c for c in LATENT_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"{path}: simulated schema missing columns {missing}")
        needed += list(LATENT_COLUMNS)
    col_idx = {name: header.index(name) for name in needed}

    n = len(rows)
    x = np.empty((n, p))
    z = np.empty(n)
    lat = {c: np.empty(n) for c in LATENT_COLUMNS} if schema == "simulated" else {}
    for i, row in enumerate(rows):
        line = i + 2  # header occupies line 1
        if len(row) != len(header):
            raise ValueError(f"{path}: line {line}: expected {len(header)} cells, got {len(row)}")
        try:
            for j, name in enumerate(expected):
                x[i, j] = float(row[col_idx[name]])
            z[i] = float(row[col_idx["z"]])
            for c in lat:
                lat[c][i] = float(row[col_idx[c]])
        except ValueError:
            raise ValueError(f"{path}: line {line}: non-numeric cell") from None
        if z[i] < 0:
            raise ValueError(f"{path}: line {line}: z must be nonnegative, got {z[i]}")

    ds = Dataset(x=x, z=z, **lat) if lat else Dataset(x=x, z=z)
    if schema == "simulated":
        ds.validate_latent()
    return ds


def _json_dump(obj, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sim_meta(sim: SimOutput, path: str | Path) -> None:
    """JSON sidecar: generation settings plus the true coefficient vectors."""
    cfg = sim.config
    meta = {
        "config": None
        if cfg is None
        else {
            "setting": cfg.setting.value,
            "n": cfg.n,
            "p": cfg.p,
            "lambda_eps_true": cfg.lambda_eps_true,
            "tau": cfg.tau,
            "rho": cfg.rho,
            "param_scale": cfg.param_scale,
            "seed": cfg.seed,
            "n_test": cfg.n_test,
        },
        "beta0": [float(v) for v in sim.beta0],
        "theta0": [float(v) for v in sim.theta0],
    }
    _json_dump(meta, path)


def read_sim_meta(path: str | Path) -> dict:
    with open(path) as fh:
        meta = json.load(fh)
    meta["beta0"] = np.asarray(meta["beta0"], dtype=float)
    meta["theta0"] = np.asarray(meta["theta0"], dtype=float)
    return meta


def sim_config_from_dict(d: dict) -> SimConfig:
    # n may be omitted in experiment configs, where n_values supplies it
    return SimConfig(
        setting=d["setting"],
        n=int(d.get("n", 1)),
        p=int(d.get("p", 10)),
        lambda_eps_true=float(d.get("lambda_eps_true", 0.24)),
        tau=float(d.get("tau", 3.0)),
        rho=float(d.get("rho", 0.2)),
        param_scale=d.get("param_scale"),
        seed=int(d.get("seed", 0)),
        n_test=int(d.get("n_test", 50000)),
    )


def model_to_dict(model, method: str) -> dict:
    if isinstance(model, PuOmmModel):
        return {
            "method": method,
            "kind": "pu_omm",
            "beta": [float(v) for v in model.beta],
            "theta": [float(v) for v in model.theta],
            "lambda_hat": model.lambda_hat,
            "selection_scores": [[lam, score] for lam, score in model.selection_scores],
            "converged": model.fit.converged,
            "iterations": model.fit.iterations,
            "final_loss": model.fit.final_loss,
        }
    if isinstance(model, TwoPartModel):
        return {
            "method": method,
            "kind": "two_part",
            "occurrence_coef": [float(v) for v in model.occurrence_coef],
            "magnitude_coef": [float(v) for v in model.magnitude_coef],
            "family": model.magnitude_family,
            "aux": None if model.aux is None else float(model.aux),
            "flags": list(model.flags),
        }
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "pu_omm":
        omega = ParamPair(beta=np.asarray(d["beta"]), theta=np.asarray(d["theta"]))
        res = FitResult(
            omega_hat=omega,
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            final_loss=float(d["final_loss"]),
        )
        return PuOmmModel(
            omega_hat=omega,
            lambda_hat=float(d["lambda_hat"]),
            fit=res,
            selection_scores=[(float(a), float(b)) for a, b in d["selection_scores"]],
        )
    if kind == "two_part":
        aux = d.get("aux")
        return TwoPartModel(
            occurrence_coef=np.asarray(d["occurrence_coef"], dtype=float),
            magnitude_coef=np.asarray(d["magnitude_coef"], dtype=float),
            magnitude_family=d["family"],
            aux=None if aux is None else float(aux),
            flags=tuple(d.get("flags", ())),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def write_model_json(model, method: str, path: str | Path) -> None:
    _json_dump(model_to_dict(model, method), path)


def read_model_json(path: str | Path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def write_metrics_csv(reports: list[MetricsReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep in reports:
            writer.writerow(rep.to_csv_row())
