"""Plain-text (INI) configuration: hyperparameters, experiments, sweeps.

Hyperparameters serialize to a ``[hyperparams]`` section; experiment
descriptions add ``[experiment]``, ``[split]`` and either ``[data]`` (CSV +
schema paths) or ``[synthetic]`` (generator settings).  Fitted results are
written back in the same hyperparameter format, so a fit output can be fed
straight into a later run.
"""

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .kernels import Hyperparams

__all__ = [
    "load_hyperparams", "save_hyperparams", "hyperparams_from_section",
    "GeneratorSpec", "ExperimentConfig", "VerifySweepConfig", "load_experiment_config",
]

ALGORITHMS = ("m-greedy", "m-var", "s-var", "s-mi")


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def hyperparams_from_section(sec) -> Hyperparams:
    try:
        n_types = sec.getint("types")
        signal = _floats(sec.get("signal_var"))
        noise = _floats(sec.get("noise_var"))
        latent = _floats(sec.get("latent_prec_inv"))
        target = tuple(_ints(sec.get("target_types", "0")))
        smooth = [_floats(sec.get(f"smooth_prec_inv.{i}")) for i in range(n_types)]
    except (TypeError, ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad hyperparameter section: {exc}") from None
    if len(signal) != n_types or len(noise) != n_types:
        raise ConfigError("signal_var and noise_var must list one value per type")
    return Hyperparams(
        signal_var=signal, noise_var=noise, latent_prec_inv=latent,
        smooth_prec_inv=smooth, target_types=target,
    )


def load_hyperparams(path) -> Hyperparams:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "hyperparams" not in parser:
        raise ConfigError(f"{path}: missing [hyperparams] section")
    return hyperparams_from_section(parser["hyperparams"])


def save_hyperparams(h: Hyperparams, path, extras=None):
    """Write hyperparameters (and optional extra records, e.g. fit metadata)
    in the format ``load_hyperparams`` reads."""
    parser = configparser.ConfigParser()
    parser["hyperparams"] = {
        "types": str(h.n_types),
        "dim": str(h.dim),
        "target_types": ", ".join(str(t) for t in h.target_types),
        "signal_var": ", ".join(repr(float(v)) for v in h.signal_var),
        "noise_var": ", ".join(repr(float(v)) for v in h.noise_var),
        "latent_prec_inv": ", ".join(repr(float(v)) for v in h.latent_prec_inv),
    }
    for i in range(h.n_types):
        parser["hyperparams"][f"smooth_prec_inv.{i}"] = ", ".join(
            repr(float(v)) for v in h.smooth_prec_inv[i]
        )
    if extras:
        parser["fit"] = {k: str(v) for k, v in extras.items()}
    with open(path, "w") as fh:
        parser.write(fh)


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic dataset layout; measurement types come from the attached
    hyperparameters."""

    n_locations: int
    dim: int = 1
    extent: float = 10.0
    layout: str = "grid"

    def __post_init__(self):
        if self.layout not in ("grid", "uniform"):
            raise ConfigError(f"unknown layout {self.layout!r}")
        if self.layout == "grid" and self.dim != 1:
            raise ConfigError("grid layout is one-dimensional; use layout=uniform")
        if self.n_locations < 2:
            raise ConfigError("need at least two locations")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible experiment run needs."""

    name: str
    seed: int
    repeats: int
    algorithms: tuple
    checkpoints: tuple
    inducing_count: int
    target_types: tuple
    test_count: int
    hyperparams: Hyperparams
    output_dir: str = "results"
    svar_mode: str = "shared"
    fit: bool = False
    fit_budget: int = 400
    fit_restarts: int = 3
    dataset_path: str = None
    schema_path: str = None
    synthetic: GeneratorSpec = None

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        if not self.checkpoints:
            raise ConfigError("at least one budget checkpoint is required")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if self.checkpoints[0] < 1:
            raise ConfigError("checkpoints must be positive")
        if self.svar_mode not in ("shared", "refit"):
            raise ConfigError("svar_mode must be 'shared' or 'refit'")
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ConfigError("configure exactly one of [data] and [synthetic]")
        if self.repeats < 1 or self.inducing_count < 1:
            raise ConfigError("repeats and inducing_count must be positive")


@dataclass(frozen=True)
class VerifySweepConfig:
    instances: int = 50
    budget: int = 3
    seed: int = 0
    pool_shape: tuple = (6, 6)
    output_dir: str = "results"


def load_experiment_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "experiment" not in parser:
        raise ConfigError(f"{path}: missing [experiment] section")
    exp = parser["experiment"]

    if "hyperparams" in parser:
        h = hyperparams_from_section(parser["hyperparams"])
    elif exp.get("hyperparams_file"):
        h = load_hyperparams(exp.get("hyperparams_file"))
    else:
        raise ConfigError(
            f"{path}: provide a [hyperparams] section or hyperparams_file"
        )

    split = parser["split"] if "split" in parser else {}
    target_types = tuple(_ints(split.get("target_types", "0"))) if split else h.target_types
    if tuple(target_types) != tuple(h.target_types):
        h = Hyperparams(
            signal_var=h.signal_var, noise_var=h.noise_var,
            latent_prec_inv=h.latent_prec_inv, smooth_prec_inv=h.smooth_prec_inv,
            target_types=target_types,
        )

    synthetic = None
    dataset_path = schema_path = None
    if "synthetic" in parser:
        syn = parser["synthetic"]
        synthetic = GeneratorSpec(
            n_locations=syn.getint("n_locations"),
            dim=syn.getint("dim", 1),
            extent=syn.getfloat("extent", 10.0),
            layout=syn.get("layout", "grid"),
        )
    if "data" in parser:
        dataset_path = parser["data"].get("dataset")
        schema_path = parser["data"].get("schema")

    return ExperimentConfig(
        name=exp.get("name", "experiment"),
        seed=exp.getint("seed", 0),
        repeats=exp.getint("repeats", 1),
        algorithms=tuple(
            a.strip() for a in exp.get("algorithms", "m-greedy").split(",") if a.strip()
        ),
        checkpoints=tuple(_ints(exp.get("checkpoints", "5"))),
        inducing_count=exp.getint("inducing_count", 10),
        target_types=tuple(target_types),
        test_count=int(split.get("test_count", 10)) if split else 10,
        hyperparams=h,
        output_dir=exp.get("output_dir", "results"),
        svar_mode=exp.get("svar_mode", "shared"),
        fit=exp.getboolean("fit", False),
        fit_budget=exp.getint("fit_budget", 400),
        fit_restarts=exp.getint("fit_restarts", 3),
        dataset_path=dataset_path,
        schema_path=schema_path,
        synthetic=synthetic,
    )


def load_verify_config(path) -> VerifySweepConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    sec = parser["verify"] if "verify" in parser else {}
    shape = tuple(_ints(sec.get("pool_shape", "6, 6"))) if sec else (6, 6)
    return VerifySweepConfig(
        instances=int(sec.get("instances", 50)) if sec else 50,
        budget=int(sec.get("budget", 3)) if sec else 3,
        seed=int(sec.get("seed", 0)) if sec else 0,
        pool_shape=shape,
        output_dir=sec.get("output_dir", "results") if sec else "results",
    )
