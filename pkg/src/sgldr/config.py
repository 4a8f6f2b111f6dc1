"""Declarative TOML experiment configs: parsing and strict validation."""
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

from .kernels import MODE_RBF_MEDIAN
from .sampler import ConfigError, SamplerConfig, StepSchedule
from .targets import TargetError, make_target

_TARGET_KEYS = {"name", "rates", "weights", "dim", "data", "target_col",
                "split_seed", "test_fraction", "minibatch"}
_SAMPLER_KEYS = {"method", "particle_count", "total_iterations", "burn_in", "thin",
                 "noise_enabled", "repulsion_cutoff_fraction", "seed", "step_size"}
_STEP_KEYS = {"kind", "eps", "a", "b", "gamma"}
_KERNEL_KEYS = {"mode", "h"}
_DIAG_KEYS = {"metrics", "mode_coverage_radius"}
_OUTPUT_KEYS = {"dir"}
_SECTIONS = {"target", "sampler", "kernel", "diagnostics", "output"}

KNOWN_METRICS = ("ess", "moment_error", "mode_coverage")


@dataclass
class ExperimentConfig:
    target_name: str
    target_params: dict
    sampler: SamplerConfig
    metrics: tuple = KNOWN_METRICS
    mode_coverage_radius: float = 0.949  # 3 sigma for the Gaussian-grid target
    output_dir: Path = Path("runs/out")

    def build_target(self):
        if self.target_name == "bnn":
            from .bnn import BnnTarget, load_uci_csv

            p = dict(self.target_params)
            data = p.pop("data", None)
            if data is None:
                raise ConfigError("bnn target requires target.data = <csv path>")
            dataset = load_uci_csv(
                data,
                p.pop("target_col"),
                split_seed=p.pop("split_seed", 0),
                test_fraction=p.pop("test_fraction", 0.1),
            )
            target = BnnTarget(dataset, minibatch_size=p.pop("minibatch", 100))
            if p:
                raise ConfigError(f"unknown bnn target parameters: {sorted(p)}")
            return target
        try:
            return make_target(self.target_name, self.target_params)
        except TargetError as err:
            raise ConfigError(str(err)) from err


def _check_keys(section, table, allowed):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )


def parse_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err

    unknown = set(raw) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    tgt = dict(raw.get("target", {}))
    _check_keys("target", tgt, _TARGET_KEYS)
    name = tgt.pop("name", None)
    if name is None:
        raise ConfigError("[target] section must set name")

    smp = dict(raw.get("sampler", {}))
    _check_keys("sampler", smp, _SAMPLER_KEYS)
    step = dict(smp.pop("step_size", {}))
    _check_keys("sampler.step_size", step, _STEP_KEYS)
    schedule = StepSchedule(
        kind=step.get("kind", "constant"),
        eps=float(step.get("eps", 1e-3)),
        a=float(step.get("a", 1.0)),
        b=float(step.get("b", 1.0)),
        gamma=float(step.get("gamma", 0.0)),
    )

    krn = dict(raw.get("kernel", {}))
    _check_keys("kernel", krn, _KERNEL_KEYS)

    sampler = SamplerConfig(
        method=smp.get("method", "sgld_r"),
        particle_count=int(smp.get("particle_count", 10)),
        schedule=schedule,
        total_iterations=int(smp.get("total_iterations", 1000)),
        burn_in=int(smp.get("burn_in", 500)),
        thin=int(smp.get("thin", 10)),
        kernel_mode=krn.get("mode", MODE_RBF_MEDIAN),
        kernel_h=float(krn["h"]) if "h" in krn else None,
        noise_enabled=bool(smp.get("noise_enabled", True)),
        repulsion_cutoff_fraction=float(smp.get("repulsion_cutoff_fraction", 1.0)),
        seed=int(smp.get("seed", 0)),
    )
    sampler.validate()

    dia = dict(raw.get("diagnostics", {}))
    _check_keys("diagnostics", dia, _DIAG_KEYS)
    metrics = tuple(dia.get("metrics", KNOWN_METRICS))
    bad = set(metrics) - set(KNOWN_METRICS)
    if bad:
        raise ConfigError(f"unknown metric(s): {', '.join(sorted(bad))}")

    out = dict(raw.get("output", {}))
    _check_keys("output", out, _OUTPUT_KEYS)

    return ExperimentConfig(
        target_name=name,
        target_params=tgt,
        sampler=sampler,
        metrics=metrics,
        mode_coverage_radius=float(dia.get("mode_coverage_radius", 0.949)),
        output_dir=Path(out.get("dir", f"runs/{path.stem}")),
    )
