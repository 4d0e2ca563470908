"""Run configuration: a small JSON schema for the solve driver.

A config file is a single JSON object with lower_snake_case keys.  Only
``problem``, ``alpha``, ``K``, ``order``, and ``T`` are required; everything
else has a default.  Unknown keys are rejected so that typos fail loudly
instead of silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .ldg import CONVECTIVE_FLUXES, ORIENTATIONS, FluxSpec
from .problems import EXAMPLE_IDS

__all__ = ["RunConfig", "parse_config", "config_from_dict"]

#: every key a config object may carry, required ones first
CONFIG_KEYS = (
    "problem", "alpha", "K", "order", "T",
    "epsilon", "domain", "flux", "lambda_speed", "beta", "orientation",
    "cfl", "snapshot_interval", "output_dir", "seed",
    "classical_diffusion",
)

_REQUIRED = ("problem", "alpha", "K", "order", "T")


@dataclass(frozen=True)
class RunConfig:
    """Validated inputs for one solve run.

    ``epsilon`` is None when the built-in problem's coefficient should be
    kept; ``snapshot_interval`` is resolved to T/10 when the file does not
    set it and T is positive.
    """

    problem: str
    alpha: float
    K: int
    order: int
    T: float
    epsilon: float | None = None
    domain: tuple[float, float] | None = None
    flux: str = "godunov"
    lambda_speed: float | None = None
    beta: float = 1.0
    orientation: str = "minus_plus"
    cfl: float = 0.1
    snapshot_interval: float | None = None
    output_dir: str | None = None
    seed: int = 0
    classical_diffusion: bool = False

    def flux_spec(self) -> FluxSpec:
        return FluxSpec(convective=self.flux, lambda_speed=self.lambda_speed,
                        beta=self.beta, orientation=self.orientation)


def _want_int(data: dict, key: str) -> int:
    value = data[key]
    # bool is an int subclass, so screen it out first
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return value


def _want_number(data: dict, key: str) -> float:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _want_str(data: dict, key: str) -> str:
    value = data[key]
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {value!r}")
    return value


def _want_bool(data: dict, key: str) -> bool:
    value = data[key]
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true or false, got {value!r}")
    return value


def config_from_dict(data: dict) -> RunConfig:
    """Validate a parsed JSON object and fill in defaults."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in data:
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
    for key in _REQUIRED:
        if key not in data:
            raise ConfigError(key, "required key is missing")

    problem = _want_str(data, "problem")
    if problem not in EXAMPLE_IDS:
        raise ConfigError(
            "problem", f"unknown problem {problem!r}; choose one of {', '.join(EXAMPLE_IDS)}")

    classical = _want_bool(data, "classical_diffusion") if "classical_diffusion" in data else False

    alpha = _want_number(data, "alpha")
    if not (1.0 < alpha < 2.0 or (alpha == 2.0 and classical)):
        raise ConfigError("alpha", f"fractional order must lie in (1, 2), got {alpha}")

    num_elements = _want_int(data, "K")
    if num_elements < 1:
        raise ConfigError("K", f"need at least one element, got {num_elements}")

    order = _want_int(data, "order")
    if order < 0:
        raise ConfigError("order", f"polynomial degree must be nonnegative, got {order}")

    final_time = _want_number(data, "T")
    if final_time < 0.0:
        raise ConfigError("T", f"final time must be nonnegative, got {final_time}")

    epsilon = None
    if "epsilon" in data:
        epsilon = _want_number(data, "epsilon")
        if epsilon < 0.0:
            raise ConfigError("epsilon", f"diffusion coefficient must be nonnegative, got {epsilon}")

    # the built-in problems fix their own interval; an explicit domain acts
    # as a consistency check, verified against the problem by the driver
    domain = None
    if "domain" in data:
        raw = data["domain"]
        if (not isinstance(raw, (list, tuple)) or len(raw) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)):
            raise ConfigError("domain", f"expected a pair [a, b] of numbers, got {raw!r}")
        domain = (float(raw[0]), float(raw[1]))
        if not domain[1] > domain[0]:
            raise ConfigError("domain", f"empty interval [{domain[0]}, {domain[1]}]")

    flux = _want_str(data, "flux") if "flux" in data else "godunov"
    if flux not in CONVECTIVE_FLUXES:
        raise ConfigError(
            "flux", f"unknown convective flux {flux!r}; choose one of {', '.join(CONVECTIVE_FLUXES)}")

    lambda_speed = None
    if "lambda_speed" in data:
        lambda_speed = _want_number(data, "lambda_speed")
        if lambda_speed < 0.0:
            raise ConfigError("lambda_speed", f"dissipation speed must be nonnegative, got {lambda_speed}")

    beta = _want_number(data, "beta") if "beta" in data else 1.0
    if beta <= 0.0:
        raise ConfigError("beta", f"boundary penalty must be positive, got {beta}")

    orientation = _want_str(data, "orientation") if "orientation" in data else "minus_plus"
    if orientation not in ORIENTATIONS:
        raise ConfigError(
            "orientation", f"unknown orientation {orientation!r}; choose one of {', '.join(ORIENTATIONS)}")

    cfl = _want_number(data, "cfl") if "cfl" in data else 0.1
    if not 0.0 < cfl < 1.0:
        raise ConfigError("cfl", f"CFL number must lie in (0, 1), got {cfl}")

    snapshot_interval = None
    if "snapshot_interval" in data:
        snapshot_interval = _want_number(data, "snapshot_interval")
        if snapshot_interval <= 0.0:
            raise ConfigError(
                "snapshot_interval", f"snapshot interval must be positive, got {snapshot_interval}")
    elif final_time > 0.0:
        snapshot_interval = final_time / 10.0

    output_dir = _want_str(data, "output_dir") if "output_dir" in data else None
    seed = _want_int(data, "seed") if "seed" in data else 0

    return RunConfig(problem=problem, alpha=alpha, K=num_elements, order=order,
                     T=final_time, epsilon=epsilon, domain=domain, flux=flux,
                     lambda_speed=lambda_speed, beta=beta, orientation=orientation,
                     cfl=cfl, snapshot_interval=snapshot_interval,
                     output_dir=output_dir, seed=seed,
                     classical_diffusion=classical)


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a JSON config file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from None
    return config_from_dict(data)
