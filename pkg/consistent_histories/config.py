"""Run configuration read from TOML files

A run file holds a top-level ``seed`` and the blocks ``[model]``, ``[ansatz]``, ``[cost]``, ``[shots]``,
``[optimizer]``, ``[grid]``, ``[readout]`` and ``[element]``. Each command names the blocks it requires.
Matrices in custom models are nested arrays of ``[re, im]`` pairs.
"""
# Standard
from dataclasses import dataclass, fields
import logging
from pathlib import Path
import sys
from typing import Any, Dict, Optional, Union
# Installed
import numpy as np
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
# Local
from consistent_histories import qmath
from consistent_histories.ansatz import AnsatzKind, AnsatzSpec, single_history_partitions
from consistent_histories.estimators import ShotPlan
from consistent_histories.exceptions import ConfigError
from consistent_histories.histories import ModelSpec
from consistent_histories.models import (
    ChiralConfig, SphereMesh, SpinFieldConfig, axis_params, chiral_model, spin_field_model)
from consistent_histories.report import ThresholdMode
from consistent_histories.vchloop import CostMode, OptimizerConfig, ParameterGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReadoutConfig:
    """Settings of the probability readout and bound chain"""
    n_readout: int = 10000
    eps_max: float = 0.05
    threshold: ThresholdMode = ThresholdMode.POISSON
    initial_outcome: Optional[int] = None


@dataclass(frozen=True)
class ElementConfig:
    """Labels and part of a single element readout"""
    a: Optional[str] = None
    b: Optional[str] = None
    part: str = "real"


def parse_matrix(value: Any, name: str) -> np.ndarray:
    """Complex matrix from nested arrays of [re, im] pairs"""
    try:
        pairs = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Matrix '{name}' must be a nested array of [re, im] pairs.") from e
    if pairs.ndim != 3 or pairs.shape[2] != 2 or pairs.shape[0] != pairs.shape[1]:
        raise ConfigError(f"Matrix '{name}' must be square with [re, im] entries, got shape {pairs.shape}.")
    return pairs[..., 0] + 1j * pairs[..., 1]


def _dataclass_kwargs(cls, block: Dict[str, Any], name: str, skip: tuple = ()) -> Dict[str, Any]:
    allowed = {f.name for f in fields(cls)}
    unknown = set(block) - allowed - set(skip)
    if unknown:
        raise ConfigError(f"Unknown keys in [{name}]: {', '.join(sorted(unknown))}.")
    return {key: value for key, value in block.items() if key in allowed}


def build_model(block: Dict[str, Any]) -> ModelSpec:
    """ModelSpec from a [model] block"""
    block = dict(block)
    name = block.pop("name", None)
    try:
        if name == "spin_field":
            return spin_field_model(SpinFieldConfig(**_dataclass_kwargs(SpinFieldConfig, block, "model")))
        if name == "chiral":
            return chiral_model(ChiralConfig(**_dataclass_kwargs(ChiralConfig, block, "model")))
        if name == "custom":
            s_dims = tuple(block["s_dims"])
            e_dims = tuple(block.get("e_dims", ()))
            dims = s_dims + e_dims
            rho = qmath.Operator(dims, parse_matrix(block["rho"], "rho"))
            segments = []
            for j, segment in enumerate(block["segments"]):
                if "unitary" in segment:
                    segments.append(qmath.Operator(dims, parse_matrix(segment["unitary"], f"segments[{j}].unitary")))
                else:
                    hamiltonian = qmath.Operator(dims, parse_matrix(segment["hamiltonian"],
                                                                    f"segments[{j}].hamiltonian"))
                    segments.append((hamiltonian, float(segment["dt"])))
            return ModelSpec(rho, segments, s_dims, e_dims)
    except KeyError as e:
        raise ConfigError(f"Custom model is missing the key {e}.") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [model] block: {e}") from e
    raise ConfigError(f"Unknown model name '{name}'; expected 'spin_field', 'chiral' or 'custom'.")


def build_ansatz(block: Dict[str, Any], model: ModelSpec) -> AnsatzSpec:
    """AnsatzSpec from an [ansatz] block, sized to the model"""
    block = dict(block)
    try:
        kind = AnsatzKind(block.get("kind", "azimuth-xy"))
        base = AnsatzKind(block.get("base", "single-qubit-general"))
    except ValueError as e:
        raise ConfigError(f"Invalid ansatz kind: {e}") from e
    params = block.get("params")
    if "axis" in block:
        if params is not None:
            raise ConfigError("Give either 'params' or 'axis' in [ansatz], not both.")
        params = axis_params(block["axis"])
    partitions = block.get("partitions")
    if block.get("single_history", False):
        partitions = single_history_partitions(model.s_dims, model.k)
    try:
        return AnsatzSpec(kind, model.k, params, model.s_dims, base, int(block.get("layers", 1)), partitions)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [ansatz] block: {e}") from e


def build_grid(block: Dict[str, Any]) -> Union[ParameterGrid, SphereMesh]:
    """ParameterGrid or SphereMesh from a [grid] block"""
    try:
        if "mesh" in block:
            return SphereMesh.geodesic(int(block.get("frequency", 4)), block["mesh"])
        if "values" in block:
            return ParameterGrid(tuple(block["values"]))
        return ParameterGrid.from_ranges(block["ranges"], block["counts"], bool(block.get("endpoint", False)))
    except KeyError as e:
        raise ConfigError(f"[grid] needs 'mesh', 'values' or 'ranges' and 'counts'; missing {e}.") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [grid] block: {e}") from e


def parse_shots(value: Union[int, str, None]) -> Optional[int]:
    """Shot count from an integer or the string 'exact'"""
    if value is None or value == "exact":
        return None
    try:
        shots = int(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Shots must be a positive integer or 'exact', got {value!r}.") from e
    if shots < 1:
        raise ConfigError(f"Shots must be a positive integer or 'exact', got {value!r}.")
    return shots


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, parsed and validated"""
    seed: int
    model: ModelSpec
    ansatz: Optional[AnsatzSpec]
    cost_mode: CostMode
    plan: ShotPlan
    optimizer: Optional[OptimizerConfig]
    grid: Optional[Union[ParameterGrid, SphereMesh]]
    readout: Optional[ReadoutConfig]
    element: Optional[ElementConfig]
    workers: int = 1
    source: Optional[Path] = None

    @classmethod
    def from_dict(cls, document: Dict[str, Any], seed: Optional[int] = None, shots: Union[int, str, None] = None,
                  workers: Optional[int] = None, source: Optional[Path] = None) -> 'RunConfig':
        """Build a RunConfig from a parsed TOML document, applying command-line overrides.

        Parameters
        ----------
        document : dict
            Parsed TOML
        seed : int, Optional
            Overrides the file's seed
        shots : int or str, Optional
            Overrides [shots]; "exact" for exact evaluation
        workers : int, Optional
            Worker processes
        source : Path, Optional
            File the document came from

        Returns
        -------
        : RunConfig
        """
        unknown = set(document) - {"seed", "model", "ansatz", "cost", "shots", "optimizer", "grid", "readout",
                                   "element", "workers"}
        if unknown:
            raise ConfigError(f"Unknown top-level keys: {', '.join(sorted(unknown))}.")
        if "model" not in document:
            raise ConfigError("Every run needs a [model] block.")
        seed = int(document.get("seed", 0) if seed is None else seed)
        if seed < 0:
            raise ConfigError(f"Seed must be nonnegative, got {seed}.")
        model = build_model(document["model"])
        ansatz = build_ansatz(document["ansatz"], model) if "ansatz" in document else None
        try:
            cost_mode = CostMode(document.get("cost", {}).get("which", "full"))
        except ValueError as e:
            raise ConfigError(f"Invalid [cost] block: {e}") from e
        shot_count = parse_shots(shots if shots is not None else document.get("shots", {}).get("shots"))

        optimizer = None
        if "optimizer" in document:
            try:
                optimizer = OptimizerConfig(**_dataclass_kwargs(OptimizerConfig, document["optimizer"], "optimizer"))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Invalid [optimizer] block: {e}") from e
        grid = build_grid(document["grid"]) if "grid" in document else None
        if grid is not None and ansatz is not None and grid.n_params != ansatz.n_params:
            raise ConfigError(f"The [grid] block has {grid.n_params} parameter axes; the {ansatz.kind.value} ansatz "
                              f"takes {ansatz.n_params}.")
        readout = None
        if "readout" in document:
            kwargs = _dataclass_kwargs(ReadoutConfig, document["readout"], "readout")
            try:
                if "threshold" in kwargs:
                    kwargs["threshold"] = ThresholdMode(kwargs["threshold"])
            except ValueError as e:
                raise ConfigError(f"Invalid [readout] block: {e}") from e
            readout = ReadoutConfig(**kwargs)
        element = None
        if "element" in document:
            element = ElementConfig(**_dataclass_kwargs(ElementConfig, document["element"], "element"))
        workers = int(document.get("workers", 1) if workers is None else workers)
        if workers < 1:
            raise ConfigError(f"Worker count must be positive, got {workers}.")
        return cls(seed, model, ansatz, cost_mode, ShotPlan(shot_count, seed), optimizer, grid, readout, element,
                   workers, source)

    @classmethod
    def load(cls, path: Union[str, Path], **overrides) -> 'RunConfig':
        """Read and parse a TOML run file. Keyword overrides are passed to ``from_dict``."""
        path = Path(path)
        try:
            with path.open("rb") as f:
                document = tomllib.load(f)
        except OSError as e:
            raise ConfigError(f"Could not read config file {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid TOML: {e}") from e
        logger.info(f"Loaded run configuration from {path}.")
        return cls.from_dict(document, source=path, **overrides)

    def require(self, command: str, *blocks: str) -> None:
        """Raise ConfigError if a block that ``command`` needs is missing"""
        missing = [block for block in blocks if getattr(self, block) is None]
        if missing:
            raise ConfigError(f"The {command} command needs the block(s) {', '.join(missing)} in the config file.")
