# -*- coding: utf-8 -*-

"""
fockspec
~~~~~
Spectral toolkit for a lattice Hamiltonian on the cut Fock space
C + L2(T^3) + L2_sym((T^3)^2): quadrature on the torus, Fredholm
determinants of the fiber operators, band structure, Birman-Schwinger
eigenvalue counting with a brute-force oracle, and the constants that
govern the logarithmic accumulation of eigenvalues at the threshold.

"""
import hashlib
import json
import logging
import time
from pathlib import Path
from typing import Union, Dict, Optional

import pandas as pd
import yaml

__version__ = "0.3.0"

logging.basicConfig(format="%(name)s %(levelname)s: %(message)s", level=logging.INFO)


class ConvergenceError(RuntimeError):
    """A numerical procedure did not reach its tolerance within its budget"""


class SingularShiftError(ConvergenceError):
    """An eigenvalue sits (numerically) on the shift used for inertia counting"""


def unique_path(base_path: Union[str, Path], suffix: str) -> Path:
    base_path = Path(base_path)
    counter = 0
    while True:
        path = base_path.with_suffix(f".{counter}{suffix}")
        if not path.exists():
            return path
        counter += 1


def config_hash(config: Dict) -> str:
    """sha256 over the canonical yaml dump of a model config"""
    text = yaml.safe_dump(config, default_flow_style=True, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class Writer(object):
    """Stores tabular results as csv or json, with a manifest beside them

    Args:
        file_path: (Path) target of the data file, suffix is replaced by the format
        fmt: (str) either "csv" or "json"
        command: (str) name of the producing operation, recorded in the manifest
        overwrite: (bool) replace an existing file, a unique name is chosen otherwise
        verbose: (bool) provides more info instead of just warnings / errors
    """

    formats = ["csv", "json"]
    float_format = "%.17g"

    logger = logging.getLogger("FockSpec.Writer")

    def __init__(
        self,
        file_path: Union[str, Path],
        fmt: str = "csv",
        command: str = "",
        overwrite: bool = False,
        verbose: Union[bool, None] = True,
    ):
        if verbose is not None:
            self.logger.setLevel(logging.INFO if verbose else logging.WARNING)

        if not isinstance(fmt, str):
            raise TypeError(f"can not handle type '{type(fmt)}' for format")
        if fmt not in self.formats:
            raise ValueError(f"can not handle format '{fmt}'")
        self.fmt = fmt

        file_path = Path(file_path).with_suffix(f".{fmt}")
        if overwrite or not file_path.exists():
            self.file_path = file_path
        else:
            base_dir = file_path.resolve().parents[0]
            self.file_path = unique_path(base_dir / file_path.stem, file_path.suffix)
            self.logger.warning(
                f"File {file_path} already exists -> "
                f"storing under {self.file_path.name} instead"
            )
        self.manifest_path = self.file_path.with_suffix(".manifest.json")
        self.manifest: Dict = {"command": command, "version": __version__}
        self.rows = 0
        self._t_start: Optional[float] = None

    def __enter__(self):
        self._t_start = time.perf_counter()
        self.logger.info(f"Storing results to '{self.file_path}'")
        return self

    def __exit__(self, *exc):
        self.manifest["rows"] = self.rows
        self.manifest["wall_time_s"] = round(time.perf_counter() - self._t_start, 6)
        self.manifest["data_file"] = self.file_path.name
        with open(self.manifest_path, "w") as fd:
            json.dump(self.manifest, fd, indent=2, sort_keys=True, default=_jsonable)
        self.logger.info(
            f"closing '{self.file_path.name}' with {self.rows} rows, "
            f"manifest in '{self.manifest_path.name}'"
        )

    def __setitem__(self, key, item):
        self.manifest[key] = item

    def set_model(self, config: Dict) -> None:
        self.manifest["model"] = config
        self.manifest["model_hash"] = config_hash(config)

    def save_table(self, frame: pd.DataFrame) -> int:
        """write a DataFrame in the chosen format

        :param frame: one row per result record
        :return: number of written rows
        """
        self.file_path.parent.mkdir(parents=True, exist_ok=True)
        if self.fmt == "csv":
            frame.to_csv(
                self.file_path, index=False, float_format=self.float_format, na_rep=""
            )
        else:
            frame.to_json(self.file_path, orient="records", double_precision=15)
        self.rows = int(frame.shape[0])
        return self.rows


def _jsonable(item):
    """fallback for numpy scalars and tuples in the manifest"""
    if hasattr(item, "tolist"):
        return item.tolist()
    return str(item)


from .torus import TorusGrid, GridLadder, build_grid, integrate, integrate_singular  # noqa: E402
from .model import ModelSpec, FormFactor, QuadraticData, extract_quadratic_data  # noqa: E402
