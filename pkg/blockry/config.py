import os
import json
import sys
import shutil
import tempfile
from typing import Any, Optional

from dotenv import load_dotenv

from .utils.data import deep_fill_dict

load_dotenv(override=True)


def _default_base_dir() -> str:
    return os.environ.get(
        "BLOCKRY_CONFIG_DIR", os.path.join(os.path.expanduser("~"), ".blockry")
    )


BASE_CONFIG_DIR = _default_base_dir()

DEFAULT_CONFIG = {
    "data_dir": os.path.join(BASE_CONFIG_DIR, "data"),
    "solver": {
        "max_iterations": 100,
        "tolerance": 1e-10,
        "seed": 0x5EED,
    },
    "numerics": {
        "rank_tol_factor": 1.0,
        "breakdown_tol": 1e-12,
        "replacement_retries": 3,
        "stagnation_tol": 1e-12,
        "intersection_tol": 1e-8,
        "orthogonality_tol": 1e-8,
    },
    "output": {
        "directory": "blockry-out",
    },
}


CONFIG = DEFAULT_CONFIG
CONFIG_DIR = BASE_CONFIG_DIR


def write_config(path, config):
    """
    Writes the configuration file together with a `.bu` backup copy.

    Args:
      path (str): The path to the configuration file.
      config (dict): The configuration to write.

    Returns:
      None

    Examples:
      >>> write_config("config.json", {"solver": {"max_iterations": 60}})
    """
    with open(path, "w+") as f:
        json.dump(config, f, indent=2)

    with open(path + ".bu", "w+") as f:
        json.dump(config, f, indent=2)


def load_config(path):
    """
    Loads the configuration file, falling back to its backup and then to the
    defaults. Missing keys are filled from DEFAULT_CONFIG and the result is
    written back.

    Args:
      path (str): The path to the configuration file.

    Returns:
      None

    Examples:
      >>> load_config("config.json")
    """
    global CONFIG
    config = None
    for candidate in (path, path + ".bu"):
        try:
            with open(candidate, "r") as f:
                config = json.load(f)
            break
        except (OSError, ValueError):
            continue

    if not isinstance(config, dict):
        config = {}

    deep_fill_dict(config, DEFAULT_CONFIG)
    write_config(path, config)
    CONFIG = config


def check_config_dir():
    """
    Makes sure the configuration directory exists and loads its config.json.

    Returns:
      None
    """
    global CONFIG_DIR
    if not os.path.exists(BASE_CONFIG_DIR):
        os.makedirs(BASE_CONFIG_DIR)
    load_config(os.path.join(BASE_CONFIG_DIR, "config.json"))
    CONFIG_DIR = BASE_CONFIG_DIR


def data_dir() -> str:
    """
    Directory holding downloaded matrices. `BLOCKRY_DATA` wins over the config.
    """
    env = os.environ.get("BLOCKRY_DATA")
    if env:
        return env
    return CONFIG.get("data_dir", DEFAULT_CONFIG["data_dir"])


def numerics(key: str, value: Optional[Any] = None) -> Any:
    """
    Returns the numeric setting `key`, or `value` when it is given explicitly.

    Args:
      key (str): Name inside the "numerics" section.
      value (Any, optional): Explicit value overriding the configuration.

    Returns:
      Any: The value to use.

    Examples:
      >>> numerics("breakdown_tol")
      1e-12
      >>> numerics("breakdown_tol", 1e-8)
      1e-08
    """
    if value is not None:
        return value
    section = CONFIG.get("numerics", {})
    if key in section:
        return section[key]
    return DEFAULT_CONFIG["numerics"][key]


def solver_default(key: str) -> Any:
    section = CONFIG.get("solver", {})
    return section.get(key, DEFAULT_CONFIG["solver"][key])


def reload(blockry_config_dir=None):
    global CONFIG, BASE_CONFIG_DIR, CONFIG_DIR
    load_dotenv(override=True)

    if blockry_config_dir is not None:
        os.environ["BLOCKRY_CONFIG_DIR"] = blockry_config_dir

    BASE_CONFIG_DIR = _default_base_dir()
    CONFIG = DEFAULT_CONFIG
    CONFIG_DIR = BASE_CONFIG_DIR
    check_config_dir()


reload()

IN_TEST = False


class This(sys.__class__):  # sys.__class__ is <class 'module'>
    _IN_TEST = IN_TEST

    @property
    def IN_TEST(self):
        return self._IN_TEST

    @IN_TEST.setter
    def IN_TEST(self, value):
        value = bool(value)
        if value == self._IN_TEST:
            return
        if value:
            set_in_test()
        self._IN_TEST = value


del IN_TEST

sys.modules[__name__].__class__ = This


def set_in_test(clear=True):
    """
    Moves configuration and logs into a temporary directory for test runs.

    Args:
      clear (bool): Remove a previous test directory first.

    Returns:
      None

    Examples:
      >>> set_in_test()
    """
    global BASE_CONFIG_DIR
    sys.modules[__name__]._IN_TEST = True
    BASE_CONFIG_DIR = os.path.join(tempfile.gettempdir(), "blockry_test")
    if clear and os.path.exists(BASE_CONFIG_DIR):
        shutil.rmtree(BASE_CONFIG_DIR, ignore_errors=True)
    check_config_dir()

    from ._logging import set_logging_dir  # noqa C0415 # pylint: disable=import-outside-toplevel

    set_logging_dir(os.path.join(BASE_CONFIG_DIR, "logs"))


sys.modules[__name__].IN_TEST = bool(os.environ.get("BLOCKRY_IN_TEST", False))
