"""
Settings for WrenchLab - persistent defaults for the command-line tools

Manages:
- LP feasibility tolerance
- PONG defaults (search directions, quadrature nodes, θ clamp)
- Synthesis defaults (iteration cap, contact separation)
- Monte Carlo and verification sample counts

Uses a simple versioned JSON file for storage.
"""

import copy
import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, Optional

from src.linprog import TOL_FEAS
from src.pong import THETA_MAX, PongConfig

# Module logger
logger = logging.getLogger(__name__)


# Environment override for the settings file location
SETTINGS_ENV = "WRENCHLAB_SETTINGS"

# (low, high, type) per setting; values outside are clamped on load
RANGES = {
    ("lp", "tol_feas"): (1e-14, 1e-4, float),
    ("pong", "n_dirs"): (3, 64, int),
    ("pong", "quad_nodes"): (8, 128, int),
    ("pong", "theta_max"): (1e-3, 1e3, float),
    ("synth", "max_iters"): (1, 10_000, int),
    ("synth", "min_separation"): (1e-6, 1.0, float),
    ("mc", "samples"): (0, 10_000_000, int),
    ("verify", "trials"): (1, 1_000_000, int),
}


class Settings:
    """
    Persistent tool settings.

    Settings are stored in a simple JSON file so they can be inspected and
    edited by hand. Command-line flags always override them.
    """

    # Default settings file location
    DEFAULT_SETTINGS_FILE = "data/wrenchlab_settings.json"

    # Current settings version
    SETTINGS_VERSION = "1.0.0"

    # Smallest non-zero Monte Carlo sample count the oracles accept
    MIN_MC_SAMPLES = 1000

    def __init__(self, settings_file: Optional[str] = None, persist: bool = True):
        """
        Initialize Settings.

        Args:
            settings_file: Path to settings file (WRENCHLAB_SETTINGS, then
                the default, when None)
            persist: When False the file is only read, never created or
                rewritten
        """
        self.persist = persist
        path = settings_file or os.environ.get(SETTINGS_ENV) or self.DEFAULT_SETTINGS_FILE
        self.settings_file = Path(path)
        self.settings: Dict[str, Any] = self._load()

    def _get_defaults(self) -> Dict[str, Any]:
        """Get default settings structure."""
        return {
            "version": self.SETTINGS_VERSION,
            "lp": {"tol_feas": TOL_FEAS},
            "pong": {"n_dirs": 8, "quad_nodes": 32, "theta_max": THETA_MAX},
            "synth": {"max_iters": 200, "min_separation": 0.02},
            "mc": {"samples": 10_000},
            "verify": {"trials": 100},
        }

    def _write(self, data: Dict[str, Any]) -> bool:
        """
        Write settings with the temp file + rename pattern.

        Returns:
            True if successful, False otherwise
        """
        if not self.persist:
            return False
        try:
            self.settings_file.parent.mkdir(parents=True, exist_ok=True)
            temp_file = Path(str(self.settings_file) + ".tmp")
            with open(temp_file, "w", encoding="utf-8") as f:
                json.dump(data, f, indent=2, sort_keys=True)
            temp_file.replace(self.settings_file)
            return True
        except OSError as e:
            logger.warning(f"Could not write settings file {self.settings_file}: {e}")
            return False

    def _validate(self, data: Dict[str, Any]) -> bool:
        """
        Fill missing keys from defaults and clamp out-of-range values in place.

        Returns:
            True if anything was corrected
        """
        corrected = False
        defaults = self._get_defaults()
        for section, values in defaults.items():
            if section == "version":
                continue
            if not isinstance(data.get(section), dict):
                data[section] = copy.deepcopy(values)
                corrected = True
                continue
            for key, default in values.items():
                if key not in data[section]:
                    data[section][key] = default
                    corrected = True

        for (section, key), (low, high, kind) in RANGES.items():
            original = data[section][key]
            try:
                value = kind(original)
            except (TypeError, ValueError):
                value = defaults[section][key]
                logger.warning(f"{section}.{key} '{original}' invalid type, defaulting to {value}")
                data[section][key] = value
                corrected = True
                continue
            clamped = max(low, min(high, value))
            if (section, key) == ("mc", "samples") and 0 < clamped < self.MIN_MC_SAMPLES:
                clamped = self.MIN_MC_SAMPLES
            if clamped != original:
                logger.warning(f"{section}.{key} {original} out of range, clamped to {clamped}")
                corrected = True
            data[section][key] = clamped
        return corrected

    def _load(self) -> Dict[str, Any]:
        """
        Load settings from the JSON file.

        A missing file is created with defaults; a corrupt one is replaced
        by them.
        """
        start_time = time.perf_counter()

        if not self.settings_file.exists():
            defaults = self._get_defaults()
            if self._write(defaults):
                logger.debug(f"Created default settings file {self.settings_file}")
            return defaults

        try:
            with open(self.settings_file, "r", encoding="utf-8") as f:
                data = json.load(f)
            if not isinstance(data, dict):
                raise ValueError("settings must be a JSON object")
        except (json.JSONDecodeError, OSError, UnicodeDecodeError, ValueError) as e:
            logger.warning(f"Settings file corrupted, resetting to defaults - {e}")
            defaults = self._get_defaults()
            self._write(defaults)
            return defaults

        if data.get("version") != self.SETTINGS_VERSION:
            logger.warning(f"Settings version mismatch. Expected {self.SETTINGS_VERSION}, got {data.get('version')}")
            data["version"] = self.SETTINGS_VERSION

        if self._validate(data):
            if self._write(data):
                logger.info("Corrected settings file saved")

        elapsed_ms = (time.perf_counter() - start_time) * 1000
        logger.debug(f"Settings loaded in {elapsed_ms:.2f}ms")
        return data

    def save(self) -> bool:
        """Persist the current settings."""
        return self._write(self.settings)

    def get(self, section: str, key: str) -> Any:
        """Get one setting."""
        return self.settings[section][key]

    def set(self, section: str, key: str, value: Any):
        """
        Set one setting in memory, clamped to its valid range.

        Call save() to persist.

        Raises:
            KeyError: for an unknown setting
        """
        if (section, key) not in RANGES:
            raise KeyError(f"unknown setting {section}.{key}")
        self.settings[section][key] = value
        self._validate(self.settings)

    @property
    def tol_feas(self) -> float:
        return self.get("lp", "tol_feas")

    @property
    def mc_samples(self) -> int:
        return self.get("mc", "samples")

    @property
    def verify_trials(self) -> int:
        return self.get("verify", "trials")

    @property
    def max_iters(self) -> int:
        return self.get("synth", "max_iters")

    @property
    def min_separation(self) -> float:
        return self.get("synth", "min_separation")

    def pong_config(self) -> PongConfig:
        """PongConfig built from the pong section."""
        p = self.settings["pong"]
        return PongConfig(n_dirs=p["n_dirs"], quad_nodes=p["quad_nodes"], theta_max=p["theta_max"])

    def reset(self):
        """Reset to default settings (in memory)."""
        self.settings = self._get_defaults()

    def export_settings(self) -> str:
        """Export settings as a JSON string."""
        return json.dumps(self.settings, indent=2, sort_keys=True)
