"""
Input loader for WrenchLab
Reads contact-spec JSON, raw wrench CSV and problem JSON into library types
"""

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from src.errors import InputFormatError, WrenchLabError
from src.surfaces import (
    ImplicitSurface,
    UncertaintyField,
    constant_field,
    contact_at,
    field_from_dict,
    surface_from_dict,
)
from src.wrench import VARIANCE_FLOOR, ContactSpec, FrictionModel, WrenchSet, basis_wrenches

# Module logger
logger = logging.getLogger(__name__)


SCHEMA_VERSION = 1

# Raw wrench CSV header, in column order
WRENCH_COLUMNS = ("fx", "fy", "fz", "tx", "ty", "tz")

# Accepted values of the optional "normals" key
NORMAL_CONVENTIONS = ("inward", "outward")


def fingerprint(document: Any) -> str:
    """sha256 of the canonical JSON encoding of a parsed input document."""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class GraspInput:
    """
    One loaded grasp.

    contacts and model are None for raw wrench CSV input; document keeps the
    parsed JSON so commands can read their own optional sections
    (pong, mc, ...).
    """
    fingerprint: str
    wrenches: WrenchSet
    contacts: Optional[List[ContactSpec]] = None
    model: Optional[FrictionModel] = None
    surface: Optional[ImplicitSurface] = None
    uncertainty: Optional[UncertaintyField] = None
    document: Dict[str, Any] = field(default_factory=dict)


class GraspDataLoader:
    """Loads grasp descriptions from disk"""

    def __init__(self, encoding: str = "utf-8"):
        """
        Initialize loader

        Args:
            encoding: Text encoding of every input file
        """
        self.encoding = encoding

    def read_text(self, path: Union[str, Path]) -> str:
        """
        Read a whole input file

        Raises:
            InputFormatError: if the file cannot be read
        """
        try:
            return Path(path).read_text(encoding=self.encoding)
        except (OSError, UnicodeDecodeError) as e:
            raise InputFormatError(f"cannot read {path}: {e}")

    def read_json(self, path: Union[str, Path]) -> Dict[str, Any]:
        """
        Parse a JSON document and check its schema version

        A missing "schema" key is read as version 1 with a warning.
        """
        try:
            doc = json.loads(self.read_text(path))
        except json.JSONDecodeError as e:
            raise InputFormatError(f"{path}: invalid JSON ({e})")
        if not isinstance(doc, dict):
            raise InputFormatError(f"{path}: top level must be an object")

        version = doc.get("schema")
        if version is None:
            logger.warning(f"{path}: no schema field, assuming version {SCHEMA_VERSION}")
        elif version != SCHEMA_VERSION:
            raise InputFormatError(f"{path}: unsupported schema {version!r} (expected {SCHEMA_VERSION})")
        return doc

    def load(self, path: Union[str, Path]) -> GraspInput:
        """
        Load a contact spec or a raw wrench file, picked by extension

        Args:
            path: .csv for raw wrenches, anything else is read as JSON

        Returns:
            GraspInput with the basis wrenches filled in
        """
        if Path(path).suffix.lower() == ".csv":
            return self.load_wrench_csv(path)
        return self.load_contact_spec(path)

    def load_wrench_csv(self, path: Union[str, Path]) -> GraspInput:
        """
        Load a raw wrench file: header fx,fy,fz,tx,ty,tz then one wrench per row

        Raises:
            InputFormatError: on a wrong header, short rows, non-numeric or
                non-finite values, or an empty body
        """
        points = self.parse_wrench_csv(self.read_text(path), source=str(path))
        logger.info(f"Loaded {len(points)} wrenches from {path}")
        return GraspInput(
            fingerprint=fingerprint({"wrenches": points.tolist()}),
            wrenches=WrenchSet(points),
        )

    @staticmethod
    def parse_wrench_csv(text: str, source: str = "<csv>") -> np.ndarray:
        """Parse raw wrench CSV text into an (n_w, 6) array."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(cell.strip() for cell in r)]
        if not rows:
            raise InputFormatError(f"{source}: empty file")

        header = tuple(cell.strip() for cell in rows[0])
        if header != WRENCH_COLUMNS:
            raise InputFormatError(f"{source}: header must be {','.join(WRENCH_COLUMNS)}, got {','.join(header)}")

        points = []
        for line_no, row in enumerate(rows[1:], start=2):
            if len(row) != len(WRENCH_COLUMNS):
                raise InputFormatError(f"{source}:{line_no}: expected 6 columns, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise InputFormatError(f"{source}:{line_no}: non-numeric value")
            if not all(np.isfinite(values)):
                raise InputFormatError(f"{source}:{line_no}: non-finite value")
            points.append(values)

        if not points:
            raise InputFormatError(f"{source}: no wrench rows")
        return np.array(points, dtype=float)

    def load_contact_spec(self, path: Union[str, Path]) -> GraspInput:
        """
        Load a contact-spec JSON document

        Expected keys: schema, contacts [{x, n_bar?, surface_ref?, sigma1_sq?,
        sigma2_sq?}], friction {mu, n_sides}, optional surface, field and
        normals ("inward" default, "outward" toy normals are negated).
        """
        doc = self.read_json(path)
        grasp = self.parse_contact_spec(doc, source=str(path))
        logger.info(f"Loaded {len(grasp.contacts)} contacts from {path}")
        return grasp

    def parse_contact_spec(self, doc: Dict[str, Any], source: str = "<json>") -> GraspInput:
        """Build a GraspInput from an already parsed contact-spec document."""
        model = self._parse_friction(doc.get("friction", {}), source)
        surface = surface_from_dict(doc["surface"]) if "surface" in doc else None
        unc = field_from_dict(doc["field"]) if "field" in doc else None

        convention = doc.get("normals", "inward")
        if convention not in NORMAL_CONVENTIONS:
            raise InputFormatError(f"{source}: normals must be one of {NORMAL_CONVENTIONS}, got {convention!r}")
        outward = convention == "outward"

        entries = doc.get("contacts")
        if not isinstance(entries, list) or not entries:
            raise InputFormatError(f"{source}: contacts must be a non-empty list")

        contacts = [
            self._parse_contact(entry, k, surface, unc, outward, source)
            for k, entry in enumerate(entries)
        ]
        return GraspInput(
            fingerprint=fingerprint(doc),
            wrenches=basis_wrenches(contacts, model),
            contacts=contacts,
            model=model,
            surface=surface,
            uncertainty=unc,
            document=doc,
        )

    @staticmethod
    def _parse_friction(data: Dict[str, Any], source: str) -> FrictionModel:
        try:
            return FrictionModel(mu=float(data.get("mu", 0.5)), n_sides=int(data.get("n_sides", 4)))
        except (AttributeError, TypeError, ValueError) as e:
            raise InputFormatError(f"{source}: bad friction section ({e})")

    def _parse_contact(
        self,
        entry: Dict[str, Any],
        index: int,
        surface: Optional[ImplicitSurface],
        unc: Optional[UncertaintyField],
        outward: bool,
        source: str,
    ) -> ContactSpec:
        where = f"{source}: contact {index}"
        if not isinstance(entry, dict):
            raise InputFormatError(f"{where} must be an object")
        try:
            x = _vector(entry.get("x"), "x")
            explicit = "sigma1_sq" in entry
            s1 = float(entry.get("sigma1_sq", 0.0))
            s2 = float(entry.get("sigma2_sq", s1))

            if "n_bar" in entry and not entry.get("surface_ref", False):
                n_bar = _vector(entry["n_bar"], "n_bar")
                if outward:
                    n_bar = -n_bar
                if unc is not None and surface is not None and not explicit:
                    s1, s2 = (max(v, VARIANCE_FLOOR) for v in unc.variances(surface, x))
                return ContactSpec.from_point_normal(x, n_bar, sigma1_sq=s1, sigma2_sq=s2)

            # Normal and frame come from the surface
            if surface is None:
                raise InputFormatError(f"{where} has no n_bar and the document has no surface")
            if unc is None or explicit:
                contact = contact_at(surface, constant_field(VARIANCE_FLOOR), x)
                return replace(contact, sigma1_sq=s1, sigma2_sq=s2)
            return contact_at(surface, unc, x)
        except InputFormatError:
            raise
        except WrenchLabError as e:
            raise InputFormatError(f"{where}: {e}")
        except (TypeError, ValueError) as e:
            raise InputFormatError(f"{where}: {e}")

    def load_problem(self, path: Union[str, Path]) -> Dict[str, Any]:
        """
        Load a problem JSON document without interpreting it

        Commands parse their own sections (SynthProblem.from_dict for
        synthesis, parse_contact_spec for PONG).
        """
        doc = self.read_json(path)
        logger.debug(f"Loaded problem {path} (keys: {sorted(doc)})")
        return doc


def _vector(value: Any, name: str, size: int = 3) -> np.ndarray:
    if not isinstance(value, Sequence) or isinstance(value, str) or len(value) != size:
        raise InputFormatError(f"{name} must be a list of {size} numbers")
    v = np.array([float(c) for c in value], dtype=float)
    if not np.all(np.isfinite(v)):
        raise InputFormatError(f"{name} must be finite")
    return v
