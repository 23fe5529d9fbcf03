"""
Tests for contact-spec, wrench CSV and problem loading
"""

import json

import numpy as np
import pytest

from src.data.loader import GraspDataLoader, fingerprint
from src.errors import InputFormatError
from src.wrench import VARIANCE_FLOOR
from tests.helpers.grasp_factory import (
    contact_spec_document,
    cross_polytope,
    ring_grasp,
    write_json,
    write_wrench_csv,
)


@pytest.fixture
def loader():
    return GraspDataLoader()


class TestFingerprint:

    def test_key_order_does_not_matter(self):
        assert fingerprint({"a": 1, "b": [1, 2]}) == fingerprint({"b": [1, 2], "a": 1})

    def test_content_matters(self):
        assert fingerprint({"a": 1}) != fingerprint({"a": 2})
        assert len(fingerprint({})) == 64


class TestWrenchCsv:

    def test_load(self, loader, tmp_path):
        points = cross_polytope().points
        grasp = loader.load(write_wrench_csv(tmp_path / "w.csv", points))
        np.testing.assert_array_equal(grasp.wrenches.points, points)
        assert grasp.contacts is None
        assert grasp.model is None
        assert grasp.fingerprint == fingerprint({"wrenches": points.tolist()})

    def test_blank_lines_are_skipped(self):
        text = "fx,fy,fz,tx,ty,tz\n\n1,0,0,0,0,0\n\n-1,0,0,0,0,0\n"
        assert GraspDataLoader.parse_wrench_csv(text).shape == (2, 6)

    @pytest.mark.parametrize("text,message", [
        ("", "empty"),
        ("fx,fy,fz,tx,ty\n1,2,3,4,5\n", "header"),
        ("fx,fy,fz,tx,ty,tz\n", "no wrench rows"),
        ("fx,fy,fz,tx,ty,tz\n1,2,3\n", "6 columns"),
        ("fx,fy,fz,tx,ty,tz\n1,2,3,4,5,abc\n", "non-numeric"),
        ("fx,fy,fz,tx,ty,tz\n1,2,3,4,5,nan\n", "non-finite"),
        ("fx,fy,fz,tx,ty,tz\n1,2,3,4,5,inf\n", "non-finite"),
    ])
    def test_rejects(self, text, message):
        with pytest.raises(InputFormatError, match=message):
            GraspDataLoader.parse_wrench_csv(text)

    def test_line_number_in_message(self):
        with pytest.raises(InputFormatError, match=":3:"):
            GraspDataLoader.parse_wrench_csv("fx,fy,fz,tx,ty,tz\n1,2,3,4,5,6\n1,2\n", source="w.csv")

    def test_missing_file(self, loader, tmp_path):
        with pytest.raises(InputFormatError, match="cannot read"):
            loader.load(tmp_path / "missing.csv")


class TestContactSpec:

    def test_explicit_normals(self, loader, tmp_path, ring_contacts):
        contacts, model = ring_contacts
        doc = contact_spec_document(contacts, model)
        grasp = loader.load(write_json(tmp_path / "g.json", doc))
        assert len(grasp.contacts) == 3
        assert grasp.model == model
        assert grasp.wrenches.points.shape == (12, 6)
        assert grasp.fingerprint == fingerprint(doc)
        for loaded, original in zip(grasp.contacts, contacts):
            np.testing.assert_allclose(loaded.n_bar, original.n_bar)
            assert loaded.sigma1_sq == original.sigma1_sq

    def test_outward_normals_are_negated(self, loader, tmp_path, ring_contacts):
        contacts, model = ring_contacts
        inward = loader.load(write_json(tmp_path / "in.json", contact_spec_document(contacts, model)))
        outward = loader.load(write_json(tmp_path / "out.json", contact_spec_document(contacts, model, outward=True)))
        for a, b in zip(inward.contacts, outward.contacts):
            np.testing.assert_allclose(a.n_bar, b.n_bar)
        np.testing.assert_allclose(inward.wrenches.points, outward.wrenches.points)

    def test_unnormalized_normal(self, loader):
        doc = {"schema": 1, "contacts": [{"x": [0.05, 0, 0], "n_bar": [-2.0, 0, 0]}]}
        grasp = loader.parse_contact_spec(doc)
        np.testing.assert_allclose(grasp.contacts[0].n_bar, [-1.0, 0.0, 0.0])

    def test_default_friction(self, loader):
        doc = {"schema": 1, "contacts": [{"x": [0.05, 0, 0], "n_bar": [-1, 0, 0]}]}
        grasp = loader.parse_contact_spec(doc)
        assert grasp.model.mu == 0.5
        assert grasp.model.n_sides == 4

    def test_surface_normals_and_field(self, loader):
        doc = {
            "schema": 1,
            "surface": {"kind": "sphere", "radius": 0.05},
            "field": {"kind": "polar", "scale": 100},
            "contacts": [{"x": [0.0, 0.03, 0.04]}, {"x": [0.05, 0.0, 0.0]}],
        }
        grasp = loader.parse_contact_spec(doc)
        near_pole, equator = grasp.contacts
        np.testing.assert_allclose(near_pole.n_bar, [0.0, -0.6, -0.8], atol=1e-12)
        assert near_pole.sigma1_sq == pytest.approx(100 * 0.04 ** 2)
        assert equator.sigma1_sq == VARIANCE_FLOOR
        assert grasp.surface is not None
        assert grasp.uncertainty is not None

    def test_explicit_variances_override_field(self, loader):
        doc = {
            "schema": 1,
            "surface": {"kind": "sphere", "radius": 0.05},
            "field": {"kind": "polar"},
            "contacts": [{"x": [0.0, 0.03, 0.04], "sigma1_sq": 1e-3, "sigma2_sq": 2e-3}],
        }
        c = loader.parse_contact_spec(doc).contacts[0]
        assert (c.sigma1_sq, c.sigma2_sq) == (1e-3, 2e-3)

    def test_surface_without_field(self, loader):
        doc = {
            "schema": 1,
            "surface": {"kind": "sphere", "radius": 0.05},
            "contacts": [{"x": [0.05, 0.0, 0.0], "sigma1_sq": 1e-3}],
        }
        c = loader.parse_contact_spec(doc).contacts[0]
        assert c.sigma1_sq == c.sigma2_sq == 1e-3

    def test_field_with_explicit_normal(self, loader):
        doc = {
            "schema": 1,
            "surface": {"kind": "sphere", "radius": 0.05},
            "field": {"kind": "constant", "value": 4e-3},
            "contacts": [{"x": [0.05, 0.0, 0.0], "n_bar": [-1, 0, 0]}],
        }
        assert loader.parse_contact_spec(doc).contacts[0].sigma1_sq == 4e-3

    def test_missing_schema_warns(self, loader, tmp_path, ring_contacts, caplog):
        contacts, model = ring_contacts
        doc = contact_spec_document(contacts, model)
        del doc["schema"]
        loader.load(write_json(tmp_path / "g.json", doc))
        assert "no schema field" in caplog.text

    @pytest.mark.parametrize("doc,message", [
        ({"schema": 2, "contacts": []}, "unsupported schema"),
        ({"schema": 1, "contacts": []}, "non-empty list"),
        ({"schema": 1, "contacts": [{"x": [0, 0, 1]}]}, "no surface"),
        ({"schema": 1, "contacts": [{"x": [0, 0], "n_bar": [0, 0, 1]}]}, "x must be"),
        ({"schema": 1, "contacts": [{"x": [0, 0, 1], "n_bar": [0, 0, 0]}]}, "contact 0"),
        ({"schema": 1, "contacts": [{"x": [0, 0, 1], "n_bar": [0, 0, 1], "sigma1_sq": -1}]}, "contact 0"),
        ({"schema": 1, "normals": "sideways", "contacts": [{"x": [0, 0, 1], "n_bar": [0, 0, 1]}]}, "normals"),
        ({"schema": 1, "friction": {"mu": -1}, "contacts": [{"x": [0, 0, 1], "n_bar": [0, 0, 1]}]}, "friction"),
        ({"schema": 1, "contacts": ["nope"]}, "must be an object"),
    ])
    def test_rejects(self, loader, tmp_path, doc, message):
        with pytest.raises(InputFormatError, match=message):
            loader.load(write_json(tmp_path / "bad.json", doc))

    def test_invalid_json(self, loader, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InputFormatError, match="invalid JSON"):
            loader.load(path)

    def test_top_level_must_be_object(self, loader, tmp_path):
        path = tmp_path / "list.json"
        path.write_text(json.dumps([1, 2]), encoding="utf-8")
        with pytest.raises(InputFormatError, match="object"):
            loader.load(path)


def test_load_problem_keeps_document(loader, tmp_path):
    doc = {"schema": 1, "problem": {"surface": {"kind": "sphere"}}}
    assert loader.load_problem(write_json(tmp_path / "p.json", doc)) == doc


def test_four_finger_document_round_trip(loader, tmp_path):
    contacts, model = ring_grasp(n_fingers=4, mu=0.3, n_sides=6)
    grasp = loader.load(write_json(tmp_path / "g.json", contact_spec_document(contacts, model)))
    assert grasp.wrenches.points.shape == (24, 6)
    assert grasp.model.mu == 0.3
