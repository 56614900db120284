"""Tests for TOML model documents."""

import pytest

from ksymp import ModelFileError, load_model, parse_model

SHIPPED = ["free", "gauge", "half_v11_squared", "harmonic", "linear", "oscillator", "product", "quartic", "secondary"]


class TestShippedModels:
    """Tests for the model files in models/."""

    @pytest.mark.parametrize("name", SHIPPED)
    def test_loads(self, models_dir, name):
        """Test that every shipped model parses and is named after itself."""
        document = load_model(models_dir / f"{name}.toml")
        assert document.model.name == name
        assert document.source.endswith(f"{name}.toml")

    def test_harmonic_contents(self, models_dir):
        """Test the optional keys of the harmonic model."""
        document = load_model(models_dir / "harmonic.toml")
        assert (document.model.k, document.model.n) == (2, 1)
        assert document.model.hamiltonian is not None
        assert [str(e) for e in document.reference] == ["sin(t1 + t2)"]
        origin = document.samples["origin"]
        assert origin.q.tolist() == [0.0]
        assert origin.v.tolist() == [[1.0, 1.0]]

    def test_sample_order(self, models_dir):
        """Test that named samples keep file order."""
        document = load_model(models_dir / "half_v11_squared.toml")
        assert list(document.samples) == ["a", "b", "c", "d"]
        assert [str(c) for c in document.model.constraints] == ["p2_1"]


class TestParseModel:
    """Tests for parsing and error reporting."""

    def test_minimal(self):
        """Test the required keys only."""
        document = parse_model('k = 1\nn = 1\nlagrangian = "0.5*v1_1^2"\n')
        assert document.model.name == "model"
        assert document.samples == {}
        assert document.reference is None
        assert document.model.hamiltonian is None

    def test_default_sample_coordinates(self):
        """Test that omitted q and v default to zeros."""
        text = 'k = 2\nn = 1\nlagrangian = "v1_1"\n\n[samples.rest]\nq = [1.0]\n'
        point = parse_model(text).samples["rest"]
        assert point.q.tolist() == [1.0]
        assert point.v.tolist() == [[0.0, 0.0]]

    def test_name_from_file(self, tmp_path):
        """Test that a file without a name key is named after its stem."""
        path = tmp_path / "mymodel.toml"
        path.write_text('k = 1\nn = 1\nlagrangian = "0.5*v1_1^2"\n', encoding="utf-8")
        assert load_model(path).model.name == "mymodel"

    @pytest.mark.parametrize(
        ("text", "line", "fragment"),
        [
            ('k = 1\nn = 1\nlagrangian = "v1_1 +"\n', 3, "lagrangian"),
            ('k = 1\nn = 1\nlagrangain = "v1_1"\n', 3, "unknown key"),
            ('k = 0\nn = 1\nlagrangian = "v1_1"\n', 1, "positive integer"),
            ('k = 1\nn = true\nlagrangian = "v1_1"\n', 2, "positive integer"),
            ('k = 1\nn = 1\nlagrangian = "v1_1 + p1_1"\n', 3, "p1_1"),
            ('k = 1\nn = 1\nlagrangian = 3\n', 3, "expression string"),
            ('k = 1\nn = 1\nlagrangian = "v1_1"\nreference = ["t1", "t2"]\n', 4, "reference"),
            ('k = 1\nn = 1\nlagrangian = "v1_1"\nconstraints = "p1_1"\n', 4, "list"),
            ('k = 1\nn = 1\nlagrangian = "v1_1"\n\n[samples.bad]\nq = [0.0, 1.0]\n', 5, "bad"),
            ('k = 1\nn = 1\nlagrangian = "v1_1"\n\n[samples.odd]\np = [0.0]\n', 5, "keys q and v"),
            ('k = 1\nn = \nlagrangian = "v1_1"\n', 2, "invalid TOML"),
        ],
    )
    def test_errors_carry_lines(self, text, line, fragment):
        """Test that content errors name the offending line."""
        with pytest.raises(ModelFileError) as info:
            parse_model(text, "bad.toml")
        assert info.value.line == line
        assert info.value.source == "bad.toml"
        assert fragment in str(info.value)
        assert str(info.value).startswith(f"bad.toml:{line}: ")

    def test_missing_required_key(self):
        """Test that a missing key has no line."""
        with pytest.raises(ModelFileError, match="'lagrangian'") as info:
            parse_model("k = 1\nn = 1\n")
        assert info.value.line is None

    def test_unreadable_file(self, tmp_path):
        """Test that a missing file is a model-file error."""
        with pytest.raises(ModelFileError, match="cannot read"):
            load_model(tmp_path / "absent.toml")
