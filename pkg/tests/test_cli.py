import json
import re
import subprocess
import sys

import pytest

from homeocomm import FiberKind, SpecDocument, VerticalPL, dump_spec
from homeocomm.cli import main
from homeocomm.corpus import cylinder_corpus


def write_spec(path, m, fiber=FiberKind.POINT, options=None):
    path.write_text(dump_spec(SpecDocument(fiber, m, options or {})))
    return str(path)


def raw(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def shift1(tmp_path):
    return write_spec(tmp_path / "shift1.json", VerticalPL.translation(1.0))


@pytest.fixture
def shift3(tmp_path):
    return write_spec(tmp_path / "shift3.json", VerticalPL.translation(3.0))


def test_factor_unit_translation(tmp_path, shift1):
    out = tmp_path / "cert.json"
    assert main(["factor", shift1, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["max_error"] < 1e-9 and doc["pass"]


def test_factor_negative_slope_is_invalid(tmp_path):
    spec = raw(tmp_path / "neg.json", '{"schema": "1", "fiber": "point", "map": '
               '{"node": "VerticalPL", "breakpoints": [[0, 0], [1, -1]]}}')
    assert main(["factor", spec, "-o", str(tmp_path / "c.json")]) == 2


def test_factor_identity(tmp_path):
    spec = raw(tmp_path / "id.json", '{"schema": "1", "fiber": "point", "map": {"node": "Identity"}}')
    out = tmp_path / "c.json"
    assert main(["factor", spec, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["factors"] == {"a": {"node": "Identity"}, "b": {"node": "Identity"}}


def test_factor_missing_file_is_invalid(tmp_path):
    assert main(["factor", str(tmp_path / "nope.json"), "-o", str(tmp_path / "c.json")]) == 2


def test_factor_not_proper_exit_3(tmp_path):
    spec = write_spec(tmp_path / "steep.json", VerticalPL([(0, 0), (1, 50)]))
    assert main(["factor", spec, "--search-window", "10", "-o", str(tmp_path / "c.json")]) == 3


def test_factor_tolerance_exit_4(tmp_path):
    spec = write_spec(tmp_path / "c.json", cylinder_corpus(2)[1], FiberKind.CIRCLE)
    out = tmp_path / "cert.json"
    code = main(["factor", spec, "--tol", "1e-300", "--grid", "8,41", "-o", str(out)])
    assert code == 4
    assert json.loads(out.read_text())["pass"] is False


def test_flags_override_spec_options(tmp_path):
    spec = write_spec(tmp_path / "s.json", VerticalPL.translation(1.0),
                      options={"window": [-5, 5], "grid": 11})
    out = tmp_path / "c.json"
    assert main(["factor", spec, "--grid", "21", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["window"] == [-5, 5] and rep["grid"] == [1, 21]


def test_powers_examples(tmp_path, shift3):
    assert main(["powers", shift3, "--exponents", "2,3", "-o", str(tmp_path / "a.json")]) == 0
    assert main(["powers", shift3, "--exponents", "0,2", "-o", str(tmp_path / "b.json")]) == 2
    assert main(["powers", shift3, "--exponents", "1,1", "-o", str(tmp_path / "c.json")]) == 0
    assert main(["powers", shift3, "--exponents", "3", "-o", str(tmp_path / "d.json")]) == 2
    assert main(["powers", shift3, "-o", str(tmp_path / "e.json")]) == 2


def test_verify_roundtrip(tmp_path, shift1, capsys):
    cert = tmp_path / "cert.json"
    main(["factor", shift1, "-o", str(cert)])
    assert main(["verify", str(cert)]) == 0
    assert "lattice: reproduced" in capsys.readouterr().out


def test_verify_detects_tampering(tmp_path, shift1, capsys):
    cert = tmp_path / "cert.json"
    main(["factor", shift1, "-o", str(cert)])
    doc = json.loads(cert.read_text())
    doc["lattice"]["m"][17][1] = 2.5
    cert.write_text(json.dumps(doc))
    assert main(["verify", str(cert)]) == 4
    assert "lattice: MISMATCH" in capsys.readouterr().out


def test_verify_malformed(tmp_path):
    assert main(["verify", raw(tmp_path / "x.json", "not json")]) == 2


def test_plot_worked_line_certificate(tmp_path, shift1):
    cert, svg = tmp_path / "cert.json", tmp_path / "plot.svg"
    main(["factor", shift1, "-o", str(cert)])
    assert main(["plot", str(cert), "-o", str(svg)]) == 0
    levels = set(re.findall(r'class="band" data-level="([-0-9.]+)"', svg.read_text()))
    assert {"-2", "2", "5", "8"} <= levels


def test_plot_cylinder_certificate(tmp_path):
    spec = write_spec(tmp_path / "c.json", cylinder_corpus(2)[1], FiberKind.CIRCLE)
    cert, svg = tmp_path / "cert.json", tmp_path / "plot.svg"
    assert main(["factor", spec, "-o", str(cert)]) == 0
    assert main(["plot", str(cert), "-o", str(svg)]) == 0
    text = svg.read_text()
    paths = re.findall(r'<path class="(marker|image)"[^>]*data-samples="(\d+)"', text)
    assert paths and all(n == "1024" for _, n in paths)
    assert 'class="orbit-g"' in text and 'class="orbit-gf"' in text
    svg2 = tmp_path / "plot2.svg"
    main(["plot", str(cert), "-o", str(svg2)])
    assert svg2.read_bytes() == svg.read_bytes()


def test_plot_empty_certificate(tmp_path):
    assert main(["plot", raw(tmp_path / "e.json", ""), "-o", str(tmp_path / "e.svg")]) == 2
    assert main(["plot", raw(tmp_path / "f.json", "{}"), "-o", str(tmp_path / "f.svg")]) == 2


def test_factor_is_deterministic(tmp_path, shift1):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["factor", shift1, "-o", str(a)])
    main(["factor", shift1, "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point(tmp_path, shift1):
    out = tmp_path / "cert.json"
    proc = subprocess.run([sys.executable, "-m", "homeocomm", "factor", shift1, "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
