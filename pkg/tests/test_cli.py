"""Tests for the file format and the command-line pipeline.

The format tests pin bit-exact round-tripping of rationals; the command
tests drive ``main`` directly with argument lists and check reports and
exit codes, including the golden circuit run and the certificate
re-verification loop.
"""

import json
from pathlib import Path

import pytest

from dacscanon.cli import (
    DimensionError,
    ParseError,
    ZeroDenominator,
    _serialize_exfb,
    main,
    parse_system,
    serialize_system,
)
from dacscanon.ratmat import RatMatrix, mat, qq
from dacscanon.systems import Dacs, ExFbTransform, Odecs2
from test_systems import random_dacs, random_odecs
import random

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "circuit.json"


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------


def test_minimal_dacs_file(tmp_path):
    p = write(tmp_path, "min.json", {"kind": "dacs", "E": [["1"]], "H": [["0"]], "L": [[]]})
    d = parse_system(p)
    assert isinstance(d, Dacs)
    assert (d.l, d.n, d.m) == (1, 1, 0)
    assert d.E[0, 0] == 1


def test_zero_denominator_rejected(tmp_path):
    p = write(tmp_path, "z.json", {"kind": "dacs", "E": [["1/0"]], "H": [["0"]], "L": [[]]})
    with pytest.raises(ZeroDenominator):
        parse_system(p)


def test_shipped_circuit_fixture_shape():
    d = parse_system(str(FIXTURE))
    assert d.E.shape == (13, 14)
    assert d.L.shape == (13, 2)
    assert d.H.shape == (13, 14)


def test_malformed_json_is_parse_error(tmp_path):
    p = write(tmp_path, "bad.json", "{not json")
    with pytest.raises(ParseError):
        parse_system(p)


def test_malformed_rational_is_parse_error(tmp_path):
    p = write(tmp_path, "r.json", {"kind": "dacs", "E": [["1/x"]], "H": [["0"]], "L": [[]]})
    with pytest.raises(ParseError):
        parse_system(p)


def test_float_entry_rejected(tmp_path):
    p = write(tmp_path, "f.json", {"kind": "dacs", "E": [[0.5]], "H": [["0"]], "L": [[]]})
    with pytest.raises(ParseError):
        parse_system(p)


def test_ragged_rows_rejected(tmp_path):
    p = write(
        tmp_path,
        "rag.json",
        {"kind": "dacs", "E": [["1", "0"], ["1"]], "H": [["0", "0"], ["0", "0"]], "L": [[], []]},
    )
    with pytest.raises(DimensionError):
        parse_system(p)


def test_shape_mismatch_rejected(tmp_path):
    p = write(
        tmp_path,
        "mis.json",
        {"kind": "dacs", "E": [["1", "0"]], "H": [["0"]], "L": [[]]},
    )
    with pytest.raises(DimensionError):
        parse_system(p)


def test_unknown_kind_rejected(tmp_path):
    p = write(tmp_path, "k.json", {"kind": "weird", "E": [["1"]]})
    with pytest.raises(ParseError):
        parse_system(p)


def test_parse_serialize_identity_dacs(tmp_path):
    rng = random.Random(5)
    for i in range(6):
        d = random_dacs(rng, rng.randint(0, 4), rng.randint(1, 4), rng.randint(0, 3))
        p = write(tmp_path, "rt%d.json" % i, serialize_system(d))
        assert parse_system(p) == d


def test_parse_serialize_identity_odecs(tmp_path):
    rng = random.Random(6)
    for i in range(6):
        o = random_odecs(rng, rng.randint(0, 4), rng.randint(0, 2), rng.randint(0, 2), rng.randint(0, 3))
        p = write(tmp_path, "ro%d.json" % i, serialize_system(o))
        assert parse_system(p) == o


def test_parse_serialize_bit_exact_entries(tmp_path):
    d = Dacs(
        E=mat([[qq(22, 7), qq(-3, 9)]]),
        H=mat([[0, qq(10, 4)]]),
        L=mat([[qq(-1, 3)]]),
    )
    obj = serialize_system(d)
    assert obj["E"][0] == ["22/7", "-1/3"]
    assert obj["H"][0] == ["0", "5/2"]
    p = write(tmp_path, "exact.json", obj)
    assert parse_system(p) == d


def test_metadata_is_optional_and_preserved(tmp_path):
    d = parse_system(str(FIXTURE))
    obj = serialize_system(d, name="x", description="y")
    assert obj["name"] == "x" and obj["description"] == "y"
    p = write(tmp_path, "meta.json", obj)
    assert parse_system(p) == d


def test_report_files_parse_as_their_result(tmp_path):
    out = str(tmp_path / "rep.json")
    assert main(["explicitate", str(FIXTURE), "--out", out]) == 0
    o = parse_system(out)
    assert isinstance(o, Odecs2)
    assert (o.n, o.m, o.s, o.p) == (14, 2, 12, 11)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def test_fbcf_circuit_report(tmp_path):
    out = str(tmp_path / "fb.json")
    assert main(["fbcf", str(FIXTURE), "--out", out]) == 0
    rep = json.loads(Path(out).read_text())
    assert rep["verified"] is True
    assert rep["indices"]["eps_bar_p"] == [2, 2, 1]
    assert rep["indices"]["sigma_p"] == [1, 1]
    assert rep["indices"]["sigma_bar_p"] == [1] * 9
    assert rep["indices"]["eps_p"] == []
    assert rep["indices"]["eta_p"] == []
    assert rep["indices"]["n_rho"] == 0
    stages = [c["stage"] for c in rep["certificates"]]
    assert stages == [
        "explicitation",
        "triangular",
        "normal_form",
        "canonical",
        "total_explicit",
        "total",
    ]


def test_wong_circuit_dimensions(tmp_path):
    out = str(tmp_path / "w.json")
    assert main(["wong", str(FIXTURE), "--out", out]) == 0
    rep = json.loads(Path(out).read_text())
    dims = {s["name"]: s["dim"] for s in rep["subspaces"]}
    assert dims == {"V_star": 5, "W_star": 14}


def test_invariants_circuit(tmp_path):
    out = str(tmp_path / "inv.json")
    assert main(["invariants", str(FIXTURE), "--out", out]) == 0
    rep = json.loads(Path(out).read_text())
    assert rep["indices"]["eps_bar"] == [2, 2, 1]
    assert rep["indices"]["delta"] == 2
    assert rep["fbcf_indices"]["sigma_p"] == [1, 1]
    assert rep["subspace_dims"] == {"V_star": 5, "W_star": 14}


def test_explicit_side_commands_run(tmp_path):
    expl = str(tmp_path / "expl.json")
    assert main(["explicitate", str(FIXTURE), "--out", expl]) == 0
    for cmd in ("emtf", "emnf", "emcf"):
        out = str(tmp_path / (cmd + ".json"))
        assert main([cmd, expl, "--out", out]) == 0
        rep = json.loads(Path(out).read_text())
        assert rep["verified"] is True


def test_stage_dump_includes_intermediate_systems(tmp_path):
    out = str(tmp_path / "fb.json")
    assert main(["fbcf", str(FIXTURE), "--out", out, "--stage-dump"]) == 0
    rep = json.loads(Path(out).read_text())
    names = [s["stage"] for s in rep["stages"]]
    assert names == ["explicit", "triangular", "normal_form", "canonical"]


def test_verify_identity_certificate(tmp_path):
    cert = write(tmp_path, "id.json", _serialize_exfb(ExFbTransform.identity(13, 14, 2), "total"))
    out = str(tmp_path / "v.json")
    rc = main(
        ["verify", "--left", str(FIXTURE), "--right", str(FIXTURE), "--cert", cert, "--out", out]
    )
    assert rc == 0
    assert json.loads(Path(out).read_text())["verified"] is True


def test_verify_rejects_wrong_certificate(tmp_path):
    rep = str(tmp_path / "fb.json")
    assert main(["fbcf", str(FIXTURE), "--out", rep]) == 0
    cert = write(tmp_path, "id.json", _serialize_exfb(ExFbTransform.identity(13, 14, 2), "total"))
    out = str(tmp_path / "v.json")
    rc = main(["verify", "--left", str(FIXTURE), "--right", rep, "--cert", cert, "--out", out])
    assert rc == 1
    assert json.loads(Path(out).read_text())["verified"] is False


def test_every_report_certificate_reverifies(tmp_path):
    # the report invariant: feed each report's own certificate back through
    # `verify` with the report as the right-hand system
    rep = str(tmp_path / "fb.json")
    assert main(["fbcf", str(FIXTURE), "--out", rep]) == 0
    assert main(["verify", "--left", str(FIXTURE), "--right", rep, "--cert", rep]) == 0
    expl = str(tmp_path / "expl.json")
    assert main(["explicitate", str(FIXTURE), "--out", expl]) == 0
    erep = str(tmp_path / "emcf.json")
    assert main(["emcf", expl, "--out", erep]) == 0
    assert main(["verify", "--left", expl, "--right", erep, "--cert", erep]) == 0


def test_roundtrip_command():
    # fifty seeded cases must all decode back to their generated indices
    import io, contextlib

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        rc = main(["roundtrip", "--seed", "7", "--cases", "50"])
    assert rc == 0
    rep = json.loads(buf.getvalue())
    assert rep["matches"] == 50
    assert rep["cases"] == 50
    assert rep["failures"] == []


def test_exit_codes_for_input_errors(tmp_path):
    assert main(["fbcf", str(tmp_path / "missing.json")]) == 2
    bad = write(tmp_path, "bad.json", "{")
    assert main(["fbcf", bad]) == 2
    zden = write(
        tmp_path, "z.json", {"kind": "dacs", "E": [["1/0"]], "H": [["0"]], "L": [[]]}
    )
    assert main(["fbcf", zden]) == 2
    assert main(["mtf", str(FIXTURE)]) == 2  # dacs fed to an explicit-side command


def test_mtf_requires_single_input_kind(tmp_path):
    expl = str(tmp_path / "expl.json")
    assert main(["explicitate", str(FIXTURE), "--out", expl]) == 0
    assert main(["mtf", expl]) == 2  # circuit explicitation has s = 12


def test_mtf_mnf_on_single_kind_system(tmp_path):
    rng = random.Random(3)
    o = random_odecs(rng, 4, 2, 0, 2)
    p = write(tmp_path, "o.json", serialize_system(o))
    for cmd in ("mtf", "mnf"):
        out = str(tmp_path / (cmd + ".json"))
        assert main([cmd, p, "--out", out]) == 0
        assert json.loads(Path(out).read_text())["verified"] is True


def test_out_file_keeps_stdout_quiet(tmp_path, capsys):
    out = str(tmp_path / "w.json")
    assert main(["wong", str(FIXTURE), "--out", out]) == 0
    assert capsys.readouterr().out == ""


def test_empty_system_file_roundtrip(tmp_path):
    d = Dacs(
        E=RatMatrix([], cols=0),
        H=RatMatrix([], cols=0),
        L=RatMatrix([], cols=0),
    )
    p = write(tmp_path, "empty.json", serialize_system(d))
    assert parse_system(p) == d
