"""Command-line behavior: exit codes, determinism, output schemas."""

import json
import socket
import struct
import subprocess
import sys
import time

import jsonschema
import pytest

from _support import DESIGNS, load_schema, pipeline
from esic import cli


def run_cli(args, capsys):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_valid_design_is_silent(self, capsys):
        code, out, err = run_cli(["check", str(DESIGNS / "pipeline.json")], capsys)
        assert (code, out, err) == (0, "", "")

    def test_type_mismatch_exits_one_with_e001(self, tmp_path, capsys):
        d = pipeline()
        d["modules"][1]["ports"][0]["type"] = "uint9"
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(d))
        code, out, err = run_cli(["check", str(bad)], capsys)
        assert code == 1
        assert "E001" in err and str(bad) in err

    def test_parse_errors_exit_one(self, tmp_path, capsys):
        f = tmp_path / "broken.json"
        f.write_text("{")
        code, _, err = run_cli(["check", str(f)], capsys)
        assert code == 1 and "E100" in err

    def test_missing_file_exits_three(self, capsys):
        code, _, err = run_cli(["check", "/no/such/file.json"], capsys)
        assert code == 3 and "cannot read" in err

    def test_usage_error_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_log_level_env_is_accepted(self, capsys, monkeypatch):
        monkeypatch.setenv("ESIC_LOG", "debug")
        code, out, _ = run_cli(["check", str(DESIGNS / "pipeline.json")], capsys)
        assert code == 0 and out == ""


class TestElaborate:
    def test_outputs_only_named_paths(self, tmp_path, capsys):
        dot = tmp_path / "g.dot"
        out = tmp_path / "g.json"
        code, stdout, _ = run_cli(
            ["elaborate", str(DESIGNS / "pipeline.json"),
             "--dot", str(dot), "--out", str(out), "--stats"],
            capsys,
        )
        assert code == 0
        assert dot.read_text().startswith("digraph")
        fabric_schema = load_schema("fabric.schema.json")
        jsonschema.validate(json.loads(out.read_text()), fabric_schema)
        stats = json.loads(stdout)
        assert stats["nodes"]["buffer_stage"] == 3
        assert set(tmp_path.iterdir()) == {dot, out}

    def test_no_flags_no_files(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code, stdout, _ = run_cli(
            ["elaborate", str(DESIGNS / "pipeline.json")], capsys
        )
        assert code == 0 and stdout == ""
        assert list(tmp_path.iterdir()) == []


class TestSim:
    def test_json_report_validates(self, capsys):
        code, stdout, _ = run_cli(
            ["sim", str(DESIGNS / "pipeline.json"), "--ticks", "200",
             "--seed", "7", "--report", "json"],
            capsys,
        )
        assert code == 0
        report = json.loads(stdout)
        jsonschema.validate(report, load_schema("report.schema.json"))
        assert report["ticks"] == 200 and report["seed"] == 7

    def test_fixed_seed_is_byte_identical(self, tmp_path, capsys):
        outputs = []
        for i in range(2):
            trace = tmp_path / f"trace{i}.ndjson"
            code, stdout, _ = run_cli(
                ["sim", str(DESIGNS / "pipeline.json"), "--ticks", "1000",
                 "--seed", "7", "--stall", "0.3", "--report", "json",
                 "--trace", str(trace)],
                capsys,
            )
            assert code == 0
            outputs.append((stdout, trace.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_trace_records_validate(self, tmp_path, capsys):
        trace = tmp_path / "t.ndjson"
        run_cli(
            ["sim", str(DESIGNS / "pipeline.json"), "--ticks", "50",
             "--trace", str(trace)],
            capsys,
        )
        schema = load_schema("trace.schema.json")
        lines = trace.read_text().splitlines()
        assert lines
        for line in lines:
            jsonschema.validate(json.loads(line), schema)

    def test_text_report_default(self, capsys):
        code, stdout, _ = run_cli(
            ["sim", str(DESIGNS / "telemetry.json"), "--ticks", "100"], capsys
        )
        assert code == 0
        assert "telemetry telem:" in stdout
        assert "assertions fired:" in stdout

    def test_bad_stall_probability(self, capsys):
        code, _, err = run_cli(
            ["sim", str(DESIGNS / "pipeline.json"), "--stall", "1.5"], capsys
        )
        assert code == 2 and "stall_prob" in err


class TestSchemaExport:
    def test_matches_server_manifest(self, tmp_path, capsys):
        out = tmp_path / "manifest.json"
        code, _, _ = run_cli(
            ["schema", str(DESIGNS / "loopback.json"), "--json", str(out)], capsys
        )
        assert code == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, load_schema("manifest.schema.json"))
        from esic import cosim, fabric, system

        g = fabric.elaborate(system.load_system(str(DESIGNS / "loopback.json")))
        assert doc == cosim.manifest_to_json(cosim.manifest(g))

    def test_prints_to_stdout(self, capsys):
        code, stdout, _ = run_cli(["schema", str(DESIGNS / "loopback.json")], capsys)
        assert code == 0
        assert json.loads(stdout)["design"] == "loopback"


class TestServeSubprocess:
    def test_serve_announces_port_and_shuts_down(self):
        proc = subprocess.Popen(
            [sys.executable, "-m", "esic.cli", "serve",
             str(DESIGNS / "loopback.json"), "--port", "0",
             "--ticks-per-iter", "64"],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stdout.readline()
            assert line.startswith("serving loopback on ")
            host, port = line.rsplit(" ", 1)[1].strip().rsplit(":", 1)
            with socket.create_connection((host, int(port)), timeout=10) as s:
                s.sendall(struct.pack("<I", 1) + bytes([0x0F]))
                deadline = time.time() + 10
                buf = b""
                while time.time() < deadline and b"\x0f" not in buf[4:5]:
                    chunk = s.recv(4096)
                    if not chunk:
                        break
                    buf += chunk
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
