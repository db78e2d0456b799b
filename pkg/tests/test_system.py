"""System description parsing and static checks; every code has a golden."""

import json

import jsonschema
import pytest

from _support import DESIGNS, load_schema, pipeline
from esic import system
from esic.errors import DiagnosticsError


def base() -> dict:
    return pipeline(stages=0, monitored=False)


def parse_codes(design: dict) -> list[str]:
    try:
        system.parse_system(json.dumps(design))
    except DiagnosticsError as exc:
        return [d.code for d in exc.diagnostics]
    return []


def check_codes(design: dict) -> list[str]:
    desc = system.parse_system(json.dumps(design))
    return [d.code for d in system.check(desc)]


class TestParse:
    def test_minimal_valid(self):
        desc = system.parse_system(json.dumps(base()))
        assert desc.name == "pipe"
        assert len(desc.connections) == 1
        assert len(desc.modules) == 2

    def test_e100_bad_json(self):
        with pytest.raises(DiagnosticsError) as exc:
            system.parse_system("{not json", filename="x.json")
        (d,) = exc.value.diagnostics
        assert d.code == "E100"
        assert d.location.startswith("x.json:")

    def test_e100_wrong_top_level(self):
        with pytest.raises(DiagnosticsError) as exc:
            system.parse_system("[1,2]")
        assert [d.code for d in exc.value.diagnostics] == ["E100"]

    def test_e101_missing_fields(self):
        d = base()
        del d["clocks"]
        del d["modules"][0]["behavior"]
        codes = parse_codes(d)
        assert codes.count("E101") >= 2

    def test_e101_unknown_key(self):
        d = base()
        d["typo"] = 1
        assert "E101" in parse_codes(d)

    def test_e102_unknown_clock(self):
        d = base()
        d["instances"][0]["clock"] = "phantom"
        try:
            system.parse_system(json.dumps(d), filename="f.json")
        except DiagnosticsError as exc:
            (diag,) = exc.diagnostics
            assert diag.code == "E102"
            assert "instances[0]" in diag.location
        else:
            pytest.fail("expected diagnostics")

    def test_e102_unknown_module_and_port(self):
        d = base()
        d["instances"][1]["module"] = "Nope"
        assert "E102" in parse_codes(d)
        d2 = base()
        d2["connections"][0]["from"] = "gen0.nope"
        assert "E102" in parse_codes(d2)

    def test_e103_duplicate_instance(self):
        d = base()
        d["instances"].append({"name": "gen0", "module": "Gen", "clock": "main"})
        assert "E103" in parse_codes(d)

    def test_e103_other_namespaces(self):
        d = base()
        d["clocks"].append({"name": "main", "period": 2})
        d["modules"].append(dict(d["modules"][0]))
        codes = parse_codes(d)
        assert codes.count("E103") == 2

    def test_e104_bad_type_text(self):
        d = base()
        d["modules"][0]["ports"][0]["type"] = "uint"
        assert "E104" in parse_codes(d)
        d["modules"][0]["ports"][0]["type"] = "list<list<uint8>>"
        assert "E104" in parse_codes(d)

    def test_e105_chunk_size(self):
        d = base()
        d["modules"][0]["ports"][0]["chunk_size"] = 2  # not a list port
        assert "E105" in parse_codes(d)
        d2 = pipeline(type_text="list<uint8>", stages=0)  # missing chunk sizes
        assert parse_codes(d2).count("E105") == 2
        d3 = pipeline(type_text="list<uint8>", stages=0, chunk_src=0, chunk_dst=1)
        assert "E105" in parse_codes(d3)

    def test_e106_bad_values(self):
        d = base()
        d["clocks"][0]["period"] = 0
        assert "E106" in parse_codes(d)
        d2 = base()
        d2["connections"][0]["buffer_stages"] = -1
        assert "E106" in parse_codes(d2)
        d3 = base()
        d3["modules"][0]["behavior"] = "wizard"
        assert "E106" in parse_codes(d3)
        d4 = base()
        d4["modules"][0]["ports"][0]["dir"] = "sideways"
        assert "E106" in parse_codes(d4)
        d5 = base()
        d5["connections"][0]["from"] = "eat0.in"  # in port used as a source
        assert "E106" in parse_codes(d5)

    def test_e107_builtin_profiles(self):
        d = base()
        d["modules"][0]["ports"].append({"name": "extra", "dir": "in", "type": "uint8"})
        assert "E107" in parse_codes(d)  # source with an input port
        fork = {
            "name": "F",
            "behavior": "fork",
            "ports": [
                {"name": "in", "dir": "in", "type": "uint8"},
                {"name": "o1", "dir": "out", "type": "uint8"},
            ],
        }
        d2 = base()
        d2["modules"].append(fork)
        assert "E107" in parse_codes(d2)  # fork needs two outputs
        fork2 = dict(fork)
        fork2["ports"] = fork["ports"] + [{"name": "o2", "dir": "out", "type": "uint9"}]
        d3 = base()
        d3["modules"].append(fork2)
        assert "E107" in parse_codes(d3)  # fork ports must share one type

    def test_no_partial_results(self):
        d = base()
        d["instances"][0]["clock"] = "phantom"
        with pytest.raises(DiagnosticsError):
            system.parse_system(json.dumps(d))


class TestCheck:
    def test_clean_design(self):
        assert check_codes(base()) == []

    def test_e001_type_mismatch(self):
        d = base()
        d["modules"][1]["ports"][0]["type"] = "uint9"
        assert check_codes(d) == ["E001"]

    def test_e001_message_names_both_ends(self):
        d = base()
        d["modules"][1]["ports"][0]["type"] = "uint9"
        desc = system.parse_system(json.dumps(d))
        (diag,) = system.check(desc)
        assert "gen0.out" in diag.message and "uint9" in diag.message

    def test_list_chunk_mismatch_is_legal(self):
        d = pipeline(type_text="list<uint8>", stages=0, chunk_src=2, chunk_dst=3)
        assert check_codes(d) == []

    def test_e002_undriven_input(self):
        d = base()
        d["connections"] = []
        assert check_codes(d) == ["E002"]

    def test_e003_multiply_driven(self):
        d = base()
        d["modules"].append(
            {
                "name": "Gen2",
                "behavior": "source",
                "ports": [{"name": "out", "dir": "out", "type": "uint8"}],
            }
        )
        d["instances"].append({"name": "gen1", "module": "Gen2", "clock": "main"})
        d["connections"].append({"from": "gen1.out", "to": "eat0.in"})
        assert check_codes(d) == ["E003"]

    def test_e004_fanout_needs_fork(self):
        d = base()
        d["modules"].append(
            {
                "name": "Eat2",
                "behavior": "sink",
                "ports": [{"name": "in", "dir": "in", "type": "uint8"}],
            }
        )
        d["instances"].append({"name": "eat1", "module": "Eat2", "clock": "main"})
        d["connections"].append({"from": "gen0.out", "to": "eat1.in"})
        assert check_codes(d) == ["E004"]

    def test_fork_makes_fanout_legal(self):
        d = base()
        d["modules"] += [
            {
                "name": "Fork2",
                "behavior": "fork",
                "ports": [
                    {"name": "in", "dir": "in", "type": "uint8"},
                    {"name": "o0", "dir": "out", "type": "uint8"},
                    {"name": "o1", "dir": "out", "type": "uint8"},
                ],
            },
            {
                "name": "Eat2",
                "behavior": "sink",
                "ports": [{"name": "in", "dir": "in", "type": "uint8"}],
            },
        ]
        d["instances"] += [
            {"name": "split", "module": "Fork2", "clock": "main"},
            {"name": "eat1", "module": "Eat2", "clock": "main"},
        ]
        d["connections"] = [
            {"from": "gen0.out", "to": "split.in"},
            {"from": "split.o0", "to": "eat0.in"},
            {"from": "split.o1", "to": "eat1.in"},
        ]
        assert check_codes(d) == []

    def _with_service(self, kind="telemetry", port_type="uint16", direction="out"):
        d = base()
        d["modules"].append(
            {
                "name": "Probe",
                "behavior": "source" if direction == "out" else "sink",
                "ports": [{"name": "p", "dir": direction, "type": port_type}],
            }
        )
        d["instances"].append({"name": "probe0", "module": "Probe", "clock": "main"})
        svc = {"name": "svc", "kind": kind}
        if kind == "telemetry":
            svc["out_width"] = 1
        d["services"] = [svc]
        d["bindings"] = [{"instance": "probe0", "port": "p", "service": "svc"}]
        return d

    def test_e005_unknown_service(self):
        d = self._with_service()
        d["bindings"][0]["service"] = "ghost"
        assert "E005" in check_codes(d)

    def test_e005_wrong_direction(self):
        d = self._with_service(direction="in")
        codes = check_codes(d)
        assert "E005" in codes
        # the sink's input is also undriven in this arrangement
        assert "E002" in codes

    def test_e005_assertion_needs_uint32(self):
        d = self._with_service(kind="assertion", port_type="uint16")
        assert "E005" in check_codes(d)
        ok = self._with_service(kind="assertion", port_type="uint32")
        assert check_codes(ok) == []

    def test_e005_telemetry_needs_fixed_size(self):
        d = self._with_service(port_type="list<uint8>")
        d["modules"][-1]["ports"][0]["chunk_size"] = 1
        assert "E005" in check_codes(d)

    def test_e005_host_comm_needs_host_endpoint(self):
        d = self._with_service(kind="host_comm")
        assert "E005" in check_codes(d)

    def test_e005_unbound_host_endpoint_port(self):
        d = base()
        d["modules"].append(
            {
                "name": "Host",
                "behavior": "host_endpoint",
                "ports": [{"name": "in", "dir": "in", "type": "uint8"}],
            }
        )
        d["instances"].append({"name": "h0", "module": "Host", "clock": "main"})
        d["connections"].append({"from": "gen0.out", "to": "h0.in"})
        d["connections"].pop(0)
        d["services"] = [{"name": "host", "kind": "host_comm"}]
        d["bindings"] = []
        codes = check_codes(d)
        assert "E005" in codes and "E002" in codes  # eat0.in is now undriven

    def test_e005_duplicate_binding(self):
        d = self._with_service()
        d["bindings"].append(dict(d["bindings"][0]))
        assert "E005" in check_codes(d)

    def test_e006_checker_reports_unknown_clock(self):
        desc = system.parse_system(json.dumps(base()))
        broken = system.SystemDesc(
            name=desc.name,
            clocks=(),
            modules=desc.modules,
            instances=desc.instances,
            connections=desc.connections,
        )
        codes = [d.code for d in system.check(broken)]
        assert "E006" in codes

    def test_deterministic_and_order_stable(self):
        d = base()
        d["modules"][1]["ports"][0]["type"] = "uint9"
        d["connections"].append({"from": "gen0.out", "to": "eat0.in"})
        text = json.dumps(d)
        runs = []
        for _ in range(3):
            desc = system.parse_system(text)
            runs.append([x.render() for x in system.check(desc)])
        assert runs[0] == runs[1] == runs[2]
        assert len(runs[0]) > 1


class TestSchema:
    def test_shipped_designs_validate(self):
        schema = load_schema("system.schema.json")
        for path in sorted(DESIGNS.glob("*.json")):
            jsonschema.validate(json.loads(path.read_text()), schema)

    def test_generated_designs_validate(self):
        schema = load_schema("system.schema.json")
        jsonschema.validate(pipeline(), schema)
        jsonschema.validate(
            pipeline(type_text="list<uint8>", chunk_src=2, chunk_dst=3), schema
        )
