import json
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
DESIGNS = REPO / "designs"
SCHEMAS = REPO / "schema"
GOLDEN = REPO / "golden"


def load_schema(name: str) -> dict:
    return json.loads((SCHEMAS / name).read_text())


def pipeline(
    *,
    type_text: str = "uint8",
    stages: int = 3,
    monitored: bool = True,
    clocks=None,
    src_clock: str = "main",
    dst_clock: str = "main",
    chunk_src: int | None = None,
    chunk_dst: int | None = None,
) -> dict:
    """One source -> one sink design, parameterized for the sim tests."""
    src_port = {"name": "out", "dir": "out", "type": type_text}
    dst_port = {"name": "in", "dir": "in", "type": type_text}
    if chunk_src is not None:
        src_port["chunk_size"] = chunk_src
    if chunk_dst is not None:
        dst_port["chunk_size"] = chunk_dst
    return {
        "name": "pipe",
        "clocks": clocks or [{"name": "main", "period": 1}],
        "modules": [
            {"name": "Gen", "behavior": "source", "ports": [src_port]},
            {"name": "Eat", "behavior": "sink", "ports": [dst_port]},
        ],
        "instances": [
            {"name": "gen0", "module": "Gen", "clock": src_clock},
            {"name": "eat0", "module": "Eat", "clock": dst_clock},
        ],
        "connections": [
            {
                "from": "gen0.out",
                "to": "eat0.in",
                "buffer_stages": stages,
                "monitored": monitored,
            }
        ],
    }


def elaborated(design: dict):
    from esic import fabric, system

    desc = system.parse_system(json.dumps(design))
    diags = system.check(desc)
    assert diags == [], [d.render() for d in diags]
    return fabric.elaborate(desc)
