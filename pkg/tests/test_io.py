import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from stitmix import io, stit
from stitmix.config import ConfigError, from_dict, load_config
from stitmix.geometry import Window
from stitmix.tessellation import Tessellation


def test_defaults():
    cfg = load_config(None)
    assert (cfg.a, cfg.b, cfg.t, cfg.s) == (1.0, 4.0, 0.5, 0.1)
    assert cfg.measure.build().lambda_hit(Window(1.0).polytope()) == pytest.approx(4.0)


def test_config_file(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("seed: 7\nmeasure: {kind: isotropic}\nwindow: {a: 0.5, b: 2}\nmixing: {b_grid: [2, 3]}\n")
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.a == 0.5 and cfg.b == 2.0
    assert cfg.measure.build().lambda_hit(Window(1.0).polytope()) == pytest.approx(8.0)
    assert from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad", [
    {"window": {"a": 4, "b": 1}},
    {"times": {"t": 0.1, "s": 0.2}},
    {"replicates": 0},
    {"measure": {"kind": "hexagonal"}},
    {"unknown_key": 1},
    {"mixing": {"b_grid": [8, 4]}},
    {"measure": {"kind": "discrete", "gamma": 2.0, "atoms": [[1, 0], [-1, 0], [0, 1]],
                 "weights": [0.25, 0.25, 0.5]}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_uneven_law_allowed_when_not_strict():
    d = {"measure": {"kind": "discrete", "gamma": 2.0, "atoms": [[1, 0], [-1, 0], [0, 1]],
                     "weights": [0.25, 0.25, 0.5]}}
    cfg = from_dict(d, strict_measure=False)
    assert not cfg.measure.build(strict=False).theta.is_even()


def test_csv_format(tmp_path):
    p = io.write_csv(tmp_path / "x.csv", ["a", "b"], [(1, 0.1), (2, 1 / 3)])
    raw = p.read_bytes()
    assert raw == b"a,b\r\n1,0.1\r\n2,0.3333333333333333\r\n"
    assert float(raw.split(b"\r\n")[2].split(b",")[1]) == 1 / 3


def test_json_round_trip(tmp_path):
    st = stit.simulate(stit.HyperplaneMeasure.isotropic(), Window(1.0), 2.0, np.random.default_rng(1))
    T = st.tessellation()
    p = io.write_json(tmp_path / "t.json", T.to_json())
    back = Tessellation.from_json(io.read_json(p))
    assert len(back) == len(T)
    assert back.total_volume() == pytest.approx(T.total_volume(), rel=1e-15)
    assert io.dumps_json(back.to_json()) == io.dumps_json(T.to_json())


def test_svg_is_well_formed():
    st = stit.simulate(stit.HyperplaneMeasure.axis_parallel(), Window(1.0), 2.0, np.random.default_rng(2))
    T = st.tessellation()
    svg = io.render_tessellation(T)
    root = ET.fromstring(svg.split("\n", 1)[1])
    assert root.tag.endswith("svg") and root.get("version") == "1.1"
    polys = root.findall(".//{http://www.w3.org/2000/svg}polygon")
    assert len(polys) == len(T) + 1
    assert sum(p.get("fill") != "none" for p in polys) == 1
    assert math.isclose(float(root.get("width")), 600)


def test_svg_rejects_3d():
    st = stit.simulate(stit.HyperplaneMeasure.axis_parallel(dim=3), Window(1.0, 3), 0.2,
                       np.random.default_rng(0))
    with pytest.raises(ValueError):
        io.render_tessellation(st.tessellation())
