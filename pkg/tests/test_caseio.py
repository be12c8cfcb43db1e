import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loadshed import caseio
from loadshed.caseio import CaseFormatError, RawCase, RebalanceError, build_network, parse_case

TWO_BUS = """function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
	1	1	50	0	0	0	1	1	0	230	1	1.1	0.9;
	2	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	2	50	0	300	-300	1	100	1	250	10;
];
mpc.branch = [
	1	2	0.0	1.0	0	250	250	250	0	0	1	-360	360;
];
"""


def test_bundled_14():
    raw = caseio.load_case("ieee14")
    s = raw.summary()
    assert (s["buses"], s["branches"]) == (14, 20)
    assert (s["generator_buses"], s["load_buses"]) == (5, 9)


def test_bundled_118():
    raw = caseio.load_case("ieee118")
    s = raw.summary()
    assert (s["buses"], s["branches"]) == (118, 186)
    assert (s["generator_buses"], s["load_buses"]) == (54, 64)


def test_two_bus_text():
    raw = parse_case(TWO_BUS, name="two")
    assert raw.branch.shape[0] == 1 and raw.base_mva == 100
    net = build_network(raw)
    np.testing.assert_allclose(net.injection, [-0.5, 0.5])
    np.testing.assert_allclose(net.admittance, [1.0])


def test_bundled_toy_matches_text():
    a = build_network(caseio.load_case("toy2bus"))
    b = build_network(parse_case(TWO_BUS))
    np.testing.assert_array_equal(a.injection, b.injection)
    np.testing.assert_array_equal(a.admittance, b.admittance)


@pytest.mark.parametrize("name", ["ieee14", "ieee118"])
def test_built_networks_balanced(name):
    net = build_network(caseio.load_case(name))
    assert abs(net.injection.sum()) <= 1e-9
    assert net.m == {"ieee14": 20, "ieee118": 186}[name]
    np.testing.assert_array_equal(net.line_ids, np.arange(1, net.m + 1))


def test_line_ids_skip_out_of_service():
    raw = parse_case(TWO_BUS)
    branch = np.vstack([raw.branch, raw.branch, raw.branch])
    branch[1, caseio.BR_STATUS] = 0
    net = build_network(RawCase(100, raw.bus, raw.gen, branch))
    assert net.m == 2
    np.testing.assert_array_equal(net.line_ids, [1, 3])


def _surplus_case(surplus):
    raw = parse_case(TWO_BUS)
    bus = raw.bus.copy()
    bus = np.vstack([bus, bus[0]])
    bus[2, caseio.BUS_I] = 3
    bus[2, caseio.PD] = 30
    gen = np.vstack([raw.gen, raw.gen])
    gen[1, caseio.GEN_BUS] = 1
    gen[0, caseio.PG] = 60 * (1 + surplus)
    gen[1, caseio.PG] = 20 * (1 + surplus)
    br = np.vstack([raw.branch, raw.branch])
    br[1, caseio.T_BUS] = 3
    return RawCase(100, bus, gen, br)


def test_balanced_case_unchanged():
    net = build_network(_surplus_case(0.0))
    # bus 1: 20 gen - 50 load; bus 2: 60 gen; bus 3: 30 load
    np.testing.assert_allclose(net.injection, [-0.3, 0.6, -0.3], atol=1e-15)


def test_proportional_rebalance():
    net = build_network(_surplus_case(0.01))
    P = (np.array([20.2 - 50, 60.6, -30.0])) / 100
    pos = P > 0
    expected = P.copy()
    expected[pos] *= -P[~pos].sum() / P[pos].sum()
    np.testing.assert_allclose(net.injection, expected, atol=1e-15)
    assert abs(sum(net.injection.tolist())) <= 1e-12


def test_slack_rebalance():
    net = build_network(_surplus_case(0.01), rebalance="slack")
    np.testing.assert_allclose(net.injection, [-0.298, 0.598, -0.3], atol=1e-12)


def test_rebalance_errors():
    raw = parse_case(TWO_BUS)
    bus = raw.bus.copy()
    bus[:, caseio.PD] = 0
    with pytest.raises(RebalanceError):
        build_network(RawCase(100, bus, raw.gen, raw.branch))
    with pytest.raises(ValueError, match="policy"):
        build_network(raw, rebalance="nope")


@pytest.mark.parametrize("edit, line, msg", [
    (lambda t: t.replace("2\t3\t0\t0", "2\t3\tabc\t0"), 7, "non-numeric"),
    (lambda t: t.replace("0.9;\n\t2", "0.9\t7;\n\t2"), 7, "ragged"),
    (lambda t: t.replace("];\nmpc.gen", "\nmpc.gen").split("mpc.branch")[0].replace("];", ""), None, "unterminated"),
])
def test_parse_errors_have_line_numbers(edit, line, msg):
    with pytest.raises(CaseFormatError, match=msg) as err:
        parse_case(edit(TWO_BUS))
    if line is not None:
        assert err.value.line == line
        assert f"line {line}" in str(err.value)
    else:
        assert err.value.line is not None


def test_missing_section():
    with pytest.raises(CaseFormatError, match="mpc.branch"):
        parse_case(TWO_BUS.split("mpc.branch")[0])
    with pytest.raises(CaseFormatError, match="baseMVA"):
        parse_case(TWO_BUS.replace("mpc.baseMVA = 100;", ""))


def test_structural_errors():
    raw = parse_case(TWO_BUS)
    with pytest.raises(CaseFormatError, match="columns"):
        RawCase(100, raw.bus[:, :5], raw.gen, raw.branch)
    br = raw.branch.copy()
    br[0, caseio.T_BUS] = 9
    with pytest.raises(CaseFormatError, match="unknown bus"):
        RawCase(100, raw.bus, raw.gen, br)
    br = raw.branch.copy()
    br[0, caseio.BR_X] = 0
    with pytest.raises(CaseFormatError, match="reactance"):
        RawCase(100, raw.bus, raw.gen, br)
    # an out-of-service branch may carry any reactance
    br[0, caseio.BR_STATUS] = 0
    RawCase(100, raw.bus, raw.gen, br)


def test_json_roundtrip_and_errors(tmp_path):
    raw = caseio.load_case("ieee14")
    p = tmp_path / "c.json"
    p.write_text(caseio.to_json(raw))
    back = caseio.load_case(str(p))
    np.testing.assert_array_equal(back.branch, raw.branch)
    with pytest.raises(CaseFormatError, match="line 1"):
        caseio.parse_json("{bad")
    with pytest.raises(CaseFormatError, match="branch"):
        caseio.parse_json(json.dumps({"base_mva": 100, "bus": [], "gen": []}))


def test_matpower_file_roundtrip(tmp_path):
    raw = caseio.load_case("ieee118")
    p = tmp_path / "case118.m"
    p.write_text(caseio.serialize_case(raw))
    back = caseio.load_case(str(p))
    for key in ("bus", "gen", "branch"):
        np.testing.assert_array_equal(getattr(back, key), getattr(raw, key))
    assert back.base_mva == raw.base_mva


finite = st.floats(-1e6, 1e6, allow_nan=False, width=64)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(1, 8), st.data())
def test_roundtrip_fuzz(n, m, data):
    ids = data.draw(st.lists(st.integers(1, 10_000), min_size=n, max_size=n, unique=True))
    bus = np.array([[i] + data.draw(st.lists(finite, min_size=12, max_size=12)) for i in ids])
    gen = np.array([[data.draw(st.sampled_from(ids))] + data.draw(st.lists(finite, min_size=20, max_size=20))])
    gen[:, caseio.GEN_STATUS] = 1
    rows = []
    for _ in range(m):
        f, t = data.draw(st.permutations(ids))[:2]
        rows.append([f, t] + data.draw(st.lists(finite, min_size=11, max_size=11)))
    branch = np.array(rows)
    branch[:, caseio.BR_X] = np.abs(branch[:, caseio.BR_X]) + 0.5
    raw = RawCase(data.draw(st.floats(1, 1e4)), bus, gen, branch)
    back = parse_case(caseio.serialize_case(raw))
    assert back.base_mva == raw.base_mva
    for key in ("bus", "gen", "branch"):
        np.testing.assert_array_equal(getattr(back, key), getattr(raw, key))


def test_comments_and_commas():
    text = TWO_BUS.replace("1\t1\t50", "1,1,50 ").replace("mpc.gen = [", "mpc.gen = [ % gens")
    raw = parse_case(text)
    assert raw.bus[0, caseio.PD] == 50
