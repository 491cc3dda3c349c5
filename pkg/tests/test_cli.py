import csv
import math
from pathlib import Path

import numpy as np
import pytest

from bbmnet.cli import EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_UNSTABLE, main
from bbmnet.config import (
    ConfigError,
    FileIC,
    SolitaryIC,
    ZeroIC,
    dump_config,
    initial_state,
    load_config,
    parse_config,
)
from bbmnet.experiment import run_experiment
from bbmnet.fd import Bootstrap, Layout
from bbmnet.network import JunctionCondition

ROOT = Path(__file__).resolve().parents[1]
C2 = ROOT / "configs" / "two_edge_c2.ini"
C5 = ROOT / "configs" / "two_edge_c5.ini"
ORACLE = ROOT / "configs" / "oracle_check.ini"

SMALL = """
[network]
p = 1
junction = mass

[edge.0]
orientation = incoming
mu = 1.0
length = 20

[edge.1]
orientation = outgoing
mu = 1.2
nu = 0.1
length = 20

[grid]
dx = 0.05
dt = 0.05
horizon = 2

[initial]
kind = solitary
c = 2
x0 = 12

[output]
stride = 10
figures = false
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summary(path):
    return {r["key"]: r["value"] for r in read_csv(path / "summary.csv")}


def write_small(tmp_path, text=SMALL):
    p = tmp_path / "small.ini"
    p.write_text(text)
    return p


# --- config --------------------------------------------------------------------


def test_parse_sample_config():
    cfg = load_config(C2)
    assert cfg.network.n_edges == 2 and cfg.network.edges[1].mu == 1.1
    assert cfg.network.junction_condition is JunctionCondition.MASS_CONSERVATION
    assert cfg.grid.dx == 0.025 and cfg.grid.horizon == 40
    assert cfg.initial_condition == SolitaryIC(2.0, 60.0, 0)
    assert cfg.outputs.stride == 40 and cfg.bootstrap is Bootstrap.AUTO


def test_auto_bootstrap_resolution():
    from bbmnet.experiment import resolve_bootstrap

    assert resolve_bootstrap(parse_config(SMALL)) is Bootstrap.SEMI_IMPLICIT
    same = parse_config(SMALL, overrides=["edge.1.mu=1.0", "edge.1.nu=0"])
    assert resolve_bootstrap(same) is Bootstrap.EXACT_TRANSLATE
    assert resolve_bootstrap(parse_config(SMALL, overrides=["edge.1.mu=1.0", "edge.1.nu=0", "initial.kind=zero"])) is Bootstrap.SEMI_IMPLICIT
    forced = parse_config(SMALL, overrides=["run.bootstrap=exact"])
    assert resolve_bootstrap(forced) is Bootstrap.EXACT_TRANSLATE


def test_defaults():
    cfg = parse_config(SMALL)
    e = cfg.network.edges[0]
    assert (e.alpha, e.gamma, e.nu) == (1.0, 1.0, 0.0)
    assert cfg.outputs.fields is False


def test_overrides():
    cfg = parse_config(SMALL, overrides=["edge.1.mu=1.5", "grid.horizon=3", "network.junction=kirchhoff"])
    assert cfg.network.edges[1].mu == 1.5 and cfg.grid.horizon == 3.0
    assert cfg.network.junction_condition is JunctionCondition.KIRCHHOFF


def test_round_trip_is_identical():
    cfg = load_config(C5)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)


@pytest.mark.parametrize(
    "override,needle",
    [
        ("grid.dx=abc", "[grid] dx"),
        ("edge.1.mu=-1", "[edge.1]"),
        ("edge.0.orientation=sideways", "[edge.0] orientation"),
        ("output.stride=0", "stride"),
        ("network.junction=other", "[network] junction"),
        ("initial.kind=plane", "[initial] kind"),
        ("initial.c=0.5", "[initial]"),
        ("grid.dx=0.3", "[grid]"),
        ("run.bootstrap=magic", "[run] bootstrap"),
        ("edge.1.orientation=incoming", "[network]"),
        ("output.figures=maybe", "[output] figures"),
    ],
)
def test_config_errors_name_the_field(override, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(SMALL, overrides=[override])
    assert needle in str(info.value)


def test_missing_key_and_syntax_errors():
    with pytest.raises(ConfigError, match=r"\[grid\] missing key 'dx'"):
        parse_config(SMALL.replace("dx = 0.05\n", ""))
    with pytest.raises(ConfigError, match="line"):
        parse_config("[grid\ndx=1")
    with pytest.raises(ConfigError, match="--set"):
        parse_config(SMALL, overrides=["nodot=1"])


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(SMALL, base_dir=tmp_path, overrides=["initial.kind=file", "initial.path=nope.csv"])


def test_sampled_initial_condition(tmp_path):
    y = np.linspace(0, 20, 81)
    rows = ["edge,y,u"]
    for i in (0, 1):
        for yy in y:
            rows.append(f"{i},{yy},{math.exp(-yy) * (1 + i * yy)}")
    (tmp_path / "phi.csv").write_text("\n".join(rows) + "\n")
    cfg = parse_config(SMALL, base_dir=tmp_path, overrides=["initial.kind=file", "initial.path=phi.csv"])
    assert isinstance(cfg.initial_condition, FileIC)
    s = initial_state(cfg, Layout(cfg.network, cfg.grid))
    assert s.junction_value == pytest.approx(1.0)
    e1 = s.edge(1)
    yy = np.arange(e1.size) * 0.05
    np.testing.assert_allclose(e1[:-1], (np.exp(-yy) * (1 + yy))[:-1], atol=1e-2)
    assert e1[-1] == 0.0


def test_sampled_initial_condition_must_be_continuous(tmp_path):
    (tmp_path / "bad.csv").write_text("edge,y,u\n0,0,1\n0,20,0\n1,0,2\n1,20,0\n")
    cfg = parse_config(SMALL, base_dir=tmp_path, overrides=["initial.kind=file", "initial.path=bad.csv"])
    with pytest.raises(ConfigError, match="junction"):
        initial_state(cfg, Layout(cfg.network, cfg.grid))


# --- run -----------------------------------------------------------------------


def test_run_writes_artifacts(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "out"
    assert main(["-q", "run", "--config", str(cfg), "--out", str(out), "--fields", "--figures"]) == EXIT_OK
    for name in ("diagnostics.csv", "summary.csv", "fields.csv", "grid.csv", "schema.csv", "config.ini", "fields.png", "mass_error.png"):
        assert (out / name).exists(), name
    diag = read_csv(out / "diagnostics.csv")
    assert [float(r["time"]) for r in diag] == pytest.approx([0, 0.5, 1.0, 1.5, 2.0])
    fields = read_csv(out / "fields.csv")
    assert len(fields) == 5 and len(fields[0]) == 1 + 801
    schema = read_csv(out / "schema.csv")
    documented = {(r["file"], r["column"]) for r in schema}
    assert {("diagnostics.csv", c) for c in diag[0]} <= documented
    s = summary(out)
    assert s["status"] == "ok" and s["mass_error_kind"] == "percent"
    # resolved config reproduces the run
    assert load_config(out / "config.ini").network == load_config(cfg).network


def test_run_is_deterministic(tmp_path):
    cfg = write_small(tmp_path)
    for name in ("a", "b"):
        assert main(["-q", "run", "--config", str(cfg), "--out", str(tmp_path / name), "--fields", "--stride", "4"]) == 0
    for f in ("diagnostics.csv", "fields.csv", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_round_tripped_config_runs_identically(tmp_path):
    cfg = parse_config(SMALL)
    again = parse_config(dump_config(cfg))
    a, b = run_experiment(cfg), run_experiment(again)
    assert [r.row() for r in a.records] == [r.row() for r in b.records]


def test_zero_initial_condition(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "z"
    assert main(["-q", "run", "--config", str(cfg), "--set", "initial.kind=zero", "--out", str(out), "--fields"]) == 0
    fields = np.loadtxt(out / "fields.csv", delimiter=",", skiprows=1)
    assert np.all(fields[:, 1:] == 0)
    s = summary(out)
    assert s["mass_error_kind"] == "absolute" and float(s["max_delta_mass"]) == 0.0
    assert s["reflected"] == "n/a"
    assert all(r["delta_mass_percent"] == "nan" for r in read_csv(out / "diagnostics.csv"))


def test_instability_exit_code(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "u"
    args = ["-q", "run", "--config", str(cfg), "--out", str(out)]
    args += ["--set", "initial.c=50", "--set", "grid.dx=0.1", "--set", "grid.dt=0.1", "--set", "grid.horizon=10"]
    assert main(args) == EXIT_UNSTABLE
    s = summary(out)
    assert s["status"] == "unstable" and float(s["last_stable_time"]) < 10


def test_config_error_exit_code(tmp_path, caplog):
    cfg = write_small(tmp_path)
    assert main(["run", "--config", str(cfg), "--set", "grid.dx=abc"]) == EXIT_CONFIG
    assert "[grid] dx" in caplog.text
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


# --- sweep ---------------------------------------------------------------------


def test_empty_sweep(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "s"
    assert main(["-q", "sweep", "--config", str(cfg), "--param", "edge.1.mu", "--values", "--out", str(out)]) == 0
    assert read_csv(out / "sweep.csv") == []
    assert (out / "sweep.csv").read_text().startswith("value,status,max_delta_mass,reflected,min_excursion")


def test_sweep_failure_does_not_abort_siblings(tmp_path):
    cfg = write_small(tmp_path)
    out = tmp_path / "s"
    code = main(["-q", "sweep", "--config", str(cfg), "--param", "edge.1.mu", "--values=-1,1.1,1.3", "--out", str(out), "--jobs", "2"])
    assert code == EXIT_CONFIG
    rows = read_csv(out / "sweep.csv")
    assert [r["status"] for r in rows] == ["error", "ok", "ok"]
    assert "mu must be positive" in rows[0]["message"]
    assert (out / "edge.1.mu=1.1" / "diagnostics.csv").exists()
    assert (out / "edge.1.mu=1.3" / "summary.csv").exists()


@pytest.mark.slow
def test_sweep_speed_separates_verdicts(tmp_path):
    out = tmp_path / "c"
    args = ["-q", "sweep", "--config", str(C5), "--param", "initial.c", "--values", "2", "5"]
    args += ["--set", "grid.horizon=25", "--stride", "4", "--no-figures", "--out", str(out)]
    assert main(args) == 0
    assert [r["reflected"] for r in read_csv(out / "sweep.csv")] == ["false", "true"]


@pytest.mark.slow
def test_sweep_dispersion_ratio(tmp_path):
    out = tmp_path / "mu"
    values = ["1.0", "1.1", "1.2", "1.3", "1.4", "1.5"]
    args = ["-q", "sweep", "--config", str(C5), "--param", "edge.1.mu", "--values", *values]
    args += ["--set", "grid.horizon=25", "--stride", "4", "--no-figures", "--out", str(out)]
    assert main(args) == 0
    verdicts = [r["reflected"] == "true" for r in read_csv(out / "sweep.csv")]
    assert verdicts[:2] == [False, False] and verdicts[-1] is True
    # once a reflection appears it persists for larger mu_2
    first = verdicts.index(True)
    assert all(verdicts[first:])


# --- verify ----------------------------------------------------------------------


def test_verify_report(tmp_path):
    out = tmp_path / "v"
    assert main(["-q", "verify", "--config", str(ORACLE), "--out", str(out)]) == EXIT_OK
    rep = {r["key"]: r["value"] for r in read_csv(out / "verify.csv")}
    assert rep["converged"] == "true"
    assert float(rep["sup_difference"]) < 1e-2
    assert float(rep["h_picard"]) == pytest.approx(float(rep["h_fd"]), abs=1e-4)
    res = read_csv(out / "residuals.csv")
    assert len(res) == int(rep["iterations"]) and float(res[-1]["residual"]) < 1e-8


def test_verify_zero_data(tmp_path):
    out = tmp_path / "v0"
    assert main(["-q", "verify", "--config", str(ORACLE), "--set", "initial.kind=zero", "--out", str(out)]) == 0
    rep = {r["key"]: r["value"] for r in read_csv(out / "verify.csv")}
    assert float(rep["sup_difference"]) == 0.0


def test_verify_linear_three_way(tmp_path):
    """gamma = 0: stepper, oracle and an independent refined oracle agree."""
    from bbmnet.experiment import oracle_grid, verify_experiment

    text = SMALL.replace("nu = 0.1\n", "").replace("mu = 1.2", "mu = 1.0")
    # gamma = 0 admits no solitary wave; sample a smooth pulse instead
    y = np.linspace(0, 20, 401)
    rows = ["edge,y,u"] + [f"{i},{v},{math.exp(-((v - 3) ** 2)) + math.exp(-v) * 0.2}" for i in (0, 1) for v in y]
    (tmp_path / "phi.csv").write_text("\n".join(rows) + "\n")
    cfg = parse_config(
        text,
        base_dir=tmp_path,
        overrides=["edge.0.gamma=0", "edge.1.gamma=0", "initial.kind=file", "initial.path=phi.csv", "run.bootstrap=semi-implicit"],
    )
    coarse = verify_experiment(cfg, oracle_grid(cfg, 0.05, 0.0125, 20.0), 0.25)
    fine = verify_experiment(cfg, oracle_grid(cfg, 0.025, 0.00625, 20.0), 0.25)
    assert coarse.converged and fine.converged
    assert coarse.sup_difference < 1e-2 and fine.sup_difference < 1e-2
    diff = max(
        np.max(np.abs(a - b[::2, ::2])) for a, b in zip(coarse.picard.values, fine.picard.values)
    )
    assert diff < 1e-3


def test_verify_inconclusive(tmp_path):
    out = tmp_path / "vi"
    code = main(["-q", "verify", "--config", str(ORACLE), "--max-iters", "2", "--tol", "1e-15", "--out", str(out)])
    assert code == EXIT_INCONCLUSIVE
    rep = {r["key"]: r["value"] for r in read_csv(out / "verify.csv")}
    assert rep["converged"] == "false" and rep["iterations"] == "2"


def test_verify_rejects_bad_oracle_grid(tmp_path):
    base = ["-q", "verify", "--config", str(ORACLE), "--out", str(tmp_path)]
    assert main(base + ["--y-max", "5"]) == EXIT_CONFIG
    assert main(base + ["--y-max", "150"]) == EXIT_CONFIG
    assert main(base + ["--t-final", "0.3", "--t-step", "0.25"]) == EXIT_CONFIG
