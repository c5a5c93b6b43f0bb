from pathlib import Path

import pytest

from partsim.cli import main
from partsim.programs import busy_loop_source

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_wcet_reported_values(capsys):
    assert main(["wcet", "--tau-a0", "7.99926", "--tau-p", "4", "--ep", "16.0004", "--ms"]) == 0
    assert "19.99966 ms" in capsys.readouterr().out


def test_wcet_identity_cycles(capsys):
    assert main(["wcet", "--tau-a0", "399963", "--tau-p", "600000", "--ep", "1600030"]) == 0
    assert capsys.readouterr().out.startswith("tau_An = 399963 cycles")


def test_wcet_mixed_units(capsys):
    assert main(["wcet", "--tau-a0", "399963", "--tau-p", "4ms", "--ep", "800020"]) == 0
    assert "19.99966 ms (999983 cycles)" in capsys.readouterr().out


def test_wcet_bad_query(capsys):
    assert main(["wcet", "--tau-a0", "1", "--tau-p", "0", "--ep", "3"]) == 2
    assert "invalid" in capsys.readouterr().err


def test_asm_outputs(tmp_path, capsys):
    src = tmp_path / "busy.s"
    src.write_text(busy_loop_source(4))
    assert main(["asm", str(src), "-o", str(tmp_path / "out")]) == 0
    for ext in (".bin", ".dat", ".lst"):
        assert (tmp_path / f"out{ext}").exists()


def test_asm_empty_file(tmp_path):
    src = tmp_path / "empty.s"
    src.write_text("")
    assert main(["asm", str(src)]) == 0
    assert (tmp_path / "empty.bin").read_bytes() == b""


def test_asm_error_has_line(tmp_path, capsys):
    src = tmp_path / "bad.s"
    src.write_text("mov eax, ebx\nlea eax, [x]\n")
    assert main(["asm", str(src)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", str(CONFIGS / "three_partition.ini")]) == 0
    clash = tmp_path / "clash.ini"
    clash.write_text("[a]\nperiod_cycles=500\nexec_cycles=100\noffset_cycles=30\n"
                     "[b]\nperiod_cycles=500\nexec_cycles=100\noffset_cycles=30\n")
    assert main(["validate", str(clash)]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[a]\nperiod_cycles=0\nexec_cycles=100\n")
    assert main(["validate", str(bad)]) == 2


def test_timeline(capsys):
    assert main(["timeline", "-c", str(CONFIGS / "three_partition.ini"), "--horizon", "2400040"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 8
    assert out[5].split() == ["idle", "1400040", "1600030"]


def _run_config(tmp_path, horizon, extra=""):
    (tmp_path / "busy.s").write_text(busy_loop_source(5))
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[a]\nperiod_cycles=200\nexec_cycles=150\n[run]\nhorizon={horizon}\nsource0=busy.s\n{extra}")
    return cfg


def test_run_zero_horizon(tmp_path, capsys):
    cfg = _run_config(tmp_path, 0, "trace=t.csv\n")
    assert main(["run", "-c", str(cfg), "--trace", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").read_text() == "cycle,event,partition,addr,value\n"


def test_run_trace_is_reproducible(tmp_path, capsys):
    cfg = _run_config(tmp_path, 1000)
    outs = []
    for name in ("a.csv", "b.csv"):
        assert main(["run", "-c", str(cfg), "--trace", str(tmp_path / name), "-v", "1"]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    summary = capsys.readouterr().out
    assert "uart: 2 words" in summary and "retired:" in summary


def test_run_conflict_refused(tmp_path, capsys):
    cfg = tmp_path / "clash.ini"
    cfg.write_text("[a]\nperiod_cycles=500\nexec_cycles=100\noffset_cycles=30\n"
                   "[b]\nperiod_cycles=500\nexec_cycles=100\noffset_cycles=30\n[run]\nhorizon=100\n")
    assert main(["run", "-c", str(cfg)]) == 1
    assert "rejected" in capsys.readouterr().err


def test_run_missing_image(tmp_path, capsys):
    cfg = tmp_path / "x.ini"
    cfg.write_text("[a]\nperiod_cycles=500\nexec_cycles=100\n[run]\nhorizon=10\nimage0=nothere\n")
    assert main(["run", "-c", str(cfg)]) == 2


def test_usage_error():
    with pytest.raises(SystemExit):
        main([])
