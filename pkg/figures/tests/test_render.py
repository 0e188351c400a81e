import os
import subprocess
import sys

import pytest

from epifigures import FigureError, FigureSpec, render
from epifigures.cli import main


def write_csv(path, header, rows, schema="#schema=v1"):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(schema + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


@pytest.fixture
def sim_csv(tmp_path):
    path = tmp_path / "sim.csv"
    rows = [(k, 1000, size, float(size), 3, int(size >= 200))
            for k, size in enumerate([1, 2, 5, 700, 650, 3, 710, 2, 690, 1])]
    write_csv(path, "run,n,final_size,severity,initial,major", rows)
    return str(path)


@pytest.fixture
def fig2_csv(tmp_path):
    path = tmp_path / "fig2.csv"
    header = ("n,d,cutoff,n_sims,rho_hat,rho_lo,rho_hi,n_major,z_hat,z_lo,"
              "z_hi,rho_analytic,z_analytic")
    rows = [(n, 1, 200, 10000, 0.70, 0.69, 0.71, 10000, 0.705, 0.70, 0.71,
             0.7114, 0.7114) for n in
            (120, 240, 480, 960, 1440, 1920, 2560, 3200, 3840)]
    write_csv(path, header, rows)
    return str(path)


@pytest.fixture
def sweep_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    header = "theta,d,ip_law,R_L,R_star,z,rho,residual,n_mc"
    rows = []
    for law in ("constant", "exponential"):
        for d in (1, 2, 3, 4):
            for i in range(11):
                theta = round(0.1 * i, 2)
                z = max(0.0, theta - 0.2) * (0.5 + 0.1 * d)
                rows.append((theta, d, law, 0.5, 0.8, z, z, 0, 100000))
    write_csv(path, header, rows)
    return str(path)


def test_histogram_renders(sim_csv, tmp_path):
    out = str(tmp_path / "h.png")
    render(FigureSpec(inputs=(sim_csv,), kind="histogram", output=out))
    assert os.path.getsize(out) > 2000


def test_histogram_four_panels(sim_csv, tmp_path):
    out = str(tmp_path / "h4.png")
    render(FigureSpec(inputs=(sim_csv,) * 4, kind="histogram", output=out))
    assert os.path.getsize(out) > 2000


def test_convergence_markers_ci_and_asymptote(fig2_csv, tmp_path):
    out = str(tmp_path / "c.png")
    render(FigureSpec(inputs=(fig2_csv,), kind="convergence", output=out))
    assert os.path.getsize(out) > 2000


def test_sweep_two_panel_four_curves(sweep_csv, tmp_path):
    out = str(tmp_path / "s.png")
    render(FigureSpec(inputs=(sweep_csv,), kind="sweep", output=out))
    assert os.path.getsize(out) > 2000


def test_identical_inputs_identical_bytes(sweep_csv, tmp_path):
    a, b = str(tmp_path / "a.png"), str(tmp_path / "b.png")
    render(FigureSpec(inputs=(sweep_csv,), kind="sweep", output=a))
    render(FigureSpec(inputs=(sweep_csv,), kind="sweep", output=b))
    assert open(a, "rb").read() == open(b, "rb").read()


def test_empty_rows_renders_axes_with_warning(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    write_csv(path, "run,n,final_size,severity,initial,major", [])
    out = str(tmp_path / "e.png")
    render(FigureSpec(inputs=(str(path),), kind="histogram", output=out))
    assert os.path.getsize(out) > 1000
    assert "no data rows" in capsys.readouterr().err


def test_schema_mismatch_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    write_csv(path, "run,n,final_size,severity,initial,major",
              [(0, 10, 1, 1.0, 0, 0)], schema="#schema=v2")
    with pytest.raises(FigureError):
        render(FigureSpec(inputs=(str(path),), kind="histogram",
                          output=str(tmp_path / "x.png")))


def test_missing_columns_rejected(tmp_path):
    path = tmp_path / "cols.csv"
    write_csv(path, "run,n", [(0, 10)])
    with pytest.raises(FigureError):
        render(FigureSpec(inputs=(str(path),), kind="histogram",
                          output=str(tmp_path / "x.png")))


def test_unknown_kind_rejected(sim_csv, tmp_path):
    with pytest.raises(FigureError):
        FigureSpec(inputs=(sim_csv,), kind="pie", output="x.png")


def test_cli_success_and_failure(sim_csv, tmp_path):
    out = str(tmp_path / "cli.png")
    assert main(["--kind", "histogram", "--in", sim_csv, "--out", out]) == 0
    bad = tmp_path / "bad.csv"
    write_csv(bad, "run,n,final_size,severity,initial,major", [],
              schema="#schema=v9")
    assert main(["--kind", "histogram", "--in", str(bad), "--out", out]) == 1


def test_fig_scripts_invoke_cli(sim_csv, tmp_path):
    script = os.path.join(os.path.dirname(__file__), "..", "scripts", "fig1.py")
    out = str(tmp_path / "script.png")
    proc = subprocess.run([sys.executable, script, "--in", sim_csv,
                           "--out", out], capture_output=True)
    assert proc.returncode == 0 and os.path.getsize(out) > 2000


@pytest.mark.skipif(
    subprocess.run([sys.executable, "-c", "import overlapsir"],
                   capture_output=True).returncode != 0,
    reason="primary package not installed")
def test_end_to_end_from_primary_cli(tmp_path):
    # consume the primary strictly through its CLI and CSV interface
    cfg = tmp_path / "m.cfg"
    cfg.write_text("h=4\nd=1\ntheta=0.4\nbeta=3\npi_g=0.025\n"
                   "pi_h_given_gc=0.5\nn=240\nseed=3\n")
    sim = str(tmp_path / "sim.csv")
    proc = subprocess.run([sys.executable, "-m", "overlapsir.cli", "simulate",
                           "--config", str(cfg), "--sims", "200",
                           "--out", sim], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    out = str(tmp_path / "e2e.png")
    assert main(["--kind", "histogram", "--in", sim, "--out", out]) == 0
    assert os.path.getsize(out) > 2000


def test_b1_acceptance(sim_csv, fig2_csv, sweep_csv, tmp_path):
    # renders from all three CSV kinds without error, CI bars and dashed
    # asymptotes included; schema mismatches exit nonzero
    outs = []
    for kind, src in (("histogram", sim_csv), ("convergence", fig2_csv),
                      ("sweep", sweep_csv)):
        out = str(tmp_path / f"b1_{kind}.png")
        assert main(["--kind", kind, "--in", src, "--out", out]) == 0
        assert os.path.getsize(out) > 2000
        outs.append(out)
    bad = tmp_path / "b1_bad.csv"
    write_csv(bad, "theta,d,ip_law,R_L,R_star,z,rho,residual,n_mc", [],
              schema="#schema=v0")
    rejected = main(["--kind", "sweep", "--in", str(bad),
                     "--out", str(tmp_path / "x.png")]) != 0
    ok = rejected and len(outs) == 3
    print(f"B1: {'PASS' if ok else 'FAIL'} — three kinds rendered, "
          f"schema mismatch exits nonzero")
    assert ok
