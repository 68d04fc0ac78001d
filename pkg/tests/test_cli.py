"""End-user command-line interface: subcommands, formats, exit codes."""

import numpy as np
import pytest

import qpol2
from qpol2 import fileio
from qpol2.cli import main
from qpol2 import (
    bell_state,
    correlation_tensor,
    kraus_from_diagonal_mueller,
    propagate_tensor,
)
from conftest import K_BELL, concurrence_state


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def sweep_table(out):
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    return header, rows


# ------------------------------------------------------------------- sweep

def test_sweep_default_table(capsys):
    code, out, _ = run(capsys, "sweep")
    assert code == 0
    header, rows = sweep_table(out)
    assert header == fileio.SWEEP_COLUMNS
    assert len(rows) == 11
    col = {name: i for i, name in enumerate(header)}
    last = rows[-1]  # m = 1: identity channel
    assert np.isclose(last[col["m"]], 1.0)
    assert np.isclose(last[col["concurrence_opp"]], 1.0, atol=1e-9)
    assert np.isclose(last[col["concurrence_tpp"]], 1.0, atol=1e-9)
    assert np.isclose(last[col["purity_opp"]], 1.0, atol=1e-12)
    assert np.isclose(last[col["purity_tpp"]], 1.0, atol=1e-12)
    mid = rows[5]  # m = 0.5
    assert np.isclose(mid[col["purity_opp"]], 0.4375, atol=1e-12)
    assert np.isclose(mid[col["purity_tpp"]], 0.296875, atol=1e-12)
    assert np.isclose(mid[col["dephasing_opp"]], 0.5, atol=1e-12)
    assert np.isclose(mid[col["dephasing_tpp"]], 0.75, atol=1e-12)
    # Entanglement thresholds: the OPP concurrence turns on above m = 1/3,
    # the TPP concurrence above m = 1/sqrt(3).
    for row in rows:
        m = row[col["m"]]
        c_opp = row[col["concurrence_opp"]]
        c_tpp = row[col["concurrence_tpp"]]
        assert (c_opp > 0) == (m > 1 / 3)
        assert (c_tpp > 0) == (m > 3**-0.5)


def test_sweep_single_mode_and_file_output(capsys, tmp_path):
    out_path = tmp_path / "sweep.csv"
    code, out, _ = run(
        capsys, "sweep", "--modes", "opp", "--steps", "3", "--out", str(out_path)
    )
    assert code == 0
    assert out == ""
    lines = out_path.read_text().strip().splitlines()
    assert lines[0].split(",") == [
        "m", "concurrence_opp", "purity_opp", "entropy_opp", "dephasing_opp"
    ]
    assert len(lines) == 4


def test_sweep_range_validation(capsys):
    assert run(capsys, "sweep", "--m-min", "0.9", "--m-max", "0.5")[0] == 2
    assert run(capsys, "sweep", "--m-max", "1.5")[0] == 2
    assert run(capsys, "sweep", "--steps", "1")[0] == 2


# ---------------------------------------------------------------------- mc

def write_mc_config(path, **kwargs):
    fileio.write_json(kwargs, path)
    return str(path)


def test_mc_transparent_medium(capsys, tmp_path):
    cfg = write_mc_config(
        tmp_path / "cfg.json",
        mu_s=1e-5, g=0.5, d=0.1, acceptance_deg=45.0, n_photons=400, seed=3,
    )
    prefix = str(tmp_path / "run")
    code, out, _ = run(capsys, "mc", "--config", cfg, "--out", prefix)
    assert code == 0
    fields = dict(kv.split("=") for kv in out.split())
    assert np.isclose(float(fields["m"]), 1.0, atol=1e-6)
    assert np.isclose(float(fields["eta"]), 1e-5 * 0.1 * 0.5)
    ensemble = fileio.kraus_from_json(f"{prefix}.kraus.json")
    assert ensemble.weights.size == 400  # every photon transmitted
    mueller = fileio.read_matrix_csv(f"{prefix}.mueller.csv")
    assert np.allclose(mueller, np.eye(4), atol=1e-6)


def test_mc_eta_grid_outputs(capsys, tmp_path):
    cfg = write_mc_config(
        tmp_path / "cfg.json",
        mu_s=10.0, g=0.9, eta_grid=[0.05, 0.3], acceptance_deg=45.0,
        n_photons=8000, seed=7,
    )
    prefix = str(tmp_path / "grid")
    code, out, _ = run(capsys, "mc", "--config", cfg, "--out", prefix)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2
    ms = [float(line.split("m=")[1]) for line in lines]
    assert ms[0] > ms[1]  # thicker slab depolarizes more
    for i in range(2):
        assert (tmp_path / f"grid.{i}.kraus.json").exists()
        assert (tmp_path / f"grid.{i}.mueller.csv").exists()


def test_mc_determinism(capsys, tmp_path):
    cfg = write_mc_config(
        tmp_path / "cfg.json",
        mu_s=10.0, g=0.9, d=0.02, acceptance_deg=45.0, n_photons=1500, seed=11,
    )
    code_a, _, _ = run(capsys, "mc", "--config", cfg, "--out", str(tmp_path / "a"))
    code_b, _, _ = run(capsys, "mc", "--config", cfg, "--out", str(tmp_path / "b"))
    assert code_a == code_b == 0
    assert (tmp_path / "a.kraus.json").read_bytes() == (
        tmp_path / "b.kraus.json"
    ).read_bytes()
    assert (tmp_path / "a.mueller.csv").read_bytes() == (
        tmp_path / "b.mueller.csv"
    ).read_bytes()


def test_mc_max_paths_subsampling(capsys, tmp_path):
    cfg = write_mc_config(
        tmp_path / "cfg.json",
        mu_s=1e-5, g=0.5, d=0.1, acceptance_deg=45.0, n_photons=300, seed=3,
    )
    prefix = str(tmp_path / "sub")
    code, _, _ = run(
        capsys, "mc", "--config", cfg, "--out", prefix, "--max-paths", "50"
    )
    assert code == 0
    ensemble = fileio.kraus_from_json(f"{prefix}.kraus.json")
    assert ensemble.weights.size == 50
    assert np.allclose(ensemble.weights, 1.0 / 50)


def test_mc_no_transmission_exit_code(capsys, tmp_path):
    cfg = write_mc_config(
        tmp_path / "cfg.json",
        mu_s=50.0, g=0.0, d=1.0, acceptance_deg=0.5, n_photons=40, seed=0,
    )
    code, _, err = run(capsys, "mc", "--config", cfg, "--out", str(tmp_path / "x"))
    assert code == 1
    assert "transmission" in err


def test_mc_config_errors(capsys, tmp_path):
    both = write_mc_config(
        tmp_path / "both.json",
        mu_s=1.0, g=0.5, d=0.1, eta_grid=[0.1], n_photons=10, seed=0,
    )
    assert run(capsys, "mc", "--config", both, "--out", str(tmp_path / "x"))[0] == 2
    badg = write_mc_config(
        tmp_path / "badg.json", mu_s=1.0, g=1.0, d=0.1, n_photons=10, seed=0
    )
    assert run(capsys, "mc", "--config", badg, "--out", str(tmp_path / "y"))[0] == 2
    missing = str(tmp_path / "absent.json")
    assert run(capsys, "mc", "--config", missing, "--out", str(tmp_path / "z"))[0] == 2


# --------------------------------------------------------------- propagate

def test_propagate_identity_channel(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    channel = tmp_path / "id.json"
    fileio.kraus_to_json(qpol2.KrausEnsemble.identity(), channel)
    prefix = str(tmp_path / "out")
    code, out, _ = run(
        capsys, "propagate", "--state", str(state), "--channel", str(channel),
        "--out", prefix,
    )
    assert code == 0
    metrics = fileio.read_json(f"{prefix}.metrics.json")
    assert np.isclose(metrics["concurrence"], 1.0, atol=1e-9)
    assert np.isclose(metrics["purity"], 1.0, atol=1e-12)
    assert np.isclose(metrics["entropy"], 0.0, atol=1e-9)
    assert np.isclose(metrics["dephasing"], 0.0, atol=1e-12)
    rho_out = fileio.density_from_json(f"{prefix}.state.json")
    assert np.allclose(rho_out, bell_state(), atol=1e-12)


def test_propagate_depolarizer_purity_and_tensor(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    channel = tmp_path / "depol.json"
    fileio.kraus_to_json(kraus_from_diagonal_mueller(0.5, 0.5, 0.5), channel)
    prefix = str(tmp_path / "out")
    code, _, _ = run(
        capsys, "propagate", "--state", str(state), "--channel", str(channel),
        "--mode", "tpp-independent", "--out", prefix,
    )
    assert code == 0
    metrics = fileio.read_json(f"{prefix}.metrics.json")
    assert np.isclose(metrics["purity"], 0.296875, atol=1e-12)
    tensor = fileio.read_matrix_csv(f"{prefix}.tensor.csv")
    m1 = np.diag([1.0, 0.5, 0.5, 0.5])  # congruence covers both arms
    assert np.allclose(tensor, propagate_tensor(m1, K_BELL), atol=1e-12)


def test_propagate_opp_mode(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    channel = tmp_path / "depol.json"
    fileio.kraus_to_json(kraus_from_diagonal_mueller(0.5, 0.5, 0.5), channel)
    prefix = str(tmp_path / "opp")
    code, _, _ = run(
        capsys, "propagate", "--state", str(state), "--channel", str(channel),
        "--mode", "opp", "--out", prefix,
    )
    assert code == 0
    metrics = fileio.read_json(f"{prefix}.metrics.json")
    assert np.isclose(metrics["purity"], 0.4375, atol=1e-12)
    assert np.isclose(metrics["dephasing"], 0.5, atol=1e-12)


def test_propagate_file_errors(capsys, tmp_path):
    state2 = tmp_path / "one.json"
    fileio.density_to_json(np.eye(2) / 2, state2)
    channel = tmp_path / "id.json"
    fileio.kraus_to_json(qpol2.KrausEnsemble.identity(), channel)
    code, _, _ = run(
        capsys, "propagate", "--state", str(state2), "--channel", str(channel),
        "--out", str(tmp_path / "o"),
    )
    assert code == 2  # one-photon states are not a two-photon pipeline input
    code, _, _ = run(
        capsys, "propagate", "--state", str(tmp_path / "absent.json"),
        "--channel", str(channel), "--out", str(tmp_path / "o"),
    )
    assert code == 2


# -------------------------------------------------------------------- tomo

def test_tomo_noiseless_bell(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    prefix = str(tmp_path / "t")
    code, out, _ = run(
        capsys, "tomo", "--state", str(state), "--pairs", "1000000",
        "--out", prefix,
    )
    assert code == 0
    fid = float(out.split("fidelity=")[1])
    assert fid > 1 - 1e-9
    lines = (tmp_path / "t.counts.csv").read_text().strip().splitlines()
    assert len(lines) == 37
    rho_hat = fileio.density_from_json(f"{prefix}.state.json")
    assert np.allclose(rho_hat, bell_state(), atol=1e-5)


def test_tomo_noisy_requires_seed(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    code, _, _ = run(
        capsys, "tomo", "--state", str(state), "--noisy",
        "--out", str(tmp_path / "t"),
    )
    assert code == 2


def test_tomo_noisy_fidelity(capsys, tmp_path):
    state = tmp_path / "st.json"
    fileio.density_to_json(concurrence_state(0.9), state)
    code, out, _ = run(
        capsys, "tomo", "--state", str(state), "--pairs", "10000",
        "--seed", "4", "--noisy", "--out", str(tmp_path / "t"),
    )
    assert code == 0
    assert float(out.split("fidelity=")[1]) > 0.99


def test_tomo_pairs_validation(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    code, _, _ = run(
        capsys, "tomo", "--state", str(state), "--pairs", "0",
        "--out", str(tmp_path / "t"),
    )
    assert code == 2


# --------------------------------------------------------------------- fit

def test_fit_identity_roundtrip(capsys, tmp_path):
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    code, out, _ = run(capsys, "fit", "--kin", str(kin), "--kout", str(kin))
    assert code == 0
    params = [float(v) for v in out.split("params=")[1].split()[0].split(",")]
    assert np.allclose(params, [1.0, 1.0, 1.0], atol=1e-8)


def test_fit_diagonal_recovery_to_json(capsys, tmp_path):
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    kout = tmp_path / "kout.csv"
    m = np.diag([1.0, 0.8, 0.6, 0.9])
    fileio.write_matrix_csv(propagate_tensor(m, K_BELL), kout)
    result_path = tmp_path / "fit.json"
    code, _, _ = run(
        capsys, "fit", "--kin", str(kin), "--kout", str(kout),
        "--out", str(result_path),
    )
    assert code == 0
    doc = fileio.read_json(result_path)
    assert doc["model"] == "diagonal"
    assert doc["converged"] is True
    assert np.abs(np.array(doc["params"]) - [0.8, 0.6, 0.9]).max() < 1e-8


def test_fit_accepts_density_json_inputs(capsys, tmp_path):
    state = tmp_path / "bell.json"
    fileio.density_to_json(bell_state(), state)
    code, out, _ = run(
        capsys, "fit", "--kin", str(state), "--kout", str(state),
        "--model", "isotropic",
    )
    assert code == 0
    assert "converged=True" in out


def test_fit_general_single_input_exits_3(capsys, tmp_path):
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    report_path = tmp_path / "report.json"
    code, _, err = run(
        capsys, "fit", "--kin", str(kin), "--kout", str(kin),
        "--model", "general", "--seed", "0", "--out", str(report_path),
    )
    assert code == 3
    assert "lie_algebra_dim=6" in err
    doc = fileio.read_json(report_path)
    assert doc["stabilizer"]["lie_algebra_dim"] == 6
    assert doc["stabilizer"]["identifiable"] is False


def test_fit_argument_validation(capsys, tmp_path):
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    code, _, _ = run(capsys, "fit", "--kin", str(kin), "--kout", str(kin),
                     "--kout", str(kin))
    assert code == 2  # mismatched pair counts
    code, _, _ = run(
        capsys, "fit", "--kin", str(kin), "--kin", str(kin),
        "--kout", str(kin), "--kout", str(kin),
    )
    assert code == 2  # diagonal model takes exactly one pair
    code, _, _ = run(
        capsys, "fit", "--kin", str(tmp_path / "absent.csv"), "--kout", str(kin)
    )
    assert code == 2


# ------------------------------------------------------------------- image

def test_image_reconstruction(capsys, tmp_path):
    hh, ww = np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4),
                         indexing="ij")
    truth = np.stack(
        [np.ones((3, 4)), 0.3 + 0.6 * hh, 0.3 + 0.6 * ww, 0.4 + 0.3 * hh],
        axis=2,
    )
    tensors = np.einsum("hwa,ab,hwb->hwab", truth, K_BELL, truth)
    grid = tmp_path / "grid.bin"
    fileio.write_grid(tensors, grid)
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    out_dir = tmp_path / "map"
    code, out, _ = run(
        capsys, "image", "--kin", str(kin), "--grid", str(grid),
        "--out-dir", str(out_dir),
    )
    assert code == 0
    assert "pixels=12" in out
    assert "n_failed=0" in out
    m11 = np.loadtxt(out_dir / "m11.csv", delimiter=",")
    assert np.abs(m11 - truth[:, :, 1]).max() < 1e-8
    # Re-running yields byte-identical planes.
    out_dir2 = tmp_path / "map2"
    run(capsys, "image", "--kin", str(kin), "--grid", str(grid),
        "--out-dir", str(out_dir2))
    assert (out_dir / "m11.csv").read_bytes() == (out_dir2 / "m11.csv").read_bytes()


def test_image_single_pixel(capsys, tmp_path):
    m = np.diag([1.0, 0.7, 0.6, 0.5])
    tensors = propagate_tensor(m, K_BELL)[None, None]
    grid = tmp_path / "grid.bin"
    fileio.write_grid(tensors, grid)
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    out_dir = tmp_path / "one"
    code, out, _ = run(
        capsys, "image", "--kin", str(kin), "--grid", str(grid),
        "--out-dir", str(out_dir), "--threads", "2",
    )
    assert code == 0
    assert "pixels=1" in out
    assert abs(float(np.loadtxt(out_dir / "m11.csv", delimiter=",")) - 0.7) < 1e-8


def test_image_bad_grid_file(capsys, tmp_path):
    kin = tmp_path / "kin.csv"
    fileio.write_matrix_csv(K_BELL, kin)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"xy")
    code, _, _ = run(
        capsys, "image", "--kin", str(kin), "--grid", str(bad),
        "--out-dir", str(tmp_path / "m"),
    )
    assert code == 2


# ----------------------------------------------------------------- general

def test_usage_and_help_exit_codes(capsys):
    assert run(capsys)[0] == 2  # a subcommand is required
    assert run(capsys, "--help")[0] == 0
    assert run(capsys, "unknown-command")[0] == 2


def test_stdout_uses_full_precision(capsys):
    code, out, _ = run(capsys, "sweep", "--steps", "2", "--modes", "opp")
    assert code == 0
    # One third appears in no row; spot-check that long decimals survive.
    row0 = out.strip().splitlines()[1].split(",")
    assert row0[2] == "0.25"  # purity at m = 0 prints exactly
