import pytest

from sparselmi.conic import NONNEG, ProgramBuilder, solve
from sparselmi.sdpa import export_sdpa, read_sdpa

from test_conic import lp_min_x_geq_2, psd_arrow_problem, soc_norm_problem


def test_export_psd_example_text(tmp_path):
    path = tmp_path / "psd.dat-s"
    export_sdpa(psd_arrow_problem(), path)
    lines = [l for l in path.read_text().splitlines()
             if l and not l.startswith(('"', "*"))]
    assert lines[0].split() == ["1"]          # mDIM
    assert lines[1].split() == ["1"]          # one block
    assert lines[2].split() == ["2"]          # PSD block of side 2
    assert [float(t) for t in lines[3].split()] == [1.0]
    entries = {tuple(l.split()[:4]): float(l.split()[4]) for l in lines[4:]}
    # F_1 = diag(1,1) appears negated twice through s = h - Gx
    assert entries[("1", "1", "1", "1")] == pytest.approx(1.0)
    assert entries[("1", "1", "2", "2")] == pytest.approx(1.0)
    assert entries[("0", "1", "1", "2")] == pytest.approx(-1.0)


def test_export_lp_only_single_diagonal_block(tmp_path):
    path = tmp_path / "lp.dat-s"
    export_sdpa(lp_min_x_geq_2(), path)
    lines = [l for l in path.read_text().splitlines()
             if l and not l.startswith(('"', "*"))]
    assert int(lines[1]) == 1
    assert int(lines[2]) < 0  # diagonal block type


def test_export_empty_objective(tmp_path):
    b = ProgramBuilder()
    x = b.add_vars(2)
    blk = b.add_block(NONNEG, 2)
    blk.add_g(0, x[0], -1.0)
    blk.add_g(1, x[1], -1.0)
    path = tmp_path / "zero.dat-s"
    export_sdpa(b.build(), path)
    lines = [l for l in path.read_text().splitlines()
             if l and not l.startswith(('"', "*"))]
    assert [float(t) for t in lines[3].split()] == [0.0, 0.0]


@pytest.mark.parametrize("factory", [lp_min_x_geq_2, soc_norm_problem,
                                     psd_arrow_problem])
def test_round_trip_objective(tmp_path, factory):
    prog = factory()
    path = tmp_path / "prog.dat-s"
    export_sdpa(prog, path)
    again = read_sdpa(path)
    assert again.num_vars == prog.num_vars
    v1 = solve(prog).objective_value
    v2 = solve(again).objective_value
    assert v2 == pytest.approx(v1, abs=1e-6)


def test_round_trip_with_equalities(tmp_path):
    b = ProgramBuilder()
    x = b.add_vars(2)
    b.add_objective(x[0], 1.0)
    b.add_objective(x[1], 3.0)
    b.add_equality([x[0], x[1]], [1.0, 1.0], 2.0)
    blk = b.add_block(NONNEG, 2)
    blk.add_g(0, x[0], -1.0)
    blk.add_g(1, x[1], -1.0)
    prog = b.build()
    path = tmp_path / "eq.dat-s"
    export_sdpa(prog, path)
    v1 = solve(prog).objective_value
    v2 = solve(read_sdpa(path)).objective_value
    assert v2 == pytest.approx(v1, abs=1e-6)


def test_reader_rejects_lower_triangle(tmp_path):
    path = tmp_path / "bad.dat-s"
    path.write_text("1\n1\n2\n1.0\n1 1 2 1 5.0\n")
    with pytest.raises(Exception, match="lower-triangle"):
        read_sdpa(path)


def test_reader_rejects_truncated(tmp_path):
    path = tmp_path / "trunc.dat-s"
    path.write_text("1\n1\n")
    with pytest.raises(Exception, match="truncated"):
        read_sdpa(path)


def test_reader_accepts_braced_header(tmp_path):
    path = tmp_path / "braces.dat-s"
    path.write_text('"comment"\n1\n1\n{-2}\n{1.0}\n1 1 1 1 1.0\n0 1 1 1 2.0\n')
    prog = read_sdpa(path)
    assert prog.blocks[0].kind == NONNEG
    sol = solve(prog)
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(2.0, abs=1e-7)
