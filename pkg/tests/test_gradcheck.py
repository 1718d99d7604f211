import pytest

from caunet.gradcheck import (
    check_all,
    check_layer,
    check_whole_model,
    standard_checks,
)


class TestStandardChecks:
    def test_covers_all_layer_types(self):
        names = [name for name, _ in standard_checks()]
        assert names == [
            "cau_rankone", "cau_fullrank", "bilinear_rankone", "concat",
            "softmin", "sumpool", "l2norm", "linear", "prelu",
        ]

    @pytest.mark.parametrize("name,make", standard_checks())
    def test_layer_passes(self, name, make):
        res = check_layer(make, trials=25, name=name)
        assert res.passed, res.line()

    def test_check_all_aggregates(self):
        results = check_all(trials=5)
        assert len(results) == 9
        assert all(r.passed for r in results)

    @pytest.mark.parametrize("bad", ["cau_rankone", "linear", "softmin"])
    def test_corruption_detected(self, bad):
        # sign-flipped analytic input gradients must fail loudly
        results = {r.layer_name: r for r in check_all(trials=5, corrupt=bad)}
        assert not results[bad].passed
        others = [r for n, r in results.items() if n != bad]
        assert all(r.passed for r in others)

    def test_result_line_format(self):
        name, make = standard_checks()[3]  # concat: cheap
        line = check_layer(make, trials=2, name=name).line()
        assert "PASS" in line and "concat" in line


class TestWholeModel:
    def test_can_end_to_end(self):
        res = check_whole_model(trials=2)
        assert res.passed, res.line()
        assert res.max_rel_error < 1e-4
