"""Round-trip tests for the structured-text tower documents."""

import random

import pytest

from quadlab import errors
from quadlab.nest import (
    NestBudgets,
    build_principal_nest,
    landing_address,
    markov_partition,
    return_branch_at,
)
from quadlab.serialize import (
    nest_document,
    parse_nest_document,
    read_nest,
    write_nest,
)


def towers_equal(a, b):
    assert a.parameter == b.parameter
    assert a.precision == b.precision
    assert a.budgets == b.budgets
    assert len(a.levels) == len(b.levels)
    for la, lb in zip(a.levels, b.levels):
        assert la.interval.lower == lb.interval.lower
        assert la.interval.upper == lb.interval.upper
        assert la.interval.upper.precision == lb.interval.upper.precision
        assert (la.v, la.tau, la.central) == (lb.v, lb.tau, lb.central)
        assert la.critical_address == lb.critical_address
        assert la.landing_steps == lb.landing_steps
        assert la.critical_point == lb.critical_point
        assert la.gape == lb.gape
        ca = la.interval.boundary_certificate
        cb = lb.interval.boundary_certificate
        assert (ca is None) == (cb is None)
        if ca is not None:
            assert ca.checked_steps == cb.checked_steps
            assert ca.margin == cb.margin
            assert (ca.verified, ca.inherited) == (cb.verified, cb.inherited)
        assert la._registry == lb._registry
        assert la._branch_times == lb._branch_times


class TestRoundTrip:
    def test_bit_exact_at_17(self):
        n = build_principal_nest("1.7", 3)
        return_branch_at(n, 1, n.map.ctx.div(n.radius(1), 2))
        doc = nest_document(n)
        m = parse_nest_document(doc)
        towers_equal(n, m)
        assert nest_document(m) == doc

    def test_precision_annotation_respected(self):
        n = build_principal_nest("1.9", 2,
                                 NestBudgets(precision_start=1024))
        m = parse_nest_document(nest_document(n))
        assert m.precision == 1024
        assert all(lv.interval.upper.precision == 1024 for lv in m.levels)
        towers_equal(n, m)

    def test_random_parameter_panel(self):
        rng = random.Random(91)
        done = 0
        while done < 8:
            a = rng.uniform(1.55, 1.99)
            try:
                n = build_principal_nest(a, 2)
            except (errors.RegularParameter, errors.RenormalizationSuspected,
                    errors.BudgetExceeded):
                continue
            doc = nest_document(n)
            m = parse_nest_document(doc)
            towers_equal(n, m)
            assert nest_document(m) == doc
            done += 1

    def test_file_round_trip(self, tmp_path):
        n = build_principal_nest("1.7", 2)
        path = tmp_path / "tower.txt"
        write_nest(n, path)
        towers_equal(n, read_nest(path))


class TestLoadedTowerBehaviour:
    def test_queries_reuse_recorded_indices(self):
        n = build_principal_nest("1.7", 3)
        x = n.map.ctx.div(n.radius(1), 2)
        original = return_branch_at(n, 1, x)
        m = parse_nest_document(nest_document(n))
        loaded = return_branch_at(m, 1, m.map.ctx.div(m.radius(1), 2))
        assert loaded.index == original.index
        assert loaded.domain == original.domain
        assert loaded.return_time == original.return_time

    def test_addresses_resolve_after_load(self):
        n = build_principal_nest("1.7", 3)
        m = parse_nest_document(nest_document(n))
        addr = m.levels[1].critical_address
        total = sum(m.branch_return_time(1, i) for i in addr)
        assert total == m.levels[1].landing_steps == 146

    def test_fresh_discovery_continues_numbering(self):
        n = build_principal_nest("1.7", 3)
        m = parse_nest_document(nest_document(n))
        x = -0.7 * float(n.radius(1))
        assert return_branch_at(m, 1, x).index == \
            return_branch_at(n, 1, x).index

    def test_landing_and_markov_on_loaded_tower(self):
        n = build_principal_nest("1.7", 3)
        m = parse_nest_document(nest_document(n))
        la = landing_address(m, 1, m.map.ctx.div(m.radius(1), 2))
        assert len(la.address) == 8 and la.landing_time == 68
        assert markov_partition("1.7", m, 2, 8).piece_count == 108


class TestRejection:
    def doc(self):
        return nest_document(build_principal_nest("1.7", 2))

    def test_version_gate(self):
        bad = self.doc().replace("quadlab-nest 1", "quadlab-nest 2", 1)
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document(bad)

    def test_truncated(self):
        lines = self.doc().splitlines()
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document("\n".join(lines[:len(lines) // 2]))

    def test_trailing_content(self):
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document(self.doc() + "extra 1\n")

    def test_budget_out_of_order(self):
        lines = self.doc().splitlines()
        i = next(k for k, ln in enumerate(lines) if ln.startswith("budget"))
        lines[i], lines[i + 1] = lines[i + 1], lines[i]
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document("\n".join(lines))

    def test_endpoints_must_be_ordered(self):
        lines = self.doc().splitlines()
        lo = next(k for k, ln in enumerate(lines) if ln.startswith("lower"))
        hi = next(k for k, ln in enumerate(lines) if ln.startswith("upper"))
        lines[lo], lines[hi] = ("lower " + lines[hi].split()[1],
                                "upper " + lines[lo].split()[1])
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document("\n".join(lines))

    def test_bad_flag_and_bad_address(self):
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document(
                self.doc().replace("central yes", "central maybe", 1))
        n = build_principal_nest("1.7", 3)
        doc = nest_document(n).replace("address 1,2", "address 1,x", 1)
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document(doc)

    def test_branch_row_trail_length_checked(self):
        n = build_principal_nest("1.7", 3)
        lines = nest_document(n).splitlines()
        i = next(k for k, ln in enumerate(lines) if ln.startswith("branch "))
        parts = lines[i].split()
        parts[2] = str(int(parts[2]) + 1)
        lines[i] = " ".join(parts)
        with pytest.raises(errors.MalformedDocument):
            parse_nest_document("\n".join(lines))
