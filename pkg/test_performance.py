"""Tests for the threaded fold runner"""
import pytest

from performance import ThreadedFoldRunner


def test_results_come_back_in_item_order():
    runner = ThreadedFoldRunner(num_threads=4)
    assert runner.run(list(range(10)), lambda index, item: (index, item * item)) == [(i, i * i) for i in range(10)]


def test_lowest_failing_item_is_reported():
    def process(index, item):
        if index in (2, 5):
            raise ValueError(f"fold {index}")
        return item

    runner = ThreadedFoldRunner(num_threads=3)
    with pytest.raises(ValueError, match="fold 2"):
        runner.run(["a"] * 8, process)


def test_empty_work_list():
    assert ThreadedFoldRunner(2).run([], lambda index, item: item) == []
