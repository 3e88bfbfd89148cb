import threading

import pytest

from app.core.frame_pool import FramePool, default_worker_count


def _add(a, b):
    return a + b


class TestFramePool:
    def test_default_worker_count(self, mocker):
        mocker.patch("app.core.frame_pool.psutil.cpu_count",
                     side_effect=lambda logical=True: 6 if logical else None)
        assert default_worker_count() == 6

    def test_zero_threads_uses_default(self, mocker):
        mocker.patch("app.core.frame_pool.default_worker_count", return_value=3)
        assert FramePool(0).max_threads == 3

    def test_results_keep_submission_order(self):
        pool = FramePool(4)
        assert pool.map(_add, [(i, 10) for i in range(20)]) == [i + 10 for i in range(20)]

    def test_runs_on_several_threads(self):
        seen = set()
        barrier = threading.Barrier(2, timeout=5)

        def work(i):
            seen.add(threading.get_ident())
            barrier.wait()
            return i

        assert FramePool(2).map(work, [(0,), (1,)]) == [0, 1]
        assert len(seen) == 2

    def test_worker_error_is_raised(self):
        def fail(i):
            if i == 2:
                raise ValueError("frame 2")
            return i

        with pytest.raises(ValueError, match="frame 2"):
            FramePool(2).map(fail, [(i,) for i in range(4)])
